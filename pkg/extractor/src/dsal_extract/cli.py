"""Command line front end for feature extraction."""

import argparse
import json
import logging
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsal-extract",
        description="extract frozen-backbone image features into dsal files",
    )
    parser.add_argument("--dataset", required=True,
                        choices=["fake", "cifar100", "imagefolder"])
    parser.add_argument("--backbone", default="resnet18")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--base-fraction", type=float, default=0.5,
                        help="fraction of classes in the base phase")
    parser.add_argument("--phases", type=int, default=0,
                        help="incremental phases after the base phase")
    parser.add_argument("--preprocessing", default="imagenet",
                        choices=["imagenet", "cifar", "none"])
    parser.add_argument("--seed", type=int, default=0,
                        help="class-to-phase assignment seed")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--dataset-root", default="data",
                        help="where the image dataset lives")
    parser.add_argument("--download", action="store_true",
                        help="allow the dataset loader to download")
    parser.add_argument("--pretrained", action=argparse.BooleanOptionalAction,
                        default=True, help="load pretrained backbone weights")
    parser.add_argument("--fake-classes", type=int, default=10)
    parser.add_argument("--fake-train", type=int, default=200)
    parser.add_argument("--fake-test", type=int, default=50)
    parser.add_argument("--fake-image-size", type=int, default=32)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if ns.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    # import after parsing so --help stays fast
    from .extract import ExtractionSpec, extract

    try:
        spec = ExtractionSpec(
            dataset=ns.dataset, backbone=ns.backbone, out_dir=ns.out,
            base_fraction=ns.base_fraction, phases=ns.phases,
            preprocessing=ns.preprocessing, seed=ns.seed,
            pretrained=ns.pretrained, batch_size=ns.batch_size,
            dataset_root=ns.dataset_root, download=ns.download,
            fake_classes=ns.fake_classes, fake_train=ns.fake_train,
            fake_test=ns.fake_test, fake_image_size=ns.fake_image_size,
        )
        summary = extract(spec)
    except ValueError as exc:
        logging.getLogger("dsal_extract").error("invalid request: %s", exc)
        return 2
    except (OSError, RuntimeError) as exc:
        logging.getLogger("dsal_extract").error("extraction failed: %s", exc)
        return 3
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
