"""Command-line entry point.

Subcommands: synth, fit, eval, sweep, oracle-check, inspect-checkpoint.
Logging goes to stderr; machine-readable results go to stdout and to files.
Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

Heavy imports happen inside the command handlers so that --threads can pin
the kernel thread count through environment variables before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

log = logging.getLogger("dsal")

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

# Every env var a BLAS/OpenMP backend might consult.
_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _pin_threads(count: int | None) -> None:
    if count is None:
        return
    if "numpy" in sys.modules:
        log.warning("--threads set after numpy was imported; it may not take effect")
    for var in _THREAD_VARS:
        os.environ[var] = str(count)


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _learner_config(ns):
    from .learner import LearnerConfig

    return LearnerConfig(
        gamma=ns.gamma,
        d_buffer=ns.d_buffer,
        seed=ns.seed,
        sigma_main=ns.sigma_main,
        sigma_comp=ns.sigma_comp,
        comp_ratio=ns.comp_ratio,
        chunk_rows=ns.chunk_rows,
        enable_dac=ns.enable_dac,
        enable_plc=ns.enable_plc,
        gamma_comp=ns.gamma_comp,
        debug_checks=ns.debug_checks,
    )


def cmd_synth(ns) -> int:
    from .store import SyntheticSpec, generate_synthetic

    spec = SyntheticSpec(
        classes=ns.classes,
        per_class=ns.per_class,
        d_cnn=ns.dcnn,
        spread=ns.spread,
        seed=ns.seed,
        phases=ns.phases,
        base_classes=ns.base_classes,
        test_per_class=ns.test_per_class,
    )
    split = spec.class_split()  # validates the split before any file I/O
    generate_synthetic(spec, ns.out)
    out = Path(ns.out)
    log.info("wrote %d phase(s) to %s", len(split), out)
    _emit(
        {
            "train_manifest": str(out / "train_manifest.json"),
            "test_manifest": str(out / "test_manifest.json") if ns.test_per_class else None,
            "classes_per_phase": [len(c) for c in split],
        }
    )
    return EXIT_OK


def cmd_fit(ns) -> int:
    import numpy as np

    from dataclasses import replace

    from .evaluation import run_protocol, write_report_csv, write_report_json
    from .learner import save_checkpoint
    from .store import load_manifest

    config = _learner_config(ns)
    train = load_manifest(ns.train)
    test = load_manifest(ns.test)
    state, report = run_protocol(config, train, test)
    doc = report.as_dict()
    if ns.repeats > 1:
        averages = [report.average_accuracy]
        lasts = [report.last_accuracy]
        for offset in range(1, ns.repeats):
            # Reseeding shifts only the buffer projection; data is fixed.
            _, rerun = run_protocol(replace(config, seed=config.seed + offset), train, test)
            averages.append(rerun.average_accuracy)
            lasts.append(rerun.last_accuracy)
        doc["repeats"] = {
            "seeds": [config.seed + i for i in range(ns.repeats)],
            "average_accuracy": {"mean": float(np.mean(averages)), "std": float(np.std(averages))},
            "last_accuracy": {"mean": float(np.mean(lasts)), "std": float(np.std(lasts))},
        }
    if ns.checkpoint_dir:
        save_checkpoint(state, ns.checkpoint_dir)
        log.info("checkpoint written to %s", ns.checkpoint_dir)
    if ns.report:
        write_report_json(report, ns.report)
    if ns.csv:
        write_report_csv(report, ns.csv)
    _emit(doc)
    return EXIT_OK


def cmd_eval(ns) -> int:
    from dataclasses import asdict

    from .evaluation import evaluate_cumulative
    from .learner import load_checkpoint
    from .store import load_manifest

    state = load_checkpoint(ns.checkpoint)
    test = load_manifest(ns.test)
    declared = set().union(*(p.classes for p in test.phases))
    missing = declared - set(state.class_registry)
    if missing:
        log.warning("test declares %d class(es) the learner never saw", len(missing))
    result = evaluate_cumulative(
        state,
        test,
        len(test.phases) - 1,
        frozenset(test.phases[0].classes),
        comp_ratio=ns.comp_ratio,
    )
    doc = asdict(result)
    if ns.report:
        with open(ns.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _emit(doc)
    return EXIT_OK


def cmd_sweep(ns) -> int:
    from .evaluation import sweep_comp_ratio, write_sweep_csv
    from .learner import load_checkpoint
    from .store import load_manifest

    state = load_checkpoint(ns.checkpoint)
    test = load_manifest(ns.test)
    rows = sweep_comp_ratio(state, test, ns.ratios)
    if ns.out:
        write_sweep_csv(rows, ns.out)
    _emit([{"comp_ratio": r, "last_accuracy": a} for r, a in rows])
    return EXIT_OK


def cmd_oracle_check(ns) -> int:
    from .buffer import activate_main, new_buffer
    from .oracle import build_joint_problem, direct_iacm, joint_solve, rel_frobenius
    from .store import (
        SyntheticSpec,
        generate_synthetic,
        load_manifest,
        load_phase,
        one_hot,
    )
    from .stream import PhaseUpdate, StreamState, expand_classes, fit_base, rls_update

    def run_check(manifest) -> int:
        phases = [load_phase(manifest, k) for k in range(len(manifest.phases))]
        buffer = new_buffer(phases[0].d_cnn, ns.d_buffer, ns.seed, ns.sigma_main, "tanh")
        state = None
        blocks = []
        for k, phase in enumerate(phases):
            x = activate_main(buffer, phase.embeddings)
            y_block = one_hot(phase.labels, tuple(phase.class_set))
            if state is None:
                state = fit_base(x, y_block, ns.gamma, tuple(phase.class_set))
            else:
                state = expand_classes(state, phase.class_set)
                y = one_hot(phase.labels, state.column_layout)
                state = rls_update(state, PhaseUpdate(x, y))
            if ns.perturb and k == 0:
                # Deliberate corruption so the check must report failure.
                if state.weights.size:
                    weights = state.weights.copy()
                    weights[0, 0] += ns.perturb
                    state = StreamState(weights, state.iacm, state.column_layout, state.gamma)
                else:
                    iacm = state.iacm.copy()
                    iacm[0, 0] += ns.perturb
                    state = StreamState(state.weights, iacm, state.column_layout, state.gamma)
            blocks.append((x, y_block))
        problem = build_joint_problem(blocks, ns.gamma)
        weight_gap = rel_frobenius(state.weights, joint_solve(problem))
        iacm_gap = rel_frobenius(state.iacm, direct_iacm(problem.activations, ns.gamma))
        discrepancy = max(weight_gap, iacm_gap)
        ok = discrepancy <= ns.tolerance
        _emit(
            {
                "max_rel_frobenius": discrepancy,
                "weights_rel_frobenius": weight_gap,
                "iacm_rel_frobenius": iacm_gap,
                "tolerance": ns.tolerance,
                "pass": ok,
            }
        )
        if not ok:
            log.error("discrepancy %.3e exceeds tolerance %.3e", discrepancy, ns.tolerance)
        return EXIT_OK if ok else EXIT_VERIFICATION

    if ns.train:
        return run_check(load_manifest(ns.train))
    spec = SyntheticSpec(
        classes=ns.classes,
        per_class=ns.per_class,
        d_cnn=ns.dcnn,
        spread=ns.spread,
        seed=ns.seed,
        phases=ns.phases,
    )
    spec.class_split()
    with tempfile.TemporaryDirectory(prefix="dsal-oracle-") as tmp:
        manifest, _ = generate_synthetic(spec, tmp)
        return run_check(manifest)


def cmd_inspect_checkpoint(ns) -> int:
    from .learner import load_checkpoint

    state = load_checkpoint(ns.checkpoint)
    registry = state.class_registry
    _emit(
        {
            "phase_counter": state.phase_counter,
            "classes": len(registry),
            "class_id_range": [min(registry), max(registry)] if registry else None,
            "d_buffer": state.buffer.d_buffer,
            "d_cnn": state.buffer.d_cnn,
            "main_weights_shape": list(state.main.weights.shape),
            "comp_weights_shape": list(state.comp.weights.shape),
            "config": {
                "gamma": state.config.gamma,
                "gamma_comp": state.config.comp_gamma,
                "seed": state.config.seed,
                "sigma_main": state.config.sigma_main,
                "sigma_comp": state.config.sigma_comp,
                "comp_ratio": state.config.comp_ratio,
                "enable_dac": state.config.enable_dac,
                "enable_plc": state.config.enable_plc,
            },
        }
    )
    return EXIT_OK


def _add_learner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.0, help="ridge regularization strength")
    p.add_argument("--dbuffer", dest="d_buffer", type=int, default=512,
                   help="buffer layer width")
    p.add_argument("--seed", type=int, default=0, help="buffer projection seed")
    p.add_argument("--sigma-main", default="relu", help="main-stream activation")
    p.add_argument("--sigma-comp", default="tanh", help="compensation-stream activation")
    p.add_argument("--comp-ratio", type=float, default=0.6,
                   help="compensation weight at inference")
    p.add_argument("--chunk-rows", type=int, default=None,
                   help="process each phase in row chunks of this size")
    p.add_argument("--dac", dest="enable_dac", action=argparse.BooleanOptionalAction,
                   default=True, help="train the compensation stream")
    p.add_argument("--plc", dest="enable_plc", action=argparse.BooleanOptionalAction,
                   default=True, help="zero old-class residue columns")
    p.add_argument("--gamma-comp", type=float, default=None,
                   help="compensation-stream gamma (default: same as --gamma)")
    p.add_argument("--debug-checks", action=argparse.BooleanOptionalAction, default=False,
                   help="verify the running state after every phase (slow)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="JSON file of defaults; explicit flags win")
    common.add_argument("--threads", type=int, default=None,
                        help="pin kernel threads (set before numpy loads)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="dsal",
        description="Dual-stream analytic class-incremental learner over "
                    "precomputed embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic clustered dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True, help="training rows per class")
    p.add_argument("--dcnn", type=int, required=True, help="embedding width")
    p.add_argument("--phases", type=int, default=0,
                   help="incremental phases after the base phase")
    p.add_argument("--base-classes", type=int, default=None,
                   help="classes in the base phase (default: half)")
    p.add_argument("--spread", type=float, default=1.0, help="cluster noise scale")
    p.add_argument("--test-per-class", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    subparsers["synth"] = p

    p = sub.add_parser("fit", parents=[common],
                       help="train over a phase stream and evaluate")
    p.add_argument("--train", required=True, help="training manifest")
    p.add_argument("--test", required=True, help="test manifest")
    _add_learner_flags(p)
    p.add_argument("--repeats", type=int, default=1,
                   help="rerun with shifted buffer seeds, report mean/std")
    p.add_argument("--checkpoint-dir", default=None)
    p.add_argument("--report", default=None, help="write the report as JSON here")
    p.add_argument("--csv", default=None, help="write the per-phase curve as CSV here")
    p.set_defaults(func=cmd_fit)
    subparsers["fit"] = p

    p = sub.add_parser("eval", parents=[common],
                       help="score a saved checkpoint on a test manifest")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--test", required=True, help="test manifest")
    p.add_argument("--comp-ratio", type=float, default=None,
                   help="override the stored compensation ratio")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_eval)
    subparsers["eval"] = p

    p = sub.add_parser("sweep", parents=[common],
                       help="final accuracy across compensation ratios")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--ratios", type=float, nargs="+", required=True)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_sweep)
    subparsers["sweep"] = p

    p = sub.add_parser("oracle-check", parents=[common],
                       help="verify the recursion against a direct joint solve")
    p.add_argument("--train", default=None,
                   help="check on this manifest instead of synthetic data")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--dcnn", type=int, default=16)
    p.add_argument("--phases", type=int, default=5)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--dbuffer", dest="d_buffer", type=int, default=128)
    p.add_argument("--sigma-main", default="relu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="corrupt one update by this amount (must then fail)")
    p.set_defaults(func=cmd_oracle_check)
    subparsers["oracle-check"] = p

    p = sub.add_parser("inspect-checkpoint", parents=[common],
                       help="print a checkpoint summary")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect_checkpoint)
    subparsers["inspect-checkpoint"] = p

    return parser, subparsers


def _apply_config_file(parser, subparsers, ns, argv):
    """Load JSON defaults into the subcommand parser, then reparse.

    Reparsing makes explicitly passed flags win over file values.
    """
    if not ns.config:
        return ns
    with open(ns.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{ns.config}: config file must hold a JSON object")
    target = subparsers[ns.command]
    known = {action.dest for action in target._actions}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"{ns.config}: unknown config keys {sorted(unknown)}")
    target.set_defaults(**doc)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subparsers = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if ns.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    from .errors import (
        ClassOverlapError,
        FormatError,
        ManifestError,
        NumericalError,
        ShapeError,
        UnknownLabelError,
    )

    try:
        ns = _apply_config_file(parser, subparsers, ns, argv)
        _pin_threads(ns.threads)
        return ns.func(ns)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_VERIFICATION
    except (FormatError, ManifestError, UnknownLabelError) as exc:
        log.error("bad input data: %s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_IO
    except (ClassOverlapError, ShapeError, ValueError) as exc:
        log.error("invalid request: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
