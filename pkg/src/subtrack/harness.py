"""Experiment runner CLI and file formats.

Two subcommands::

    subtrack run --algo grouse --step greedy --n 200 --d 10 --obs 60 \
        --steps 2000 --noise 0 --seed 7 --out trace.csv
    subtrack check-equivalence --trials 100 --steps 50 --threshold 1e-9

``run`` streams synthetic observations through one tracker and writes a CSV
trace (``step,error,residual_norm,sigma``). ``check-equivalence`` runs the
gradient-rotation and partial-iSVD updates in lockstep from identical
starting points and reports the largest per-step Frobenius distance between
their iterates.

Exit codes: 0 success, 1 usage error, 2 numerical or validation failure.

File formats (stable, plain text, 0-based indices):
  - basis: first line ``n d``, then n lines of d decimals (17 significant
    digits, lossless round-trip);
  - stream: one line per step, ``t;i1,i2,...;v1,v2,...``;
  - trace CSV: header ``step,error,residual_norm,sigma``, one row per step.
"""

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._backend import backend_name
from .datagen import GroundTruth, StreamConfig, generate_stream, random_orthonormal
from .exceptions import ContractViolationError, FileFormatError, StreamProcessingError
from .kernels import Observation, SubspaceEstimate
from .trackers import (
    BrandTracker,
    ExperimentTrace,
    FullIsvdTracker,
    GrouseTracker,
    PartialIsvdTracker,
    StepPolicy,
    TrackerState,
    grouse_update,
    isvd_partial_update,
    process_stream,
)

USAGE_ERROR = 1
FAILURE = 2


@dataclass(frozen=True)
class TrialDiscrepancy:
    trial: int
    max_discrepancy: float
    worst_step: int


@dataclass(frozen=True)
class EquivalenceReport:
    """Largest per-step distance between the two update paths, per trial."""

    trials: int
    max_step_discrepancy: float
    per_trial: list[TrialDiscrepancy]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def snapshot_basis(estimate: SubspaceEstimate, path) -> None:
    """Write a basis matrix in the plain-text format above."""
    _write_matrix(estimate.basis, path)


def _write_matrix(matrix: np.ndarray, path) -> None:
    lines = [f"{matrix.shape[0]} {matrix.shape[1]}"]
    for row in matrix:
        lines.append(" ".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_basis(path) -> SubspaceEstimate:
    """Read a basis file; validates shape and orthonormality."""
    raw = Path(path).read_text().splitlines()
    lines = [(i + 1, line) for i, line in enumerate(raw) if line.strip()]
    if not lines:
        raise FileFormatError(f"{path}:1: empty file")
    header_no, header = lines[0]
    parts = header.split()
    try:
        n, d = int(parts[0]), int(parts[1])
        if len(parts) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise FileFormatError(f"{path}:{header_no}: expected header 'n d'") from None
    if len(lines) - 1 != n:
        raise FileFormatError(
            f"{path}:{header_no}: expected {n} data rows, found {len(lines) - 1}"
        )
    matrix = np.empty((n, d))
    for row, (line_no, line) in enumerate(lines[1:]):
        fields = line.split()
        if len(fields) != d:
            raise FileFormatError(f"{path}:{line_no}: expected {d} values, found {len(fields)}")
        try:
            matrix[row] = [float(f) for f in fields]
        except ValueError:
            raise FileFormatError(f"{path}:{line_no}: non-numeric value") from None
    return SubspaceEstimate(matrix)


def save_stream(observations, path) -> None:
    """Write observations one per line as ``t;i1,i2,...;v1,v2,...``."""
    lines = []
    for t, obs in enumerate(observations):
        indices = ",".join(str(int(i)) for i in obs.omega)
        values = ",".join(_fmt(v) for v in obs.values)
        lines.append(f"{t};{indices};{values}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_stream(path) -> list[Observation]:
    """Read an observation stream written by :func:`save_stream`."""
    observations: list[Observation] = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(";")
        if len(parts) != 3:
            raise FileFormatError(f"{path}:{line_no}: expected 't;indices;values'")
        try:
            t = int(parts[0])
            omega = np.array([int(f) for f in parts[1].split(",") if f != ""], dtype=np.int64)
            values = np.array([float(f) for f in parts[2].split(",") if f != ""])
        except ValueError:
            raise FileFormatError(f"{path}:{line_no}: non-numeric field") from None
        if t != len(observations):
            raise FileFormatError(
                f"{path}:{line_no}: step index {t}, expected {len(observations)}"
            )
        try:
            observations.append(Observation(omega, values))
        except ContractViolationError as exc:
            raise FileFormatError(f"{path}:{line_no}: {exc}") from None
    return observations


def write_trace_csv(trace: ExperimentTrace, path) -> None:
    """Write the fixed-schema trace CSV."""
    with open(path, "w") as handle:
        handle.write("step,error,residual_norm,sigma\n")
        for rec in trace.records:
            handle.write(
                f"{rec.step},{_fmt(rec.error)},{_fmt(rec.residual_norm)},{_fmt(rec.sigma)}\n"
            )


def write_equivalence_csv(report: EquivalenceReport, path) -> None:
    with open(path, "w") as handle:
        handle.write("trial,max_discrepancy,worst_step\n")
        for rec in report.per_trial:
            handle.write(f"{rec.trial},{_fmt(rec.max_discrepancy)},{rec.worst_step}\n")


def _derived_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit sub-seeds derived from one user seed."""
    state = np.random.SeedSequence(seed).generate_state(count, np.uint64)
    return [int(s) for s in state]


def _make_tracker(args, initial_n: int, initial_d: int, init_seed: int):
    if args.algo == "isvd-full":
        return FullIsvdTracker(initial_n, max_rank=initial_d)
    u0 = random_orthonormal(initial_n, initial_d, init_seed)
    if args.algo == "grouse":
        step = args.step or "greedy"
        policy = StepPolicy.fixed(args.eta) if step == "fixed" else StepPolicy.greedy()
        return GrouseTracker(u0, policy)
    if args.algo == "isvd-partial":
        return PartialIsvdTracker(u0)
    return BrandTracker(u0, decay=args.decay if args.decay is not None else 0.95)


def _snapshot_hook(args, out_path: Path):
    if not args.snapshot_every:
        return None
    stem = out_path.with_suffix("")

    def hook(record, tracker):
        if record.step % args.snapshot_every != 0:
            return
        basis = tracker.estimate.basis if hasattr(tracker, "estimate") else tracker.state.u
        if basis.shape[1] > 0:
            _write_matrix(basis, Path(f"{stem}_basis_{record.step:06d}.txt"))

    return hook


def run_experiment(args) -> int:
    """Run one tracker over one stream and write its trace CSV."""
    started = time.perf_counter()
    out_path = Path(args.out)
    truth = None
    if args.import_stream:
        observations = load_stream(args.import_stream)
    else:
        truth_seed, stream_seed = _derived_seeds(args.seed, 2)
        config = StreamConfig(
            n=args.n, d=args.d, num_steps=args.steps, obs_count=args.obs,
            noise_stddev=args.noise, seed=stream_seed, init_seed=args.init_seed,
        )
        truth = GroundTruth.random(args.n, args.d, truth_seed)
        observations = generate_stream(config, truth).observations
    if args.export_stream:
        save_stream(observations, args.export_stream)
    tracker = _make_tracker(args, args.n, args.d, args.init_seed)
    truth_estimate = truth.u_bar if truth is not None else None
    hook = _snapshot_hook(args, out_path)
    try:
        tracker, trace = process_stream(tracker, observations, truth_estimate, hook)
    except StreamProcessingError as exc:
        write_trace_csv(ExperimentTrace(exc.records), out_path)
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    duration = time.perf_counter() - started
    trace.metadata = {
        "algorithm": args.algo,
        "step_policy": args.step or ("greedy" if args.algo == "grouse" else None),
        "decay": args.decay if args.algo == "brand" else None,
        "n": args.n, "d": args.d, "obs": args.obs, "steps": len(trace.records),
        "noise": args.noise, "seed": args.seed, "init_seed": args.init_seed,
        "backend": backend_name(), "duration_seconds": duration,
    }
    write_trace_csv(trace, out_path)
    final_error = trace.records[-1].error if trace.records else float("nan")
    print(
        f"run algo={args.algo} steps={len(trace.records)} "
        f"final_error={final_error:.6e} backend={backend_name()} "
        f"duration={duration:.2f}s -> {out_path}"
    )
    return 0


def check_equivalence(args) -> int:
    """Lockstep comparison of the two update paths over seeded trials."""
    policy = StepPolicy.greedy()
    per_trial = []
    overall = 0.0
    children = np.random.SeedSequence(args.seed).spawn(args.trials)
    for trial in range(args.trials):
        truth_seed, init_seed, stream_seed = (
            int(s) for s in children[trial].generate_state(3, np.uint64)
        )
        truth = GroundTruth.random(args.n, args.d, truth_seed)
        config = StreamConfig(
            n=args.n, d=args.d, num_steps=args.steps, obs_count=args.obs,
            noise_stddev=args.noise, seed=stream_seed, init_seed=init_seed,
        )
        stream = generate_stream(config, truth)
        u0 = random_orthonormal(args.n, args.d, init_seed)
        rotation_state = TrackerState(u0)
        gradient_state = TrackerState(u0)
        worst = 0.0
        worst_step = 0
        for obs in stream:
            gradient_state = grouse_update(gradient_state, obs, policy)
            rotation_state = isvd_partial_update(rotation_state, obs)
            diff = float(
                np.linalg.norm(gradient_state.estimate.basis - rotation_state.estimate.basis)
            )
            if diff > worst:
                worst, worst_step = diff, gradient_state.step_count
        per_trial.append(TrialDiscrepancy(trial, worst, worst_step))
        overall = max(overall, worst)
    report = EquivalenceReport(args.trials, overall, per_trial)
    if args.out:
        write_equivalence_csv(report, args.out)
    passed = overall < args.threshold
    print(
        f"equivalence trials={args.trials} steps={args.steps} "
        f"max_step_discrepancy={overall:.6e} threshold={args.threshold:.6e} "
        f"{'PASS' if passed else 'FAIL'}"
    )
    return 0 if passed else FAILURE


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract reserves 2 for
    numerical failures, so remap to 1."""

    def error(self, message):
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_stream_flags(parser, default_steps: int):
    parser.add_argument("--n", type=int, default=200, help="ambient dimension")
    parser.add_argument("--d", type=int, default=10, help="subspace dimension")
    parser.add_argument("--obs", type=int, default=60, help="revealed entries per step")
    parser.add_argument("--steps", type=int, default=default_steps, help="stream length")
    parser.add_argument("--noise", type=float, default=0.0, help="additive noise stddev")
    parser.add_argument("--seed", type=int, default=7, help="stream/ground-truth seed")


def _build_parser() -> _Parser:
    parser = _Parser(prog="subtrack", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one tracker, write a CSV trace")
    run_p.add_argument("--algo", choices=["grouse", "isvd-full", "isvd-partial", "brand"],
                       default="grouse")
    run_p.add_argument("--step", choices=["greedy", "fixed"], default=None,
                       help="step policy (grouse only)")
    run_p.add_argument("--eta", type=float, default=None, help="step size for --step fixed")
    run_p.add_argument("--decay", type=float, default=None,
                       help="down-weight factor (brand only, default 0.95)")
    _add_stream_flags(run_p, default_steps=2000)
    run_p.add_argument("--init-seed", type=int, default=101, help="seed for the initial basis")
    run_p.add_argument("--out", required=True, help="trace CSV path")
    run_p.add_argument("--export-stream", default=None, help="write the stream to this path")
    run_p.add_argument("--import-stream", default=None,
                       help="replay observations from this path instead of generating")
    run_p.add_argument("--snapshot-every", type=int, default=None,
                       help="write a basis snapshot every k steps")

    chk_p = sub.add_parser("check-equivalence",
                           help="lockstep comparison of the two update paths")
    _add_stream_flags(chk_p, default_steps=50)
    chk_p.add_argument("--trials", type=int, default=100)
    chk_p.add_argument("--threshold", type=float, default=1e-9)
    chk_p.add_argument("--out", default=None, help="per-trial report CSV path")
    return parser


def _validate_run(parser: _Parser, args) -> None:
    if args.step == "fixed" and args.eta is None:
        parser.error("--step fixed requires --eta")
    if args.eta is not None and args.step != "fixed":
        parser.error("--eta only applies with --step fixed")
    if args.step is not None and args.algo != "grouse":
        parser.error("--step only applies to --algo grouse")
    if args.decay is not None and args.algo != "brand":
        parser.error("--decay only applies to --algo brand")
    if args.decay is not None and not 0.0 < args.decay <= 1.0:
        parser.error("--decay must lie in (0, 1]")
    if args.algo == "isvd-full" and not args.import_stream and args.obs != args.n:
        parser.error("--algo isvd-full requires --obs equal to --n")
    if args.snapshot_every is not None and args.snapshot_every < 1:
        parser.error("--snapshot-every must be >= 1")
    if args.steps < 0:
        parser.error("--steps must be nonnegative")
    if not args.import_stream:
        if not 0 < args.d < args.n:
            parser.error("need 0 < d < n")
        if not 1 <= args.obs <= args.n:
            parser.error("--obs must lie in [1, n]")


def _validate_check(parser: _Parser, args) -> None:
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.threshold < 0:
        parser.error("--threshold must be nonnegative")
    if not 0 < args.d < args.n:
        parser.error("need 0 < d < n")
    if not 1 <= args.obs <= args.n:
        parser.error("--obs must lie in [1, n]")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            _validate_run(parser, args)
            return run_experiment(args)
        _validate_check(parser, args)
        return check_equivalence(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ContractViolationError, FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
