"""Command-line front end.

Subcommands: ``ci`` (one interval from a data file), ``simulate`` (a
coverage study), ``sensitivity`` (a study repeated over c1 values),
``dp-audit`` (density-ratio check of the noise mechanism) and ``replay``
(rerun a command from its manifest).

Exit codes: 0 success, 1 numeric failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .distributions import DistributionSpec, GpdParams, NoiseRate, gpd_quantile
from .exceptions import DomainError, NumericError
from .intervals import METHODS, ci_an, ci_boot, ci_para, ci_ptb, ci_rptb
from .perturbation import dp_density_ratio, dp_empirical_ratio
from .simulation import (
    RECORD_FIELDS,
    SUMMARY_FIELDS,
    StudyConfig,
    run_study,
    sensitivity_sweep,
)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

ENV_SEED = "EVIPTB_SEED"
ENV_THREADS = "EVIPTB_THREADS"


class UsageError(Exception):
    pass


def version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --------------------------------------------------------------------------
# Parsing helpers


def parse_grid(text):
    """``"1:5:0.5"`` (inclusive start:stop:step) or ``"1,1.5,2"``."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 10) for i in range(count)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return tuple(values)


def parse_methods(text):
    names = tuple(p.strip().lower() for p in text.split(",") if p.strip())
    bad = [n for n in names if n not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {','.join(METHODS)}")
    return names


def read_observations(path):
    """One number per line; a single non-numeric first line is taken as a header."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text") from None
    rows = [(i, ln.strip()) for i, ln in enumerate(lines, 1) if ln.strip()]
    values = []
    for pos, (lineno, text) in enumerate(rows):
        try:
            values.append(float(text))
        except ValueError:
            if pos == 0:
                continue
            raise UsageError(f"{path}:{lineno}: not a number: {text!r}") from None
    if len(values) < 2:
        raise UsageError(f"{path}: need at least two observations")
    return np.array(values)


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _seed(args):
    """Flag, then environment, then fresh entropy (recorded in the manifest)."""
    if args.seed is not None:
        return args.seed
    env = os.environ.get(ENV_SEED)
    if env is None:
        return int(np.random.SeedSequence().entropy)
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{ENV_SEED} must be an integer, got {env!r}") from None


def _threads(args):
    if args.threads is not None:
        value = args.threads
    else:
        env = os.environ.get(ENV_THREADS, "1")
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError("thread count must be at least 1")
    return value


# --------------------------------------------------------------------------
# Manifest


@dataclass
class RunManifest:
    command: str
    argv: list
    flags: dict
    seed: int | None
    version: str = field(default_factory=version)
    timestamp: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    )
    outputs: list = field(default_factory=list)

    def write(self, path):
        Path(path).write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")


def _resolved_argv(args, argv, seed, threads):
    """argv with the effective seed and thread count pinned, so a replay ignores the environment."""
    out = list(argv)
    for flag, value in (("--seed", seed), ("--threads", threads)):
        if value is None or not hasattr(args, flag[2:]):
            continue
        if flag in out:
            i = out.index(flag)
            out[i + 1] = str(value)
        else:
            out += [flag, str(value)]
    return out


def _manifest_path(out):
    return Path(str(out) + ".manifest.json")


def _write_manifest(args, argv, seed, threads, outputs):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    flags = json.loads(json.dumps(flags, default=str))
    m = RunManifest(
        command=args.command,
        argv=_resolved_argv(args, argv, seed, threads),
        flags=flags,
        seed=seed,
        outputs=[str(p) for p in outputs],
    )
    m.write(_manifest_path(outputs[0]))


# --------------------------------------------------------------------------
# Subcommands


def _dist_from_args(args):
    name = args.dist
    if name == "pareto":
        return DistributionSpec.pareto(args.alpha_param)
    if name == "frechet":
        return DistributionSpec.frechet(args.alpha_param)
    if name in ("hw", "hall_welsh"):
        return DistributionSpec.hall_welsh(args.gamma)
    return DistributionSpec.student_t(args.nu)


CI_FIELDS = ("method", "n", "k", "gamma_hat", "lo", "hi", "level", "b", "w")


def cmd_ci(args, argv):
    x = read_observations(args.input)
    seed = _seed(args)
    rng = np.random.default_rng(seed)
    k = args.k
    if not 1 <= k <= x.size - 1:
        raise UsageError(f"--k must lie in [1, {x.size - 1}]")
    method = args.method
    if method == "ptb":
        ci = ci_ptb(x, k, args.c1, args.m, args.alpha, rng, privacy_split=args.privacy_split)
    elif method == "rptb":
        ci = ci_rptb(x, k, args.c1, args.m, args.alpha, rng)
    elif method == "an":
        ci = ci_an(x, k, args.alpha)
    elif method == "para":
        ci = ci_para(x, k, args.m, args.alpha, rng)
    else:
        ci = ci_boot(x, k, args.n_boot, args.alpha, rng)
    nan = float("nan")
    row = (
        ci.method, x.size, ci.k, ci.gamma_hat, ci.lo, ci.hi, ci.level,
        float(ci.extras.get("b", nan)), float(ci.extras.get("w", nan)),
    )  # fmt: skip
    text = ",".join(CI_FIELDS) + "\n" + ",".join(_fmt(v) for v in row) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
        _write_manifest(args, argv, seed, None, [args.out])
    return EXIT_OK


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _summary_path(out):
    p = Path(out)
    return p.with_name(p.stem + "_summary" + p.suffix)


def _plot_paths(out):
    p = Path(out)
    return (
        p.with_name(p.stem + "_plot_coverage" + p.suffix),
        p.with_name(p.stem + "_plot_length" + p.suffix),
    )


PLOT_FIELDS = ("study", "dist", "n", "method", "c0", "k", "value", "mc_se")


def _emit(args, argv, seed, threads, results):
    records = [r.row() for res in results for r in res.records]
    summary = [s.row() for res in results for s in res.summary]
    outputs = [Path(args.out), _summary_path(args.out)]
    _write_text(outputs[0], _csv_text(RECORD_FIELDS, records))
    _write_text(outputs[1], _csv_text(SUMMARY_FIELDS, summary))
    if args.emit_plotdata:
        cov_path, len_path = _plot_paths(args.out)
        cov_rows, len_rows = [], []
        for res in results:
            for s in res.summary:
                key = (s.study, s.dist, s.n, s.method, s.c0, s.k)
                cov_rows.append(key + (s.coverage, s.mc_se))
                len_rows.append(key + (s.avg_length, float("nan")))
        _write_text(cov_path, _csv_text(PLOT_FIELDS, cov_rows))
        _write_text(len_path, _csv_text(PLOT_FIELDS, len_rows))
        outputs += [cov_path, len_path]
    _write_manifest(args, argv, seed, threads, outputs)
    for res in results:
        for s in res.summary:
            print(
                f"{s.study} c0={s.c0:g} k={s.k} {s.method:5s} coverage={s.coverage:.3f} "
                f"(se {s.mc_se:.3f}, B={s.effective_B}) length={s.avg_length:.4f}",
                file=sys.stderr,
            )


def _study_config(args, seed, threads, c1=None):
    try:
        return StudyConfig(
            dist=_dist_from_args(args),
            n=args.n,
            c0_grid=args.c0,
            methods=args.methods,
            alpha=args.alpha,
            B=args.reps,
            m=args.m,
            c1=args.c1 if c1 is None else c1,
            master_seed=seed,
            threads=threads,
            n_boot=args.n_boot,
            study=args.study,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args, argv):
    seed = _seed(args)
    threads = _threads(args)
    cfg = _study_config(args, seed, threads)
    _emit(args, argv, cfg.master_seed, threads, [run_study(cfg)])
    return EXIT_OK


def cmd_sensitivity(args, argv):
    seed = _seed(args)
    threads = _threads(args)
    cfg = _study_config(args, seed, threads)
    sweep = sensitivity_sweep(cfg, args.c1_grid)
    _emit(args, argv, cfg.master_seed, threads, list(sweep.values()))
    return EXIT_OK


AUDIT_FIELDS = (
    "b", "bound", "max_ratio_analytic", "analytic_ok", "worst_z", "worst_z_prime",
    "empirical_ratio", "empirical_se", "pair_analytic", "z_score", "empirical_ok",
)  # fmt: skip


def audit_rows(b_values, theta, grid_size=50, draws=10**7, seed=None):
    """Analytic and Monte Carlo density-ratio audit over a grid of adjacent inputs."""
    z = gpd_quantile(np.linspace(0.01, 0.99, grid_size), theta)
    root = np.random.SeedSequence(seed)
    rows = []
    for b, child in zip(b_values, root.spawn(len(b_values))):
        rate = NoiseRate(b)
        worst, pair = 0.0, (z[0], z[0])
        for zi in z:
            for zj in z:
                r = dp_density_ratio(zi, zj, theta, rate)
                if r > worst:
                    worst, pair = r, (zi, zj)
        bound = math.exp(b)
        emp, se, analytic = dp_empirical_ratio(*pair, theta, rate, draws, np.random.default_rng(child))
        zscore = (emp - analytic) / se if se > 0 else math.inf
        rows.append(
            (
                b, bound, worst, worst <= bound + 1e-9, float(pair[0]), float(pair[1]),
                emp, se, analytic, zscore, abs(zscore) <= 3.0,
            )  # fmt: skip
        )
    return rows


def cmd_dp_audit(args, argv):
    seed = _seed(args)
    try:
        theta = GpdParams(args.gamma, args.beta)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if any(not b > 0 for b in args.b):
        raise UsageError("noise rates must be positive")
    rows = audit_rows(args.b, theta, args.grid_size, args.draws, seed)
    text = _csv_text(AUDIT_FIELDS, rows)
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
        _write_manifest(args, argv, seed, None, [args.out])
    return EXIT_OK


def cmd_replay(args, argv):
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        replay_argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load manifest {args.manifest}: {exc}") from None
    if args.threads is not None:
        i = replay_argv.index("--threads") if "--threads" in replay_argv else None
        if i is None:
            replay_argv += ["--threads", str(args.threads)]
        else:
            replay_argv[i + 1] = str(args.threads)
    if args.out is not None:
        if "--out" not in replay_argv:
            raise UsageError("the manifest's command wrote no output file")
        replay_argv[replay_argv.index("--out") + 1] = args.out
    return main(replay_argv)


# --------------------------------------------------------------------------
# Parser


def _add_dist_flags(p):
    p.add_argument("--dist", choices=("pareto", "frechet", "hw", "hall_welsh", "t"), required=True)
    p.add_argument("--alpha-param", type=float, default=5.0, help="Pareto/Frechet shape alpha")
    p.add_argument("--gamma", type=float, default=0.5, help="Hall-Welsh tail index")
    p.add_argument("--nu", type=float, default=3.0, help="Student t degrees of freedom")


def _add_study_flags(p):
    p.add_argument("--study", default="study")
    _add_dist_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c0", type=parse_grid, default=parse_grid("1:5:0.5"))
    p.add_argument("--methods", type=parse_methods, default=("ptb", "para", "an", "boot"))
    p.add_argument("--reps", type=int, default=200, help="replications B")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (env {ENV_SEED})")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (env {ENV_THREADS})")
    p.add_argument("--out", required=True, help="record CSV; the summary goes next to it")
    p.add_argument("--emit-plotdata", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eviptb", description="Perturbation confidence intervals for the extreme value index."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ci", help="interval for one dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=METHODS, default="ptb")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--c1", type=float, default=2.5)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--privacy-split", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="coverage study over a c0 grid")
    _add_study_flags(p)
    p.add_argument("--c1", type=float, default=2.5)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sensitivity", help="coverage study repeated over c1 values")
    _add_study_flags(p)
    p.add_argument("--c1", dest="c1_grid", type=parse_grid, default=(1.5, 2.5, 3.5))
    p.set_defaults(func=cmd_sensitivity, c1=2.5)

    p = sub.add_parser("dp-audit", help="density-ratio audit of the noise mechanism")
    p.add_argument("--b", type=parse_grid, default=(0.1, 0.5, 1.0, 2.0))
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--draws", type=int, default=10**7)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dp_audit)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="write to this path instead")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"eviptb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"eviptb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FloatingPointError) as exc:
        print(f"eviptb: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
