"""Monte Carlo coverage studies.

Every replication draws its own random streams from
``SeedSequence(master_seed, spawn_key=(scenario, rep, slot))``: slot 0
generates the data and slot ``1 + j`` drives method ``j``. Results therefore
do not depend on scheduling, on the thread count, or on which other methods
run alongside.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import DistributionSpec, sample, true_tail_params
from .exceptions import DomainError, NumericError
from .intervals import METHODS, ci_an, ci_boot, ci_para, ci_ptb, ci_rptb

__all__ = [
    "StudyConfig",
    "ReplicationRecord",
    "SummaryRow",
    "StudyResult",
    "tail_count",
    "c0_grid",
    "run_replication",
    "run_study",
    "sensitivity_sweep",
]

RECORD_FIELDS = (
    "study", "dist", "gamma_true", "n", "c0", "k", "method", "rep",
    "lo", "hi", "covered", "length", "b", "w", "flags",
)  # fmt: skip
SUMMARY_FIELDS = (
    "study", "dist", "gamma_true", "n", "c0", "k", "method",
    "coverage", "avg_length", "mc_se", "effective_B",
)  # fmt: skip


def tail_count(c0, n):
    """``k = [c0 n^(1/3)]``; the small offset stops 1000^(1/3) rounding down to 9."""
    return int(math.floor(c0 * n ** (1.0 / 3.0) + 1e-9))


def c0_grid(start=1.0, stop=5.0, step=0.5):
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class StudyConfig:
    dist: DistributionSpec
    n: int
    c0_grid: tuple = c0_grid()
    methods: tuple = ("ptb", "para", "an", "boot")
    alpha: float = 0.05
    B: int = 200
    m: int = 1000
    c1: float = 2.5
    master_seed: int = 0
    threads: int = 1
    n_boot: int = 1000
    study: str = "study"
    rptb_options: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.B < 1:
            raise DomainError("B must be at least 1")
        if self.n < 3:
            raise DomainError("n must be at least 3")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DomainError(f"unknown methods {sorted(unknown)}")
        if not self.methods:
            raise DomainError("no methods requested")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise DomainError("threads must be at least 1")
        if len(set(self.c0_grid)) != len(self.c0_grid):
            raise DomainError("duplicate c0 values")
        kmin = 10 if "rptb" in self.methods else 2
        for c0 in self.c0_grid:
            k = tail_count(c0, self.n)
            if not kmin <= k <= self.n - 1:
                raise DomainError(f"c0={c0} gives k={k}, outside [{kmin}, {self.n - 1}]")

    @property
    def gamma_true(self):
        return true_tail_params(self.dist)[0]


@dataclass(frozen=True)
class ReplicationRecord:
    study: str
    dist: str
    gamma_true: float
    n: int
    c0: float
    k: int
    method: str
    rep: int
    lo: float
    hi: float
    covered: bool
    length: float
    b: float
    w: float
    flags: str

    @property
    def failed(self):
        return self.flags.startswith("fail")

    def row(self):
        return tuple(getattr(self, f) for f in RECORD_FIELDS)


@dataclass(frozen=True)
class SummaryRow:
    study: str
    dist: str
    gamma_true: float
    n: int
    c0: float
    k: int
    method: str
    coverage: float
    avg_length: float
    mc_se: float
    effective_B: int

    def row(self):
        return tuple(getattr(self, f) for f in SUMMARY_FIELDS)


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: StudyConfig
    records: tuple
    summary: tuple

    def lookup(self, method, c0):
        for s in self.summary:
            if s.method == method and s.c0 == c0:
                return s
        raise KeyError((method, c0))

    def coverage(self, method, c0):
        return self.lookup(method, c0).coverage


def _stream(cfg, scenario, rep, slot):
    seq = np.random.SeedSequence(cfg.master_seed, spawn_key=(scenario, rep, slot))
    return np.random.default_rng(seq)


def _interval(cfg, method, x, k, rng):
    if method == "ptb":
        return ci_ptb(x, k, cfg.c1, cfg.m, cfg.alpha, rng)
    if method == "rptb":
        return ci_rptb(x, k, cfg.c1, cfg.m, cfg.alpha, rng, **cfg.rptb_options)
    if method == "an":
        return ci_an(x, k, cfg.alpha)
    if method == "para":
        return ci_para(x, k, cfg.m, cfg.alpha, rng)
    return ci_boot(x, k, cfg.n_boot, cfg.alpha, rng)


def run_replication(cfg, c0, rep):
    """All requested intervals on one simulated sample."""
    try:
        scenario = cfg.c0_grid.index(c0)
    except ValueError:
        raise DomainError(f"c0={c0} is not in the configured grid") from None
    k = tail_count(c0, cfg.n)
    gamma = cfg.gamma_true
    x = sample(cfg.dist, cfg.n, _stream(cfg, scenario, rep, 0))
    out = []
    for method in cfg.methods:
        rng = _stream(cfg, scenario, rep, 1 + METHODS.index(method))
        base = dict(
            study=cfg.study, dist=cfg.dist.label, gamma_true=gamma, n=cfg.n,
            c0=c0, k=k, method=method, rep=rep,
        )  # fmt: skip
        try:
            ci = _interval(cfg, method, x, k, rng)
        except (NumericError, DomainError, FloatingPointError) as exc:
            nan = float("nan")
            out.append(
                ReplicationRecord(
                    **base, lo=nan, hi=nan, covered=False, length=nan, b=nan, w=nan,
                    flags=f"fail:{type(exc).__name__}",
                )  # fmt: skip
            )
            continue
        flags = []
        if ci.extras.get("saturated"):
            flags.append(f"saturated={ci.extras['saturated']}")
        if ci.extras.get("redraws"):
            flags.append(f"redraws={ci.extras['redraws']}")
        out.append(
            ReplicationRecord(
                **base,
                lo=ci.lo,
                hi=ci.hi,
                covered=ci.covers(gamma),
                length=ci.length,
                b=float(ci.extras.get("b", float("nan"))),
                w=float(ci.extras.get("w", float("nan"))),
                flags=";".join(flags),
            )
        )
    return out


def summarize(cfg, records):
    groups = defaultdict(list)
    for r in records:
        groups[(r.c0, r.method)].append(r)
    rows = []
    for c0 in cfg.c0_grid:
        for method in cfg.methods:
            recs = [r for r in groups[(c0, method)] if not r.failed]
            eff = len(recs)
            if eff:
                hits = sum(r.covered for r in recs)
                cov = hits / eff
                avg_len = math.fsum(r.length for r in recs) / eff
                se = math.sqrt(cov * (1 - cov) / eff)
            else:
                cov = avg_len = se = float("nan")
            rows.append(
                SummaryRow(
                    cfg.study, cfg.dist.label, cfg.gamma_true, cfg.n, c0,
                    tail_count(c0, cfg.n), method, cov, avg_len, se, eff,
                )  # fmt: skip
            )
    return tuple(rows)


def run_study(cfg, progress=None):
    """Run the c0 grid by B replications and aggregate coverage and length."""
    tasks = [(c0, rep) for c0 in cfg.c0_grid for rep in range(cfg.B)]

    def job(task):
        recs = run_replication(cfg, *task)
        if progress is not None:
            progress(task)
        return recs

    if cfg.threads == 1:
        chunks = [job(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(job, tasks))
    records = tuple(r for chunk in chunks for r in chunk)
    return StudyResult(cfg, records, summarize(cfg, records))


def sensitivity_sweep(cfg, c1_grid=(1.5, 2.5, 3.5), progress=None):
    """One study per c1 value; returns ``{c1: StudyResult}``.

    The data and noise streams are shared across c1 values, so differences
    between them reflect c1 alone.
    """
    out = {}
    for c1 in c1_grid:
        if not c1 > 0:
            raise DomainError("c1 values must be positive")
        label = f"{cfg.study}@c1={c1:g}" if len(c1_grid) > 1 else cfg.study
        out[c1] = run_study(replace(cfg, c1=c1, study=label), progress)
    return out
