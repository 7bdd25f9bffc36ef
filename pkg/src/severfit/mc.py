"""Deterministic, parallel Monte Carlo engine for the simulation study.

Every replication owns a random stream derived from (master seed, cell,
block, replication), so results are bit-identical regardless of execution
order or worker count.  Per-block aggregates are plain sums, which makes the
reduction associative and order-independent.
"""

from __future__ import annotations

import math
import os
import re
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import asymptotics, estimators
from .dist import ExponentialModel, ParetoIModel, RandomSource, ThresholdPair, sample
from .errors import ConfigError, DegenerateError, EmptyWindowError

__all__ = [
    "SimCell",
    "SimReport",
    "SimConfig",
    "HistogramPanel",
    "DEFAULT_SEED",
    "DESIGN_POINTS",
    "derive_stream",
    "cell_from_quantiles",
    "run_cell",
    "run_table",
    "sim_table_csv",
    "parse_sim_config",
    "build_cells",
    "histogram_study",
    "worker_count",
]

DEFAULT_SEED = 20201012
_INDEX_BITS = 21
_INDEX_CAP = 1 << _INDEX_BITS

# The study's default design: symmetric truncation levels plus two
# asymmetric points, applied at exact quantiles of the true model.
DESIGN_POINTS = (
    (0.00, 0.00),
    (0.05, 0.05),
    (0.10, 0.10),
    (0.15, 0.15),
    (0.25, 0.25),
    (0.10, 0.70),
    (0.25, 0.00),
)
DEFAULT_N_LIST = (50, 100, 250, 500, 1000)


@dataclass(frozen=True)
class SimCell:
    """One simulation configuration: a (sample size, method, design) cell."""

    n: int
    method: str
    theta_true: float
    thresholds: ThresholdPair
    replications_per_block: int = 2000
    blocks: int = 10
    seed: int = DEFAULT_SEED
    cell_index: int = 0
    a: float | None = None
    b: float | None = None
    model: str = "exp"
    x0: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n", f"sample size must be >= 1, got {self.n}")
        if self.replications_per_block < 1:
            raise ConfigError("reps", "replications_per_block must be >= 1")
        if self.blocks < 1:
            raise ConfigError("blocks", "blocks must be >= 1")
        if self.method not in ("mle", "mtum", "mcm", "mtcm"):
            raise ConfigError("methods", f"unknown method {self.method!r}")
        if self.model not in ("exp", "pareto1"):
            raise ConfigError("model", f"unknown model {self.model!r}")
        if not self.theta_true > 0:
            raise ConfigError("theta", "theta must be positive")


@dataclass(frozen=True)
class SimReport:
    """Aggregated cell statistics; ratio and RE are withheld when any
    replication failed its existence condition (mirroring how unreliable
    cells are left blank in reported tables) unless conditional reporting
    was requested."""

    mean_ratio: float | None
    se_mean_ratio: float | None
    re: float | None
    se_re: float | None
    failure_count: int
    total_samples: int


def derive_stream(
    master_seed: int, cell_index: int, block_index: int, replication_index: int
) -> RandomSource:
    """Collision-free stream for one replication.

    The three indices are packed into disjoint bit ranges (each must be
    below 2^21), so distinct replications can never share a stream and the
    derivation is independent of execution order.
    """
    for name, idx in (
        ("cell_index", cell_index),
        ("block_index", block_index),
        ("replication_index", replication_index),
    ):
        if not 0 <= idx < _INDEX_CAP:
            raise ValueError(f"{name} must be in [0, {_INDEX_CAP}), got {idx}")
    stream = (cell_index << (2 * _INDEX_BITS)) | (block_index << _INDEX_BITS) | replication_index
    return RandomSource(seed=master_seed, stream=stream)


def cell_from_quantiles(
    a: float, b: float, theta: float, n: int, method: str, **kwargs
) -> SimCell:
    """Build a cell whose thresholds are the exact (a, 1-b) quantiles."""
    d = -theta * math.log1p(-a)
    u = math.inf if b == 0.0 else -theta * math.log(b)
    return SimCell(
        n=n, method=method, theta_true=theta, thresholds=ThresholdPair(d, u),
        a=a, b=b, **kwargs,
    )


def _estimate_once(cell: SimCell, x: np.ndarray) -> float | None:
    """Point estimate for one sample, or None when the method fails on it."""
    t = cell.thresholds
    try:
        if cell.method == "mle":
            return float(x.mean())
        if cell.method == "mtum":
            res = estimators.solve_mtum_exp(estimators.sample_mtum(x, t).mu_hat, t)
        elif cell.method == "mcm":
            res = estimators.solve_mcm_exp(estimators.sample_mcm(x, t).mu_hat, t)
        else:
            res = estimators.solve_mtcm_exp(estimators.sample_mtcm(x, t).mu_hat, t)
    except (EmptyWindowError, DegenerateError):
        return None
    return res.estimate if res.exists else None


def _run_block(cell: SimCell, block_index: int) -> tuple[int, int, float, float]:
    """(successes, failures, sum of theta_hat/theta, sum of squared errors)."""
    if cell.model == "pareto1":
        model = ParetoIModel(alpha=1.0 / cell.theta_true, x0=cell.x0)
    else:
        model = ExponentialModel(cell.theta_true)
    theta = cell.theta_true
    successes = failures = 0
    sum_ratio = 0.0
    sum_sq = 0.0
    for rep in range(cell.replications_per_block):
        rs = derive_stream(cell.seed, cell.cell_index, block_index, rep)
        draws = sample(model, cell.n, rs)
        if cell.model == "pareto1":
            draws = np.log(draws / cell.x0)
        theta_hat = _estimate_once(cell, draws)
        if theta_hat is None:
            failures += 1
            continue
        successes += 1
        sum_ratio += theta_hat / theta
        sum_sq += (theta_hat - theta) ** 2
    return successes, failures, sum_ratio, sum_sq


def worker_count(requested: int | None = None) -> int:
    """Worker pool size: explicit argument, then SEVERFIT_THREADS, then CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("SEVERFIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _block_results(cell: SimCell, workers: int) -> list[tuple[int, int, float, float]]:
    indices = list(range(cell.blocks))
    if workers <= 1 or cell.blocks == 1:
        return [_run_block(cell, i) for i in indices]
    with ProcessPoolExecutor(max_workers=min(workers, cell.blocks)) as pool:
        return list(pool.map(_run_block, [cell] * cell.blocks, indices))


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def run_cell(
    cell: SimCell, *, conditional: bool = False, workers: int | None = None
) -> SimReport:
    """Simulate one cell: per-block averages of theta_hat/theta and of the
    relative efficiency (theta^2/n over the block's empirical mean squared
    error), then the across-block mean and standard error of each.
    """
    results = _block_results(cell, worker_count(workers))
    theta = cell.theta_true
    total = cell.blocks * cell.replications_per_block
    failure_count = sum(r[1] for r in results)
    if failure_count > 0 and not conditional:
        return SimReport(
            mean_ratio=None, se_mean_ratio=None, re=None, se_re=None,
            failure_count=failure_count, total_samples=total,
        )
    ratios = []
    res = []
    for successes, _, sum_ratio, sum_sq in results:
        if successes == 0:
            return SimReport(
                mean_ratio=None, se_mean_ratio=None, re=None, se_re=None,
                failure_count=failure_count, total_samples=total,
            )
        ratios.append(sum_ratio / successes)
        mse = sum_sq / successes
        res.append((theta * theta / cell.n) / mse)
    mean_ratio, se_ratio = _mean_se(ratios)
    re, se_re = _mean_se(res)
    return SimReport(
        mean_ratio=mean_ratio, se_mean_ratio=se_ratio, re=re, se_re=se_re,
        failure_count=failure_count, total_samples=total,
    )


def run_table(
    cells: Sequence[SimCell], *, conditional: bool = False, workers: int | None = None
) -> list[tuple[SimCell, SimReport]]:
    """Run every cell; deterministic under a fixed master seed."""
    return [(cell, run_cell(cell, conditional=conditional, workers=workers)) for cell in cells]


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def sim_table_csv(results: Sequence[tuple[SimCell, SimReport]]) -> str:
    """Long-format CSV, one row per cell, plus an analytic large-n row
    (relative efficiency from the closed-form ARE) per method/design pair."""
    lines = ["method,a,b,d,u,n,mean_ratio,se_mean_ratio,re,se_re,failures,total"]
    for cell, report in results:
        lines.append(
            ",".join(
                [
                    cell.method,
                    _fmt(cell.a),
                    _fmt(cell.b),
                    _fmt(cell.thresholds.d),
                    _fmt(cell.thresholds.u),
                    str(cell.n),
                    _fmt(report.mean_ratio),
                    _fmt(report.se_mean_ratio),
                    _fmt(report.re),
                    _fmt(report.se_re),
                    str(report.failure_count),
                    str(report.total_samples),
                ]
            )
        )
    seen: list[tuple[str, float, float, ThresholdPair, float]] = []
    for cell, _ in results:
        key = (cell.method, cell.a, cell.b, cell.thresholds, cell.theta_true)
        if key not in seen and cell.method != "mle":
            seen.append(key)
    for method, a, b, t, theta in seen:
        are = asymptotics.are(method, theta, t)
        lines.append(
            f"{method},{_fmt(a)},{_fmt(b)},{_fmt(t.d)},{_fmt(t.u)},inf,"
            f"{_fmt(1.0)},,{_fmt(are)},,0,0"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SimConfig:
    """Parsed simulation configuration."""

    theta: float = 10.0
    methods: tuple[str, ...] = ("mtum", "mcm", "mtcm")
    design_points: tuple[tuple[float, float], ...] = DESIGN_POINTS
    n_list: tuple[int, ...] = DEFAULT_N_LIST
    blocks: int = 10
    reps: int = 2000
    seed: int = DEFAULT_SEED
    out: str | None = None


_PAIR_RE = re.compile(r"\(\s*([^\s,()]+)\s*,\s*([^\s,()]+)\s*\)")


def parse_sim_config(text: str) -> SimConfig:
    """Parse the line-oriented ``key = value`` simulation config format."""
    values: dict[str, object] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], "expected 'key = value'")
        key, _, rhs = line.partition("=")
        key = key.strip().lower()
        rhs = rhs.strip()
        try:
            if key == "theta":
                values["theta"] = float(rhs)
            elif key == "methods":
                values["methods"] = tuple(m.strip().lower() for m in rhs.split(",") if m.strip())
            elif key == "design_points":
                pairs = _PAIR_RE.findall(rhs)
                if not pairs:
                    raise ValueError("no (a,b) pairs found")
                values["design_points"] = tuple((float(a), float(b)) for a, b in pairs)
            elif key == "n_list":
                values["n_list"] = tuple(int(v.strip()) for v in rhs.split(",") if v.strip())
            elif key == "blocks":
                values["blocks"] = int(rhs)
            elif key == "reps":
                values["reps"] = int(rhs)
            elif key == "seed":
                values["seed"] = int(rhs)
            elif key == "out":
                values["out"] = rhs
            else:
                raise ConfigError(key, "unknown key")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    return SimConfig(**values)  # type: ignore[arg-type]


def build_cells(config: SimConfig, *, full_scale: bool = False) -> list[SimCell]:
    """Expand a config into cells, one per (design point, n, method)."""
    reps = 10000 if full_scale else config.reps
    cells = []
    index = 0
    for a, b in config.design_points:
        for n in config.n_list:
            for method in config.methods:
                cells.append(
                    cell_from_quantiles(
                        a, b, config.theta, n, method,
                        replications_per_block=reps,
                        blocks=config.blocks,
                        seed=config.seed,
                        cell_index=index,
                    )
                )
                index += 1
    return cells


@dataclass(frozen=True)
class HistogramPanel:
    """All estimates for one (method, n) panel plus summary shape statistics."""

    method: str
    n: int
    estimates: np.ndarray
    failures: int
    skewness: float
    bin_edges: np.ndarray
    bin_counts: np.ndarray


def histogram_study(
    n_list: Iterable[int],
    count: int,
    *,
    methods: Iterable[str] = ("mtum", "mcm", "mtcm"),
    theta: float = 10.0,
    thresholds: ThresholdPair = ThresholdPair(0.50, 23.00),
    seed: int = DEFAULT_SEED,
) -> list[HistogramPanel]:
    """Repeated estimation at small n for normality inspection.

    For each sample size, ``count`` samples are drawn once and every method
    is applied to the same samples; failed existence checks are dropped from
    that panel.  Bins use the Freedman-Diaconis rule.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    methods = tuple(methods)
    panels: list[HistogramPanel] = []
    model = ExponentialModel(theta)
    for n_index, n in enumerate(n_list):
        samples = [
            sample(model, n, derive_stream(seed, n_index, 0, rep)) for rep in range(count)
        ]
        for method in methods:
            cell = SimCell(
                n=n, method=method, theta_true=theta, thresholds=thresholds,
                replications_per_block=1, blocks=1, seed=seed,
            )
            estimates = []
            failures = 0
            for draws in samples:
                theta_hat = _estimate_once(cell, draws)
                if theta_hat is None:
                    failures += 1
                else:
                    estimates.append(theta_hat)
            est = np.asarray(estimates, dtype=float)
            skew = float(sps.skew(est, bias=False)) if est.size >= 3 else math.nan
            counts, edges = np.histogram(est, bins="fd") if est.size else (np.array([]), np.array([]))
            panels.append(
                HistogramPanel(
                    method=method, n=n, estimates=est, failures=failures,
                    skewness=skew, bin_edges=edges, bin_counts=counts,
                )
            )
    return panels
