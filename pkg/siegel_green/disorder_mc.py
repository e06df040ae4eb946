"""
Seeded Monte Carlo over disorder realizations.

Estimates E[cd_λ²(G_{n0}^+)] (or E[cd²(G_{n0}, W_λ)] for the diagonal
target) on a grid of λ = x + iε with x in an interval J inside I_D, and
compares against the product bound ∏(1 + C₀E‖q_i‖²) ≤ exp(C₀ΣE‖q_i‖²).

Trial t uses the seed derived from (master_seed, t) and site n inside a
trial uses (trial seed, n), so results do not depend on scheduling.
"""

import logging
import math
import multiprocessing as mp
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .common import derive_seed, make_rng
from .errors import InvalidParameter, NoConvergence, OutsideBand
from .green import EngineConfig, diagonal_green, forward_green
from .matcore import RealSym
from .model import DisorderModel, OperatorSpec, PotentialSample, band_report, sample_potential, second_moment_sum
from .siegel import (
    SiegelPoint,
    SpectralParameter,
    cd,
    explicit_c0,
    free_fixed_point,
    lemma25_report,
    phi,
    random_siegel_point,
    w_lambda,
)

logger = logging.getLogger(__name__)

J_MARGIN = 1e-6
FAILURE_RATE_LIMIT = 0.01
MAX_EXP_ARG = 709.0


class Target(str, Enum):
    FORWARD = "forward"
    DIAGONAL = "diagonal"


@dataclass(frozen=True, eq=False)
class Experiment:
    spec: OperatorSpec
    model: DisorderModel
    J: tuple[float, float]
    x_grid: tuple[float, ...]
    eps_grid: tuple[float, ...]
    trials: int
    master_seed: int
    window: tuple[int, int]
    cfg: EngineConfig = field(default_factory=EngineConfig)
    target: Target = Target.FORWARD
    site: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x_grid", tuple(float(x) for x in self.x_grid))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "J", (float(self.J[0]), float(self.J[1])))
        if self.model.m != self.spec.m:
            raise InvalidParameter(f"disorder model has m={self.model.m}, operator has m={self.spec.m}")
        I_D = band_report(self.spec).I_D
        a, b = self.J
        if I_D is None or not (I_D[0] + J_MARGIN <= a <= b <= I_D[1] - J_MARGIN):
            raise OutsideBand(f"J={self.J} is not inside the interior of I_D={I_D} with margin {J_MARGIN}")
        if any(not a <= x <= b for x in self.x_grid):
            raise InvalidParameter(f"x_grid leaves J={self.J}")
        if any(not 0 < e <= 1 for e in self.eps_grid):
            raise InvalidParameter("eps_grid must lie in (0, 1]")
        if self.trials < 0:
            raise InvalidParameter(f"trials must be >= 0, got {self.trials}")
        if self.window[0] > self.window[1]:
            raise InvalidParameter(f"empty window {self.window}")
        try:
            object.__setattr__(self, "target", Target(self.target))
        except ValueError as exc:
            raise InvalidParameter(f"unknown target {self.target!r}") from exc

    def trial_seed(self, t: int) -> int:
        return derive_seed(self.master_seed, "trial", t)

    def potential(self, t: int) -> PotentialSample:
        return sample_potential(self.model, self.trial_seed(t), self.window)


@dataclass(frozen=True)
class MCPoint:
    x: float
    eps: float
    mean: float
    var: float
    max: float
    trials: int
    failures: int

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.trials) if self.trials > 0 else math.nan


@dataclass(frozen=True)
class MCReport:
    points: tuple[MCPoint, ...]
    trials_requested: int
    failures: int
    failed_trials: tuple[int, ...]
    product_bound: float
    exp_bound: float
    c0: float
    sum_second_moments: float
    x_grid: tuple[float, ...]
    eps_grid: tuple[float, ...]
    flagged: bool = False

    @property
    def trials_used(self) -> int:
        return min((p.trials for p in self.points), default=0)

    def point(self, x: float, eps: float) -> MCPoint:
        for p in self.points:
            if p.x == x and p.eps == eps:
                return p
        raise KeyError((x, eps))

    def grid_max(self, eps: float) -> float:
        """max over x of the mean at fixed eps."""
        return max(p.mean for p in self.points if p.eps == eps)

    def csv_rows(self) -> list[tuple]:
        return [(p.x, p.eps, p.mean, p.var, p.max, p.trials, p.failures) for p in self.points]


CSV_HEADER = ("x", "eps", "mean", "var", "max", "trials", "failures")


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def _observable(exp: Experiment, q: PotentialSample, lam: SpectralParameter) -> float:
    if exp.target is Target.DIAGONAL:
        G = diagonal_green(exp.spec, q, lam, exp.site, exp.cfg)
        return cd(G.value, w_lambda(lam, exp.spec.D)) ** 2
    G = forward_green(exp.spec, q, lam, exp.site, exp.cfg)
    return cd(free_fixed_point(lam, exp.spec.D), G.value) ** 2


def run_trial(exp: Experiment, t: int) -> np.ndarray:
    """cd² values over the (x, eps) grid for trial t; NaN where the engine did not converge."""
    q = exp.potential(t)
    out = np.full((len(exp.x_grid), len(exp.eps_grid)), np.nan)
    for i, x in enumerate(exp.x_grid):
        for j, eps in enumerate(exp.eps_grid):
            try:
                out[i, j] = _observable(exp, q, SpectralParameter(x, eps))
            except NoConvergence as exc:
                exc.trial = t
                logger.warning("Trial %d failed at x=%g eps=%g: %s", t, x, eps, exc)
    return out


def _trial_worker(payload: tuple[Experiment, int]) -> np.ndarray:
    exp, t = payload
    return run_trial(exp, t)


def _collect(exp: Experiment, jobs: int) -> np.ndarray:
    shape = (exp.trials, len(exp.x_grid), len(exp.eps_grid))
    if exp.trials == 0:
        return np.zeros(shape)
    payloads = [(exp, t) for t in range(exp.trials)]
    if jobs <= 1 or exp.trials == 1:
        parts = [_trial_worker(p) for p in payloads]
    else:
        ctx = mp.get_context()
        with ctx.Pool(processes=min(jobs, exp.trials)) as pool:
            # map keeps trial order, so reductions below see the same array for any jobs
            parts = pool.map(_trial_worker, payloads, chunksize=max(1, exp.trials // (4 * jobs)))
    return np.stack(parts)


def _reduce(values: np.ndarray) -> tuple[float, float, float, int, int]:
    ok = values[np.isfinite(values)]
    failures = int(values.size - ok.size)
    if ok.size == 0:
        return math.nan, math.nan, math.nan, 0, failures
    mean = float(np.sum(ok) / ok.size)
    var = float(np.sum((ok - mean) ** 2) / (ok.size - 1)) if ok.size > 1 else 0.0
    return mean, var, float(np.max(ok)), int(ok.size), failures


def grid_c0(exp: Experiment) -> float:
    """Largest explicit C₀ over the λ-grid, for support bound K."""
    K = exp.model.support_bound
    if not exp.x_grid or not exp.eps_grid:
        return 0.0
    return max(explicit_c0(SpectralParameter(x, e), exp.spec.D, K)
               for x in exp.x_grid for e in exp.eps_grid)


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < MAX_EXP_ARG else math.inf


def product_bound(exp: Experiment, C0: float) -> tuple[float, float]:
    """
    (∏_i (1 + C₀E‖q_i‖²), exp(C₀ Σ_i E‖q_i‖²)) over the sites of the window.
    The first never exceeds the second.
    """
    if not C0 > 0:
        raise InvalidParameter(f"C0 must be > 0, got {C0}")
    n_min, n_max = exp.window
    moments = np.array([exp.model.second_moment(n) for n in range(n_min, n_max + 1)])
    # summed in log space; both are reported as inf past float range
    log_prod = float(np.sum(np.log1p(C0 * moments)))
    s = C0 * float(np.sum(moments))
    return _exp_or_inf(log_prod), _exp_or_inf(s)


def run(exp: Experiment, jobs: int = 1, C0: Optional[float] = None) -> MCReport:
    """
    Estimate mean, variance and max of the cd² observable per grid point.

    Trials that hit NoConvergence are excluded from that grid point and
    counted; the report is flagged when more than 1% of evaluations fail.
    """
    logger.info(
        "MC start: %d trials, %d x %d grid, window %s, jobs=%d",
        exp.trials, len(exp.x_grid), len(exp.eps_grid), exp.window, jobs,
    )
    if exp.trials == 0:
        logger.warning("MC run with trials=0: empty results")
    values = _collect(exp, jobs)

    points = []
    for i, x in enumerate(exp.x_grid if exp.trials else ()):
        for j, eps in enumerate(exp.eps_grid):
            mean, var, vmax, used, failed = _reduce(values[:, i, j])
            points.append(MCPoint(x, eps, mean, var, vmax, used, failed))

    failed_mask = ~np.isfinite(values)
    failures = int(np.count_nonzero(failed_mask))
    failed_trials = tuple(int(t) for t in np.nonzero(failed_mask.any(axis=(1, 2)))[0])
    evaluations = values.size
    flagged = evaluations > 0 and failures > FAILURE_RATE_LIMIT * evaluations
    if flagged:
        logger.warning("MC failure rate %d/%d exceeds 1%%: run is invalid", failures, evaluations)

    c0 = C0 if C0 is not None else grid_c0(exp)
    if c0 > 0:
        prod, expo = product_bound(exp, c0)
    else:
        prod, expo = 1.0, 1.0
    report = MCReport(
        points=tuple(points),
        trials_requested=exp.trials,
        failures=failures,
        failed_trials=failed_trials,
        product_bound=prod,
        exp_bound=expo,
        c0=c0,
        sum_second_moments=second_moment_sum(exp.model, exp.window),
        x_grid=exp.x_grid,
        eps_grid=exp.eps_grid,
        flagged=flagged,
    )
    logger.info("MC finished: %d points, %d failures", len(points), failures)
    return report


# ---------------------------------------------------------------------------
# Zero-mean check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroMeanResult:
    mean: float
    sd: float
    trials: int

    @property
    def bound(self) -> float:
        return 4.0 * self.sd / math.sqrt(self.trials) if self.trials > 0 else 0.0

    @property
    def ok(self) -> bool:
        return abs(self.mean) <= self.bound


def zero_mean_samples(model: DisorderModel, trials: int, seed: int,
                      spec: Optional[OperatorSpec] = None,
                      lam: Optional[SpectralParameter] = None,
                      Z: Optional[SiegelPoint] = None) -> np.ndarray:
    """
    A(Z, q₀) for independent draws of q₀ at a fixed Z. Defaults: D = 0,
    λ = 0.5i and Z drawn from the seed.
    """
    spec = spec or OperatorSpec(RealSym.zeros(model.m))
    lam = lam or SpectralParameter(0.0, 0.5)
    Z = Z or random_siegel_point(make_rng(seed, "zero-mean-point"), model.m)
    out = np.zeros(trials)
    for t in range(trials):
        q = model.draw(make_rng(seed, "zero-mean", t), 0)
        if not np.any(q):
            continue
        out[t] = lemma25_report(Z, RealSym(q), lam, spec.D).A
    return out


def zero_mean_test(model: DisorderModel, trials: int, seed: int, **kwargs) -> ZeroMeanResult:
    samples = zero_mean_samples(model, trials, seed, **kwargs)
    if trials == 0:
        return ZeroMeanResult(0.0, 0.0, 0)
    sd = float(np.std(samples, ddof=1)) if trials > 1 else 0.0
    return ZeroMeanResult(float(np.mean(samples)), sd, trials)


def zero_mean_check(model: DisorderModel, trials: int, seed: int, **kwargs) -> float:
    """|empirical mean of A(Z, q₀)|; O(sd/√trials) when q₀ has mean zero."""
    return abs(zero_mean_test(model, trials, seed, **kwargs).mean)


# ---------------------------------------------------------------------------
# Pathwise one-step bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathwiseReport:
    c0_measured: float
    steps: int
    violations: int
    worst_margin: float


def pathwise_lemma25(exp: Experiment, trials: Optional[int] = None) -> PathwiseReport:
    """
    Walk Z ← Φ_{q_s}(Z) from Z_λ at the right end of the window down to the
    experiment site, for each trial and grid point. Returns the smallest C₀
    making ratio ≤ 1 + A + C₀‖q_s‖² hold at every step, and counts steps where
    the exact bound 1 + A + C fails.
    """
    trials = exp.trials if trials is None else trials
    c0 = 0.0
    steps = violations = 0
    worst = math.inf
    D = exp.spec.D
    for t in range(trials):
        q = exp.potential(t)
        for x in exp.x_grid:
            for eps in exp.eps_grid:
                lam = SpectralParameter(x, eps)
                Z = free_fixed_point(lam, D)
                for s in range(exp.window[1], exp.site - 1, -1):
                    delta = RealSym(q.at(s))
                    rep = lemma25_report(Z, delta, lam, D)
                    steps += 1
                    margin = rep.bound_rhs - rep.lhs_ratio
                    worst = min(worst, margin)
                    if not rep.holds:
                        violations += 1
                    c0 = max(c0, rep.c0_measured)
                    Z = phi(Z, delta, lam, D)
    logger.info("Pathwise one-step bound: %d steps, %d violations, C0=%.4g", steps, violations, c0)
    return PathwiseReport(c0, steps, violations, worst if steps else 0.0)

