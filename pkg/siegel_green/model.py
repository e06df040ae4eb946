"""
Operator specification and disorder models.

Provides:
- OperatorSpec: the constant channel matrix D with its eigendecomposition,
  including the strip Dirichlet Laplacian builder
- Band geometry: I_D, σ(Δ + D), breakpoints μ_k ± 2 and the interval
  decomposition with channel counts m(λ) and projections P_I
- DisorderModel / PotentialSample: compactly supported, mean-zero site
  potentials with a (1 + |n|)^(−alpha) envelope, seeded per site
"""

import builtins
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .common import make_rng
from .errors import InvalidParameter, SizeCap
from .matcore import MAX_DIM, RealSym, herm_eig, op_norm

logger = logging.getLogger(__name__)

RECONSTRUCT_TOL = 1e-12
BREAKPOINT_TOL = 1e-12
BAND_HALF_WIDTH = 2.0


# ---------------------------------------------------------------------------
# Operator specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """(Hφ)(n) = −φ(n−1) − φ(n+1) + Dφ(n) + q_n φ(n) on ℓ²(ℤ, ℂ^m)."""

    D: RealSym
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.D, RealSym):
            object.__setattr__(self, "D", RealSym(np.atleast_2d(np.asarray(self.D, dtype=float))))
        if self.D.n > MAX_DIM:
            raise SizeCap(f"channel count {self.D.n} exceeds {MAX_DIM}")
        w, v = herm_eig(self.D)
        v = np.asarray(v.real)
        err = float(np.max(np.abs((v * w) @ v.T - self.D.entries)))
        scale = max(1.0, op_norm(self.D))
        if err > RECONSTRUCT_TOL * scale * self.D.n:
            raise InvalidParameter(f"eigendecomposition of D reconstructs to {err:.3e} only")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "_eig", (w, v))

    @classmethod
    def from_matrix(cls, D, label: str = "") -> "OperatorSpec":
        return cls(RealSym(np.atleast_2d(np.asarray(D, dtype=float))), label=label)

    @property
    def m(self) -> int:
        return self.D.n

    @property
    def mu(self) -> np.ndarray:
        """Eigenvalues μ₁ ≤ … ≤ μ_m of D."""
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    @property
    def D_eig(self) -> tuple[np.ndarray, np.ndarray]:
        return self._eig


def _path_adjacency(L: int) -> np.ndarray:
    return np.eye(L, k=1) + np.eye(L, k=-1)


def strip_dirichlet(L: int, d: int) -> OperatorSpec:
    """
    D = −(adjacency of the cube {1..L}^d), the Dirichlet Laplacian on the
    cross-section without its diagonal part. Eigenvalues are
    −2 Σᵢ cos(π nᵢ/(L+1)), nᵢ ∈ {1..L}.

    Raises:
        InvalidParameter: if L < 1 or d < 1
        SizeCap: if L^d > 64
    """
    if L < 1 or d < 1:
        raise InvalidParameter(f"strip needs L >= 1 and d >= 1, got L={L}, d={d}")
    m = L**d
    if m > MAX_DIM:
        raise SizeCap(f"strip L={L}, d={d} has {m} channels, cap is {MAX_DIM}")
    A1 = _path_adjacency(L)
    eye = np.eye(L)
    adj = np.zeros((m, m))
    for axis in range(d):
        factors = [A1 if i == axis else eye for i in range(d)]
        term = factors[0]
        for f in factors[1:]:
            term = np.kron(term, f)
        adj += term
    return OperatorSpec(RealSym(-adj), label=f"strip(L={L},d={d})")


def strip_eigenvalues(L: int, d: int) -> np.ndarray:
    """Closed-form spectrum of strip_dirichlet(L, d), sorted."""
    one = -2.0 * np.cos(np.pi * np.arange(1, L + 1) / (L + 1))
    vals = [sum(c) for c in itertools.product(one, repeat=d)]
    return np.sort(np.asarray(vals, dtype=float))


# ---------------------------------------------------------------------------
# Band geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandInterval:
    lo: float
    hi: float
    count: int
    channels: tuple[int, ...]

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class BandReport:
    I_D: Optional[tuple[float, float]]
    sigma_free: tuple[tuple[float, float], ...]
    breakpoints: tuple[float, ...]
    intervals: tuple[BandInterval, ...] = field(default_factory=tuple)

    @property
    def intervals_with_count(self) -> list[tuple[tuple[float, float], int, tuple[int, ...]]]:
        return [((iv.lo, iv.hi), iv.count, iv.channels) for iv in self.intervals]

    def summary_line(self) -> str:
        """'I_D = [a, b]; sigma = [c, d] U [e, f]' with six decimals."""
        if self.I_D is None:
            head = "I_D = (empty)"
        else:
            head = f"I_D = [{self.I_D[0]:.6f}, {self.I_D[1]:.6f}]"
        sigma = " U ".join(f"[{lo:.6f}, {hi:.6f}]" for lo, hi in self.sigma_free)
        return f"{head}; sigma = {sigma}"


def _merge(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + BREAKPOINT_TOL:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def _snap(x: float) -> float:
    # keep integer-valued breakpoints exact, e.g. -2cos(π/3) ± 2
    r = round(x)
    return float(r) if abs(x - r) <= BREAKPOINT_TOL * max(1.0, abs(x)) else float(x)


def band_report(spec: OperatorSpec) -> BandReport:
    """
    I_D = ∩_k [μ_k − 2, μ_k + 2], σ(Δ + D) = ∪_k [μ_k − 2, μ_k + 2] and the
    decomposition of σ(Δ + D) into intervals on which
    m(λ) = #{k : |λ − μ_k| < 2} is constant. Zero-length intervals are dropped.
    """
    mu = np.asarray(spec.mu, dtype=float)
    lo_k = [_snap(x - BAND_HALF_WIDTH) for x in mu]
    hi_k = [_snap(x + BAND_HALF_WIDTH) for x in mu]

    # a single point (mu spread exactly 4) has empty interior and is reported as empty
    I_D = None
    if mu[-1] - mu[0] < 2 * BAND_HALF_WIDTH - BREAKPOINT_TOL:
        I_D = (max(lo_k), min(hi_k))

    points: list[float] = []
    for p in sorted(lo_k + hi_k):
        if not points or p - points[-1] > BREAKPOINT_TOL:
            points.append(p)

    intervals = []
    for lo, hi in zip(points[:-1], points[1:]):
        if hi - lo <= BREAKPOINT_TOL:
            continue
        mid = 0.5 * (lo + hi)
        chans = tuple(int(k) for k in np.nonzero(np.abs(mid - mu) < BAND_HALF_WIDTH)[0])
        if chans:
            intervals.append(BandInterval(lo, hi, len(chans), chans))

    return BandReport(
        I_D=I_D,
        sigma_free=tuple(_merge(list(zip(lo_k, hi_k)))),
        breakpoints=tuple(points),
        intervals=tuple(intervals),
    )


def mode_count(spec: OperatorSpec, x: float) -> int:
    """m(x): channels whose band (μ_k − 2, μ_k + 2) contains x."""
    return int(np.count_nonzero(np.abs(x - spec.mu) < BAND_HALF_WIDTH))


def channel_roots(spec: OperatorSpec, lam) -> np.ndarray:
    """
    Per-channel roots z_{λ,k} of z² + (λ − μ_k)z + 1 = 0 with Im z > 0
    (for real λ inside channel k's band they lie on the unit semicircle).
    """
    from .siegel import channel_fixed_points

    return channel_fixed_points(lam, spec.mu)


def interval_projection(spec: OperatorSpec, interval: BandInterval) -> np.ndarray:
    """Spectral projection P_I of D onto the channels in band on I."""
    V = spec.eigenvectors[:, list(interval.channels)]
    return V @ V.T


def restrict_spec(spec: OperatorSpec, interval: BandInterval) -> OperatorSpec:
    """D restricted to Ran P_I, written in D's eigenbasis; I ⊆ I_{D_I}."""
    mu = spec.mu[list(interval.channels)]
    return OperatorSpec(RealSym.diag(mu), label=f"{spec.label}|[{interval.lo:g},{interval.hi:g}]")


# ---------------------------------------------------------------------------
# Disorder
# ---------------------------------------------------------------------------


class DisorderKind(str, Enum):
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"
    TRUNCATED_GAUSSIAN = "truncated_gaussian"
    DIAGONAL_IID = "diagonal_iid"


# standard normal conditioned on [-1, 1]
_TRUNCNORM = stats.truncnorm(-1.0, 1.0)


@dataclass(frozen=True, eq=False)
class DisorderModel:
    """
    q_n = c_n · ξ_n · M for the scalar-amplitude kinds, with ξ_n symmetric on
    [−1, 1] and ‖M‖ = 1; diagonal_iid draws c_n · diag(ξ_{n,1}, …, ξ_{n,m}).

    c_n = c(1 + |n|)^(−alpha) unless ``amplitude_fn`` supplies a per-site
    amplitude. Every draw satisfies ‖q_n‖ ≤ c_n ≤ support_bound.
    """

    kind: DisorderKind
    m: int
    c: float = 0.0
    alpha: float = 0.0
    direction: Optional[RealSym] = None
    support_bound: Optional[float] = None
    amplitude_fn: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DisorderKind(self.kind))
        if self.m < 1:
            raise InvalidParameter(f"m must be >= 1, got {self.m}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise InvalidParameter(f"amplitude c must be finite and >= 0, got {self.c}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise InvalidParameter(f"envelope exponent alpha must be >= 0, got {self.alpha}")
        M = self.direction
        if M is None:
            M = RealSym.identity(self.m)
        elif not isinstance(M, RealSym):
            M = RealSym(np.atleast_2d(np.asarray(M, dtype=float)))
        if M.n != self.m:
            raise InvalidParameter(f"direction is {M.n}x{M.n}, expected {self.m}x{self.m}")
        norm = op_norm(M)
        if norm == 0:
            raise InvalidParameter("direction matrix must be nonzero")
        object.__setattr__(self, "direction", M.scaled(1.0 / norm))
        K = self.c if self.support_bound is None else float(self.support_bound)
        if self.amplitude_fn is None and K < self.c:
            raise InvalidParameter(f"support_bound {K} is below the amplitude c={self.c}")
        object.__setattr__(self, "support_bound", K)

    def amplitude(self, n: int) -> float:
        if self.amplitude_fn is not None:
            a = float(self.amplitude_fn(n))
            if not (0 <= a <= self.support_bound):
                raise InvalidParameter(f"site {n} amplitude {a} outside [0, {self.support_bound}]")
            return a
        return self.c * (1.0 + abs(n)) ** (-self.alpha)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """One site potential q_n (m×m, symmetric)."""
        a = self.amplitude(n)
        if a == 0.0:
            return np.zeros((self.m, self.m))
        if self.kind is DisorderKind.DIAGONAL_IID:
            return np.diag(a * rng.uniform(-1.0, 1.0, size=self.m))
        if self.kind is DisorderKind.RADEMACHER:
            xi = 1.0 if rng.integers(0, 2) else -1.0
        elif self.kind is DisorderKind.UNIFORM:
            xi = rng.uniform(-1.0, 1.0)
        else:
            xi = float(_TRUNCNORM.rvs(random_state=rng))
        return (a * xi) * self.direction.entries

    def second_moment(self, n: int) -> float:
        """E‖q_n‖² in operator norm."""
        a2 = self.amplitude(n) ** 2
        if self.kind is DisorderKind.RADEMACHER:
            return a2
        if self.kind is DisorderKind.UNIFORM:
            return a2 / 3.0
        if self.kind is DisorderKind.TRUNCATED_GAUSSIAN:
            return a2 * float(_TRUNCNORM.moment(2))
        # max_i |ξ_i| has CDF t^m on [0, 1]
        return a2 * self.m / (self.m + 2.0)

    @property
    def is_zero(self) -> bool:
        return self.amplitude_fn is None and self.c == 0.0


@dataclass(frozen=True, eq=False)
class PotentialSample:
    """q_n for n_min ≤ n ≤ n_max, zero outside. ``values`` has shape (W, m, m)."""

    n_min: int
    n_max: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.n_max < self.n_min - 1:
            raise InvalidParameter(f"empty range [{self.n_min}, {self.n_max}]")
        if v.ndim != 3 or v.shape[0] != self.n_max - self.n_min + 1 or v.shape[1] != v.shape[2]:
            raise InvalidParameter(f"values shape {v.shape} does not match range")
        if not np.allclose(v, np.swapaxes(v, 1, 2), rtol=0, atol=1e-12):
            raise InvalidParameter("site potentials must be symmetric")
        v = np.array(v, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, m: int, n_min: int = 0, n_max: int = -1) -> "PotentialSample":
        return cls(n_min, n_max, np.zeros((max(n_max - n_min + 1, 0), m, m)))

    @classmethod
    def from_sites(cls, sites: dict[int, np.ndarray], m: int) -> "PotentialSample":
        if not sites:
            return cls.zero(m)
        lo, hi = min(sites), max(sites)
        vals = np.zeros((hi - lo + 1, m, m))
        for n, q in sites.items():
            vals[n - lo] = np.asarray(q, dtype=float)
        return cls(lo, hi, vals)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def range(self) -> tuple[int, int]:
        return self.n_min, self.n_max

    @cached_property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def at(self, n: int) -> np.ndarray:
        if self.n_min <= n <= self.n_max:
            return self.values[n - self.n_min]
        return np.zeros((self.m, self.m))

    def block(self, lo: int, hi: int) -> np.ndarray:
        """q_lo, …, q_hi stacked, zero-padded outside the sample range."""
        out = np.zeros((max(hi - lo + 1, 0), self.m, self.m))
        a, b = max(lo, self.n_min), min(hi, self.n_max)
        if a <= b:
            out[a - lo:b - lo + 1] = self.values[a - self.n_min:b - self.n_min + 1]
        return out

    def reflected(self) -> "PotentialSample":
        """n ↦ q_{−n}."""
        return PotentialSample(-self.n_max, -self.n_min, self.values[::-1])

    def norms(self) -> np.ndarray:
        if self.values.shape[0] == 0:
            return np.zeros(0)
        return np.linalg.norm(self.values, 2, axis=(1, 2))


def sample_potential(model: DisorderModel, master_seed: int, range: tuple[int, int]) -> PotentialSample:
    """
    Draw q_n for n in range. Site n uses its own generator seeded from
    (master_seed, n), so enlarging the range never changes existing sites.
    """
    n_min, n_max = int(range[0]), int(range[1])
    if n_min > n_max:
        raise InvalidParameter(f"n_min {n_min} > n_max {n_max}")
    vals = np.zeros((n_max - n_min + 1, model.m, model.m))
    if not model.is_zero:
        for i, n in enumerate(builtins.range(n_min, n_max + 1)):
            vals[i] = model.draw(make_rng(master_seed, n), n)
    return PotentialSample(n_min, n_max, vals)


def second_moment_sum(model: DisorderModel, range: tuple[int, int]) -> float:
    """Σ_n E‖q_n‖² over the range, in closed form per kind."""
    n_min, n_max = int(range[0]), int(range[1])
    return float(sum(model.second_moment(n) for n in builtins.range(n_min, n_max + 1)))
