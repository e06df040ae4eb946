"""
Recursion engine for half-line and full-line diagonal Green's functions.

G_{n0}^+ = lim_N Φ_{q_{n0}} ∘ Φ_{q_{n0+1}} ∘ … ∘ Φ_{q_{n0+N}}(Λ) for any
seed Λ ∈ SH_m. Two seed runs are carried side by side and the depth grows
until their hyperbolic distance drops below ``tol``. Compositions are applied
innermost-first. Beyond the sample window q ≡ 0 and the free block Φ₀^k is
applied in closed form per eigenchannel of D.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidParameter, InvariantBreach, NoConvergence, NumericalError
from .matcore import ComplexSym
from .model import OperatorSpec, PotentialSample
from .siegel import (
    SiegelPoint,
    SpectralParameter,
    channel_fixed_points,
    dist,
    free_fixed_point,
    phi_array,
)

logger = logging.getLogger(__name__)

DIAGONAL_TOL = 1e-12


class GreenKind(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class EngineConfig:
    """
    Convergence control. ``seed_points`` = None means (Z_λ, iI), built per λ.
    """

    tol: float = 1e-10
    max_depth: int = 10**6
    depth_step: int = 32
    seed_points: Optional[tuple[SiegelPoint, SiegelPoint]] = None

    def __post_init__(self):
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise InvalidParameter(f"tol must be > 0, got {self.tol}")
        if self.max_depth < 0:
            raise InvalidParameter(f"max_depth must be >= 0, got {self.max_depth}")
        if self.depth_step < 1:
            raise InvalidParameter(f"depth_step must be >= 1, got {self.depth_step}")
        if self.seed_points is not None and len(self.seed_points) != 2:
            raise InvalidParameter("seed_points must hold exactly two Siegel points")

    def seeds(self, lam: SpectralParameter, spec: OperatorSpec) -> np.ndarray:
        if self.seed_points is None:
            pair = (free_fixed_point(lam, spec.D).value, 1j * np.eye(spec.m))
        else:
            pair = tuple(p.value for p in self.seed_points)
            if any(p.shape != (spec.m, spec.m) for p in pair):
                raise InvalidParameter(f"seed points must be {spec.m}x{spec.m}")
        return np.stack(pair).astype(complex)


@dataclass(frozen=True, eq=False)
class GreenResult:
    value: SiegelPoint
    site: int
    kind: GreenKind
    depth_used: int
    residual: float
    gamma_hat: float
    residual_history: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    @property
    def error_estimate(self) -> float:
        """γ̂/(1 − γ̂)·residual; reported, not a certificate."""
        if self.residual == 0.0:
            return 0.0
        if self.gamma_hat >= 1.0:
            return math.inf
        return self.gamma_hat / (1.0 - self.gamma_hat) * self.residual


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _free_power(spec: OperatorSpec, lam: SpectralParameter, seeds: np.ndarray, k: int) -> np.ndarray:
    """
    Φ₀^k applied to each seed.

    Per channel Φ₀ is w ↦ −1/(w + λ − μ) with fixed points z₁ (Im > 0) and
    z₂ = 1/z₁, and the cross-ratio (w − z₁)/(w − z₂) picks up z₁² per step.
    Used only for seeds diagonal in D's eigenbasis.
    """
    V = spec.eigenvectors
    z1 = channel_fixed_points(lam, spec.mu)
    z2 = 1.0 / z1
    mult = np.exp(2.0 * k * np.log(z1))
    out = np.empty_like(seeds)
    for i, s in enumerate(seeds):
        w = np.diag(V.T @ s @ V)
        r = mult * (w - z1) / (w - z2)
        wk = (z1 - r * z2) / (1.0 - r)
        out[i] = (V * wk) @ V.T
    return out


def _diagonal_in_eigenbasis(spec: OperatorSpec, seeds: np.ndarray) -> bool:
    """
    True if every seed is diagonal in the eigenbasis of D. Commuting with D is
    not enough once D has a repeated eigenvalue.
    """
    V = spec.eigenvectors
    for s in seeds:
        w = V.T @ s @ V
        off = w - np.diag(np.diag(w))
        if np.max(np.abs(off), initial=0.0) > DIAGONAL_TOL * max(1.0, float(np.max(np.abs(w)))):
            return False
    return True


def _step(z: np.ndarray, shift: np.ndarray) -> np.ndarray:
    out = phi_array(z, shift)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def compose_phi(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                n0: int, depth: int, seeds: np.ndarray) -> np.ndarray:
    """
    Φ_{q_{n0}} ∘ … ∘ Φ_{q_{n0+depth}} applied to every seed in ``seeds``
    (shape (s, m, m)), innermost map first.
    """
    if depth < 0:
        raise InvalidParameter(f"depth must be >= 0, got {depth}")
    lam.require_positive()
    m = spec.m
    base = lam.lam * np.eye(m) - spec.D.entries
    last = n0 + depth
    tail_start = max(n0, q.n_max + 1)
    z = np.array(seeds, dtype=complex, copy=True)

    if tail_start <= last:
        k = last - tail_start + 1
        if _diagonal_in_eigenbasis(spec, z):
            z = _free_power(spec, lam, z, k)
        else:
            for _ in range(k):
                z = _step(z, base)
        explicit_end = tail_start - 1
    else:
        explicit_end = last

    if explicit_end >= n0:
        block = q.block(n0, explicit_end)
        for qs in block[::-1]:
            z = _step(z, base - qs)
    if not np.all(np.isfinite(z)):
        raise InvariantBreach("non-finite value in Φ composition")
    return z


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


def _as_point(z: np.ndarray) -> SiegelPoint:
    return SiegelPoint(ComplexSym(z))


def _gamma_hat(history: list[tuple[int, float]]) -> float:
    """Per-step contraction rate from the last two residuals."""
    if len(history) < 2:
        return math.nan
    (n1, r1), (n2, r2) = history[-2], history[-1]
    if r2 == 0.0:
        return 0.0
    if r1 <= 0.0 or n2 <= n1 or r2 >= r1:
        return 1.0
    return (r2 / r1) ** (1.0 / (n2 - n1))


def _next_depth(depth: int, residual: float, gamma: float, cfg: EngineConfig) -> int:
    floor = depth + cfg.depth_step
    cap = 2 * depth + cfg.depth_step
    target = floor
    if gamma >= 1.0:
        # stalled residual: keep the number of evaluations logarithmic
        target = cap
    elif 0.0 < gamma < 1.0:
        need = depth + math.ceil(math.log(cfg.tol / residual) / math.log(gamma))
        target = min(max(need, floor), cap)
    return min(target, cfg.max_depth)


def forward_green(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                  n0: int = 0, cfg: Optional[EngineConfig] = None) -> GreenResult:
    """
    G_{n0}^+ from the sites n0, n0+1, … .

    Raises:
        InvalidParameter: if Im λ <= 0
        NoConvergence: if max_depth is reached with residual > tol
    """
    cfg = cfg or EngineConfig()
    lam = lam if isinstance(lam, SpectralParameter) else SpectralParameter.from_complex(lam)
    lam.require_positive()
    if q.m != spec.m and q.values.shape[0] > 0:
        raise InvalidParameter(f"potential is {q.m}x{q.m}, operator has m={spec.m}")
    seeds = cfg.seeds(lam, spec)

    depth = min(cfg.depth_step, cfg.max_depth)
    history: list[tuple[int, float]] = []
    while True:
        runs = compose_phi(spec, q, lam, n0, depth, seeds)
        first = _as_point(runs[0])
        residual = dist(first, _as_point(runs[1]))
        history.append((depth, residual))
        gamma = _gamma_hat(history)
        logger.debug("forward n0=%d depth=%d residual=%.3e gamma=%.6f", n0, depth, residual, gamma)

        if residual <= cfg.tol:
            return GreenResult(
                value=first,
                site=n0,
                kind=GreenKind.FORWARD,
                depth_used=depth,
                residual=residual,
                gamma_hat=0.0 if math.isnan(gamma) else gamma,
                residual_history=tuple(history),
            )
        if depth >= cfg.max_depth:
            raise NoConvergence(
                f"no convergence at λ={lam.lam} site {n0}: residual {residual:.3e} > tol {cfg.tol:.1e}",
                depth=depth,
                residual=residual,
            )
        depth = _next_depth(depth, residual, gamma, cfg)


def backward_green(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                   n0: int = 0, cfg: Optional[EngineConfig] = None) -> GreenResult:
    """G_{n0}^- from the sites n0, n0−1, …; the forward run on the reflected potential."""
    res = forward_green(spec, q.reflected(), lam, -n0, cfg)
    return GreenResult(
        value=res.value,
        site=n0,
        kind=GreenKind.BACKWARD,
        depth_used=res.depth_used,
        residual=res.residual,
        gamma_hat=res.gamma_hat,
        residual_history=res.residual_history,
    )


def diagonal_green(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                   n: int = 0, cfg: Optional[EngineConfig] = None) -> GreenResult:
    """G_n = −(G_{n+1}^+ + G_{n−1}^- + λ − D − q_n)⁻¹."""
    lam = lam if isinstance(lam, SpectralParameter) else SpectralParameter.from_complex(lam)
    fwd = forward_green(spec, q, lam, n + 1, cfg)
    bwd = backward_green(spec, q, lam, n - 1, cfg)
    m = spec.m
    shift = lam.lam * np.eye(m) - spec.D.entries - q.at(n)
    try:
        value = _as_point(_step(fwd.value.value + bwd.value.value, shift))
    except NumericalError as exc:
        raise InvariantBreach(f"diagonal Green's function left SH_m: {exc}") from exc
    return GreenResult(
        value=value,
        site=n,
        kind=GreenKind.DIAGONAL,
        depth_used=max(fwd.depth_used, bwd.depth_used),
        residual=max(fwd.residual, bwd.residual),
        gamma_hat=max(fwd.gamma_hat, bwd.gamma_hat),
        residual_history=fwd.residual_history,
    )


# ---------------------------------------------------------------------------
# Density of states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DosRow:
    x: float
    eps: float
    dos: float


def local_dos(spec: OperatorSpec, q: PotentialSample, x: float, eps: float,
              n: int = 0, cfg: Optional[EngineConfig] = None) -> float:
    """(1/(mπ))·tr Im G_n(x + iε)."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be > 0, got {eps}")
    G = diagonal_green(spec, q, SpectralParameter(x, eps), n, cfg)
    val = float(np.trace(G.value.value.imag)) / (spec.m * math.pi)
    return max(val, 0.0)


def dos_curve(spec: OperatorSpec, q: PotentialSample, x_grid, eps_list,
              n: int = 0, cfg: Optional[EngineConfig] = None) -> list[DosRow]:
    """One row per (x, eps), x outer and eps inner, in the given order."""
    rows = []
    for x in x_grid:
        for eps in eps_list:
            rows.append(DosRow(float(x), float(eps), local_dos(spec, q, float(x), float(eps), n, cfg)))
    logger.debug("dos_curve: %d rows", len(rows))
    return rows
