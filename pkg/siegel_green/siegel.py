"""
The Siegel half space SH_m = {Z = X + iY : X, Y real symmetric, Y > 0}.

Provides:
- SiegelPoint and SpectralParameter value types
- cd / dist and the two isometries Z ↦ −Z⁻¹, Z ↦ Z + S
- Φ_δ(Z) = −(Z + λ − D − δ)⁻¹, the free fixed point Z_λ and W_λ
- the one-step diagnostics (a, b, A, C) behind the cd_λ² growth bound,
  and the auxiliary inequalities used by the verify suites
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidParameter,
    InvariantBreach,
    NotPositiveDefinite,
    OutsideBand,
    Singular,
)
from .matcore import ComplexSym, HermPD, RealSym, as_array, cs_inverse, frob_norm, herm_eig, op_norm

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-11


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SiegelPoint:
    """A point of SH_m. Construction fails unless Im Z is positive definite."""

    Z: ComplexSym

    def __post_init__(self):
        if not isinstance(self.Z, ComplexSym):
            object.__setattr__(self, "Z", ComplexSym(as_array(self.Z)))
        # HermPD raises NotPositiveDefinite if Y is not PD
        object.__setattr__(self, "_Y", HermPD(self.Z.value.imag))

    @classmethod
    def from_array(cls, z) -> "SiegelPoint":
        return cls(ComplexSym(np.asarray(z, dtype=complex)))

    @classmethod
    def identity(cls, m: int, scale: float = 1.0) -> "SiegelPoint":
        """i·scale·I."""
        return cls(ComplexSym(1j * scale * np.eye(m)))

    @property
    def value(self) -> np.ndarray:
        return self.Z.value

    @property
    def m(self) -> int:
        return self.Z.n

    @property
    def X(self) -> np.ndarray:
        return self.Z.value.real

    @property
    def Y(self) -> HermPD:
        return self._Y

    @cached_property
    def Y_inv(self) -> np.ndarray:
        return self._Y.inverse.real

    @cached_property
    def Y_sqrt(self) -> np.ndarray:
        return self._Y.sqrt.real

    @cached_property
    def Y_inv_sqrt(self) -> np.ndarray:
        return self._Y.inv_sqrt.real


@dataclass(frozen=True)
class SpectralParameter:
    """λ = x + i·eps. eps > 0 for every recursion; eps = 0 only for band queries."""

    x: float
    eps: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.eps)):
            raise InvalidParameter(f"spectral parameter must be finite, got {self.x}+{self.eps}i")
        if self.eps < 0:
            raise InvalidParameter(f"Im λ must be >= 0, got {self.eps}")

    @classmethod
    def from_complex(cls, lam: complex) -> "SpectralParameter":
        lam = complex(lam)
        return cls(lam.real, lam.imag)

    @property
    def lam(self) -> complex:
        return complex(self.x, self.eps)

    def require_positive(self) -> None:
        if self.eps <= 0:
            raise InvalidParameter(f"Im λ must be > 0 for the recursion, got {self.eps}")


@dataclass(frozen=True)
class Lemma25Report:
    """One-step quantities bounding (cd_λ²(Φ_δ(Z)) + 1)/(cd_λ²(Z) + 1)."""

    a: float
    b: float
    A: float
    C: float
    lhs_ratio: float
    bound_rhs: float
    cd_lambda: float = 0.0
    cd_shifted: float = 0.0
    delta_norm: float = 0.0

    @property
    def c0_required(self) -> float:
        """C/‖δ‖²: the C₀ the exact bound 1 + A + C would need."""
        if self.delta_norm == 0.0:
            return 0.0
        return self.C / self.delta_norm**2

    @property
    def c0_measured(self) -> float:
        """
        Smallest C₀ with lhs_ratio ≤ 1 + A + C₀‖δ‖² at this sample. At most
        c0_required wherever the exact bound holds.
        """
        if self.delta_norm == 0.0:
            return 0.0
        return max(0.0, self.lhs_ratio - 1.0 - self.A) / self.delta_norm**2

    @property
    def holds(self) -> bool:
        return self.lhs_ratio <= self.bound_rhs * (1 + 1e-9) + 1e-12


def _point(Z) -> SiegelPoint:
    return Z if isinstance(Z, SiegelPoint) else SiegelPoint.from_array(as_array(Z))


def _sym(S, m: Optional[int] = None) -> np.ndarray:
    s = S.entries if isinstance(S, RealSym) else RealSym(np.atleast_2d(np.asarray(S, dtype=float))).entries
    if m is not None and s.shape[0] != m:
        raise DimensionMismatch(f"expected {m}x{m} matrix, got {s.shape}")
    return s


def _param(lam) -> SpectralParameter:
    if isinstance(lam, SpectralParameter):
        return lam
    return SpectralParameter.from_complex(lam)


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------


def cd(Z: SiegelPoint, W: SiegelPoint) -> float:
    """cd(Z,W) = tr[(Im Z)⁻¹ (Z−W)* (Im W)⁻¹ (Z−W)]."""
    Z, W = _point(Z), _point(W)
    if Z.m != W.m:
        raise DimensionMismatch(f"cd of {Z.m}x{Z.m} and {W.m}x{W.m} points")
    E = Z.value - W.value
    val = np.trace(Z.Y_inv @ E.conj().T @ W.Y_inv @ E).real
    return max(0.0, float(val))


def cd_to_dist(c: float) -> float:
    # cosh⁻¹(1 + c/2) = 2 asinh(√c / 2), the latter stays accurate for tiny c
    return 2.0 * math.asinh(math.sqrt(max(c, 0.0)) / 2.0)


def dist(Z: SiegelPoint, W: SiegelPoint) -> float:
    """d(Z,W) = cosh⁻¹(1 + cd(Z,W)/2)."""
    return cd_to_dist(cd(Z, W))


# ---------------------------------------------------------------------------
# Isometries and the Möbius map
# ---------------------------------------------------------------------------


def mobius_neg_inv(Z: SiegelPoint) -> SiegelPoint:
    """Z ↦ −Z⁻¹."""
    Z = _point(Z)
    try:
        inv = cs_inverse(Z.Z)
    except Singular as exc:
        raise InvariantBreach(f"Siegel point not invertible: {exc}") from exc
    return SiegelPoint(ComplexSym(-inv.value))


def translate(Z: SiegelPoint, S: RealSym) -> SiegelPoint:
    """Z ↦ Z + S for real symmetric S."""
    Z = _point(Z)
    return SiegelPoint(ComplexSym(Z.value + _sym(S, Z.m)))


def phi(Z: SiegelPoint, delta: RealSym, lam: SpectralParameter, D: RealSym) -> SiegelPoint:
    """
    Φ_δ(Z) = −(Z + λ − D − δ)⁻¹.

    Raises:
        InvalidParameter: if Im λ <= 0
        DimensionMismatch: if Z, δ, D differ in size
        InvariantBreach: if the image is not in SH_m
    """
    Z = _point(Z)
    lam = _param(lam)
    lam.require_positive()
    m = Z.m
    shift = lam.lam * np.eye(m) - _sym(D, m) - _sym(delta, m)
    try:
        out = -cs_inverse(ComplexSym(Z.value + shift)).value
        return SiegelPoint(ComplexSym(out))
    except (Singular, NotPositiveDefinite) as exc:
        raise InvariantBreach(f"Φ_δ left the Siegel half space: {exc}") from exc


def phi_array(z: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Raw Φ on arrays: −(z + shift)⁻¹ with shift = λ − D − δ; batches over leading axes."""
    return -np.linalg.inv(z + shift)


# ---------------------------------------------------------------------------
# Free fixed point
# ---------------------------------------------------------------------------


def _eig_D(D) -> tuple[np.ndarray, np.ndarray]:
    w, v = herm_eig(_sym(D))
    return np.asarray(w, dtype=float), np.asarray(v.real, dtype=float)


def in_band_interior(x: float, mu: np.ndarray) -> bool:
    """True iff x lies in the interior of I_D = ∩[μ_k − 2, μ_k + 2]."""
    return bool(np.all(np.abs(x - np.asarray(mu)) < 2.0))


def channel_fixed_points(lam: SpectralParameter, mu: np.ndarray) -> np.ndarray:
    """
    Root of z² + (λ − μ)z + 1 = 0 with Im z > 0, one per channel μ.

    For Im λ > 0 the two roots multiply to 1, so exactly one is in the
    upper half plane. For real λ with |λ − μ| < 2 both lie on the unit
    circle and the one with positive imaginary part is taken.
    """
    lam = _param(lam)
    b = lam.lam - np.asarray(mu, dtype=float)
    disc = np.sqrt(b * b - 4.0 + 0j)
    r1 = (-b + disc) / 2.0
    r2 = (-b - disc) / 2.0
    return np.where(r1.imag > r2.imag, r1, r2)


def free_fixed_point(lam: SpectralParameter, D: RealSym) -> SiegelPoint:
    """
    Z_λ, the fixed point of Φ₀, built per eigenvalue μ_k of D and rotated
    back by D's eigenvectors.

    Raises:
        OutsideBand: if Im λ = 0 and Re λ is not in the interior of I_D
    """
    lam = _param(lam)
    mu, v = _eig_D(D)
    if lam.eps == 0 and not in_band_interior(lam.x, mu):
        raise OutsideBand(f"real λ={lam.x} is not in the interior of I_D")
    z = channel_fixed_points(lam, mu)
    return SiegelPoint(ComplexSym((v * z) @ v.T))


def w_lambda(lam: SpectralParameter, D: RealSym) -> SiegelPoint:
    """W_λ = −(2Z_λ + λ − D)⁻¹, the free full-line diagonal Green's function."""
    lam = _param(lam)
    Zl = free_fixed_point(lam, D)
    d = _sym(D, Zl.m)
    m = Zl.m
    inv = cs_inverse(ComplexSym(2.0 * Zl.value + lam.lam * np.eye(m) - d))
    return SiegelPoint(ComplexSym(-inv.value))


def cd_lambda(Z: SiegelPoint, lam: SpectralParameter, D: RealSym) -> float:
    """cd_λ(Z) = cd(Z_λ, Z)."""
    return cd(free_fixed_point(lam, D), Z)


# ---------------------------------------------------------------------------
# One-step growth diagnostics
# ---------------------------------------------------------------------------


def _require_lemma_domain(lam: SpectralParameter, D) -> np.ndarray:
    mu, _ = _eig_D(D)
    if not (0 < lam.eps <= 1):
        raise InvalidParameter(f"Im λ must lie in (0, 1], got {lam.eps}")
    if not in_band_interior(lam.x, mu):
        raise OutsideBand(f"Re λ={lam.x} is not in the interior of I_D")
    return mu


def lemma25_report(Z: SiegelPoint, delta: RealSym, lam: SpectralParameter, D: RealSym,
                   C0: Optional[float] = None) -> Lemma25Report:
    """
    Evaluate a(Z,δ), b(Z,δ), A(Z,δ), C(Z,δ) and the growth ratio
    (cd_λ²(Φ_δ(Z)) + 1)/(cd_λ²(Z) + 1).

    ``bound_rhs`` is 1 + A + C₀‖δ‖² when C0 is given, else 1 + A + C.
    The identity cd(Z − δ, Z_λ) = cd_λ(Z) + a + b holds exactly.
    """
    Z = _point(Z)
    lam = _param(lam)
    _require_lemma_domain(lam, D)
    m = Z.m
    d = _sym(delta, m)
    Zl = free_fixed_point(lam, D)
    Yl_is = Zl.Y_inv_sqrt
    E = Z.value - Zl.value

    t = np.trace(Yl_is @ d @ Z.Y_inv @ E @ Yl_is)
    a = float(-2.0 * t.real)
    b = max(0.0, float(np.trace(Yl_is @ d @ Z.Y_inv @ d @ Yl_is).real))

    c = cd(Zl, Z)
    image = phi(Z, RealSym(d), lam, D)
    c_img = cd(Zl, image)
    denom = c * c + 1.0
    A = 2.0 * c * a / denom
    C = (2.0 * a * a + 2.0 * c * b + 2.0 * b * b) / denom
    ratio = (c_img * c_img + 1.0) / denom
    dn = op_norm(d)
    rhs = 1.0 + A + (C0 * dn * dn if C0 is not None else C)
    return Lemma25Report(
        a=a, b=b, A=A, C=C, lhs_ratio=ratio, bound_rhs=rhs,
        cd_lambda=c, cd_shifted=c + a + b, delta_norm=dn,
    )


def explicit_c0(lam: SpectralParameter, D: RealSym, support_bound: float) -> float:
    """
    A C₀ following the proof's chain: with k = ‖Y_λ⁻¹‖²,
    C ≤ [10k(1 + m) + 16 m² k² K²] ‖δ‖² for ‖δ‖ ≤ K.
    """
    lam = _param(lam)
    Zl = free_fixed_point(lam, D)
    m = Zl.m
    k = (1.0 / Zl.Y.min_eig) ** 2
    return 10.0 * k * (1 + m) + 16.0 * m * m * k * k * support_bound**2


def trace_inequality(Z: SiegelPoint, lam: SpectralParameter, D: RealSym) -> tuple[float, float]:
    """(tr(Y_λ^{1/2} Y⁻¹ Y_λ^{1/2}), cd_λ(Z) + 2m)."""
    Z = _point(Z)
    Zl = free_fixed_point(lam, D)
    lhs = float(np.trace(Zl.Y_sqrt @ Z.Y_inv @ Zl.Y_sqrt).real)
    return lhs, cd(Zl, Z) + 2 * Z.m


def appendix_b_a(Z0: SiegelPoint, Z1: SiegelPoint, Z2: SiegelPoint) -> tuple[float, float]:
    """(cd(2Z₀, Z₁+Z₂), ½[cd(Z₀,Z₁) + cd(Z₀,Z₂)])."""
    Z0, Z1, Z2 = _point(Z0), _point(Z1), _point(Z2)
    lhs = cd(SiegelPoint(ComplexSym(2.0 * Z0.value)), SiegelPoint(ComplexSym(Z1.value + Z2.value)))
    return lhs, 0.5 * (cd(Z0, Z1) + cd(Z0, Z2))


def appendix_b_b(Z0: SiegelPoint, Z1: SiegelPoint, delta: RealSym) -> tuple[float, float]:
    """
    (cd(Z₀, δ + Z₁), C(1 + ‖δ‖²)[cd(Z₀,Z₁) + 1]) with C = max(2, 4m‖Y₀⁻¹‖²).
    """
    Z0, Z1 = _point(Z0), _point(Z1)
    lhs = cd(Z0, translate(Z1, delta))
    k = (1.0 / Z0.Y.min_eig) ** 2
    C = max(2.0, 4.0 * Z0.m * k)
    dn = op_norm(_sym(delta))
    return lhs, C * (1.0 + dn * dn) * (cd(Z0, Z1) + 1.0)


def appendix_b_c(Z0: SiegelPoint, lam: SpectralParameter, D: RealSym) -> tuple[float, float]:
    """(tr Im Z₀, C(cd_λ(Z₀) + 1)) with C = 2m/C′ and C′ = 1/‖Y_λ‖."""
    Z0 = _point(Z0)
    Zl = free_fixed_point(lam, D)
    C = 2.0 * Z0.m * Zl.Y.norm
    return float(np.trace(Z0.Y.entries).real), C * (cd(Zl, Z0) + 1.0)


def separation_bound(Z: SiegelPoint, W: SiegelPoint) -> tuple[float, float]:
    """
    (‖Z − W‖_F², cd(Z, W)·‖Y_Z‖·‖Y_W‖). The first never exceeds the second,
    so cd(Z, W) → 0 forces Z → W.
    """
    Z, W = _point(Z), _point(W)
    return frob_norm(Z.value - W.value) ** 2, cd(Z, W) * Z.Y.norm * W.Y.norm


def contraction_ratio(Z: SiegelPoint, W: SiegelPoint, lam: SpectralParameter) -> tuple[float, float, float]:
    """
    One-step contraction measured through the isometries:
    d(Φ_δ(Z), Φ_δ(W)) = d(Z + λ, W + λ).

    Returns:
        (dist ratio, cd ratio, bound s_Z·s_W on the cd ratio) where
        s = ‖Y‖/(‖Y‖ + Im λ).
    """
    Z, W = _point(Z), _point(W)
    lam = _param(lam)
    lam.require_positive()
    shift = 1j * lam.eps * np.eye(Z.m)
    Zs = SiegelPoint(ComplexSym(Z.value + shift))
    Ws = SiegelPoint(ComplexSym(W.value + shift))
    c0, c1 = cd(Z, W), cd(Zs, Ws)
    d0, d1 = cd_to_dist(c0), cd_to_dist(c1)
    sz = Z.Y.norm / (Z.Y.norm + lam.eps)
    sw = W.Y.norm / (W.Y.norm + lam.eps)
    if c0 == 0.0:
        return 0.0, 0.0, sz * sw
    return d1 / d0, c1 / c0, sz * sw


def two_step_floor(Z: SiegelPoint, delta1: RealSym, delta2: RealSym,
                   lam: SpectralParameter, D: RealSym) -> tuple[float, float]:
    """
    (min eig Im Φ_{δ₁}(Φ_{δ₂}(Z)), Im λ / ‖Z′ + λ − D − δ₁‖²) where Z′ = Φ_{δ₂}(Z).
    """
    lam = _param(lam)
    first = phi(Z, delta2, lam, D)
    second = phi(first, delta1, lam, D)
    m = first.m
    norm = op_norm(first.value + lam.lam * np.eye(m) - _sym(D, m) - _sym(delta1, m))
    return second.Y.min_eig, lam.eps / norm**2


# ---------------------------------------------------------------------------
# Random points
# ---------------------------------------------------------------------------


def random_siegel_point(rng: np.random.Generator, m: int, x_scale: float = 1.0,
                        y_scale: float = 1.0, y_floor: float = 0.1) -> SiegelPoint:
    """X = symmetrized Gaussian, Y = A·Aᵀ + y_floor·I with Gaussian A."""
    g = rng.normal(scale=x_scale, size=(m, m))
    X = 0.5 * (g + g.T)
    A = rng.normal(scale=y_scale, size=(m, m))
    Y = A @ A.T + y_floor * np.eye(m)
    return SiegelPoint(ComplexSym(X + 1j * (0.5 * (Y + Y.T))))


def random_sym(rng: np.random.Generator, m: int, scale: float = 1.0) -> RealSym:
    g = rng.normal(scale=scale, size=(m, m))
    return RealSym(0.5 * (g + g.T))
