"""
Dense numerics for small real-symmetric, complex-symmetric and Hermitian
positive-definite matrices.

Provides:
- RealSym, ComplexSym, HermPD value types (immutable after construction)
- herm_eig, pd_sqrt, pd_inv_sqrt, cs_inverse
- op_norm (largest singular value) and frob_norm

Norm convention: ‖·‖ in every inequality of this package is the operator
norm. Frobenius is exposed separately.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.linalg as la

from .errors import NonHermitian, NotPositiveDefinite, NotSymmetric, Singular

logger = logging.getLogger(__name__)

HERM_TOL = 1e-13   # relative Hermiticity tolerance for HermPD / herm_eig
SYM_TOL = 1e-8     # relative symmetry tolerance accepted before symmetrizing
PD_TOL = 1e-12     # smallest eigenvalue must exceed PD_TOL * largest
INV_TOL = 1e-11    # cs_inverse residual, scaled by the condition number
MAX_DIM = 64

ArrayLike = Union[np.ndarray, "RealSym", "ComplexSym", "HermPD"]


def as_array(M: ArrayLike) -> np.ndarray:
    """Underlying ndarray of a matrix value type (or the array itself)."""
    if isinstance(M, RealSym):
        return M.entries
    if isinstance(M, ComplexSym):
        return M.value
    if isinstance(M, HermPD):
        return M.entries
    return np.asarray(M)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_square(a: np.ndarray, what: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NotSymmetric(f"{what} must be a non-empty square matrix, got shape {a.shape}")


def _relative_asymmetry(a: np.ndarray, conj: bool) -> float:
    other = a.conj().T if conj else a.T
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    return float(np.max(np.abs(a - other))) / scale


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RealSym:
    """Real symmetric n×n matrix; symmetrized on construction via (M+Mᵀ)/2."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if np.iscomplexobj(a):
            if np.any(a.imag != 0):
                raise NotSymmetric("RealSym entries must be real")
            a = a.real
        a = np.asarray(a, dtype=float)
        _check_square(a, "RealSym")
        if not np.all(np.isfinite(a)):
            raise NotSymmetric("RealSym entries must be finite")
        asym = _relative_asymmetry(a, conj=False)
        if asym > SYM_TOL:
            raise NotSymmetric(f"matrix is not symmetric (relative asymmetry {asym:.3e})")
        a = 0.5 * (a + a.T)
        assert np.array_equal(a, a.T)
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "RealSym":
        return cls(np.zeros((n, n)))

    @classmethod
    def identity(cls, n: int) -> "RealSym":
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values) -> "RealSym":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def scaled(self, s: float) -> "RealSym":
        return RealSym(s * self.entries)


@dataclass(frozen=True, eq=False)
class ComplexSym:
    """
    Complex symmetric matrix Z = X + iY with Zᵀ = Z.

    ``asymmetry`` records the relative asymmetry of the input before it was
    symmetrized; positivity of Y is enforced by SiegelPoint, not here.
    """

    value: np.ndarray
    asymmetry: float = field(default=0.0, compare=False)

    def __post_init__(self):
        z = np.asarray(self.value, dtype=complex)
        _check_square(z, "ComplexSym")
        if not np.all(np.isfinite(z)):
            raise NotSymmetric("ComplexSym entries must be finite")
        asym = _relative_asymmetry(z, conj=False)
        if asym > SYM_TOL:
            raise NotSymmetric(f"matrix is not complex symmetric (relative asymmetry {asym:.3e})")
        object.__setattr__(self, "value", _frozen(0.5 * (z + z.T)))
        object.__setattr__(self, "asymmetry", asym)

    @classmethod
    def from_parts(cls, re: RealSym, im: RealSym) -> "ComplexSym":
        if re.n != im.n:
            raise NotSymmetric("real and imaginary parts differ in size")
        return cls(re.entries + 1j * im.entries)

    @property
    def n(self) -> int:
        return self.value.shape[0]

    @property
    def re(self) -> RealSym:
        return RealSym(self.value.real)

    @property
    def im(self) -> RealSym:
        return RealSym(self.value.imag)


@dataclass(frozen=True, eq=False)
class HermPD:
    """Hermitian positive-definite matrix with a cached eigendecomposition."""

    entries: np.ndarray
    pd_tol: float = field(default=PD_TOL, compare=False)

    def __post_init__(self):
        a = np.asarray(self.entries)
        a = a.astype(complex if np.iscomplexobj(a) else float)
        _check_square(a, "HermPD")
        asym = _relative_asymmetry(a, conj=True)
        if asym > HERM_TOL:
            raise NonHermitian(f"matrix is not Hermitian (relative asymmetry {asym:.3e})")
        a = 0.5 * (a + a.conj().T)
        w, u = la.eigh(a)
        if not (w[0] > 0 and w[0] > self.pd_tol * w[-1]):
            raise NotPositiveDefinite(
                f"smallest eigenvalue {w[0]:.3e} below {self.pd_tol:.1e} x largest {w[-1]:.3e}"
            )
        object.__setattr__(self, "entries", _frozen(a))
        object.__setattr__(self, "_eig", (_frozen(w), _frozen(u)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    @cached_property
    def inverse(self) -> np.ndarray:
        return self._power(-1.0)

    @cached_property
    def sqrt(self) -> np.ndarray:
        return self._power(0.5)

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        return self._power(-0.5)

    @property
    def norm(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0])

    def _power(self, p: float) -> np.ndarray:
        w, u = self._eig
        out = (u * w**p) @ u.conj().T
        out = 0.5 * (out + out.conj().T)
        out.setflags(write=False)
        return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def herm_eig(M: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """
    Hermitian eigendecomposition.

    Returns:
        (eigenvalues ascending, unitary eigenvector matrix) with M = U diag(w) U*.

    Raises:
        NonHermitian: if the relative asymmetry exceeds HERM_TOL
    """
    if isinstance(M, HermPD):
        return M.eigenvalues, M.eigenvectors
    a = as_array(M)
    _check_square(a, "herm_eig input")
    asym = _relative_asymmetry(a, conj=True)
    if asym > HERM_TOL:
        raise NonHermitian(f"matrix is not Hermitian (relative asymmetry {asym:.3e})")
    a = 0.5 * (a + a.conj().T)
    return la.eigh(a)


def pd_sqrt(M: HermPD) -> HermPD:
    """Principal square root of a positive-definite matrix."""
    if not isinstance(M, HermPD):
        M = HermPD(as_array(M))
    return HermPD(M.sqrt, pd_tol=0.0)


def pd_inv_sqrt(M: HermPD) -> HermPD:
    if not isinstance(M, HermPD):
        M = HermPD(as_array(M))
    return HermPD(M.inv_sqrt, pd_tol=0.0)


def inverse(a: np.ndarray) -> np.ndarray:
    """LU inverse with partial pivoting; raises Singular on failure."""
    n = a.shape[0]
    try:
        lu, piv = la.lu_factor(a, check_finite=True)
    except (ValueError, la.LinAlgError) as exc:
        raise Singular(f"LU factorization failed: {exc}") from exc
    if np.any(np.diag(lu) == 0):
        raise Singular("exactly singular matrix (zero pivot)")
    return la.lu_solve((lu, piv), np.eye(n, dtype=a.dtype))


def cs_inverse(Z: ComplexSym) -> ComplexSym:
    """
    Inverse of a complex symmetric matrix.

    LU with partial pivoting, residual checked against the condition
    number, result symmetrized so consumers can rely on exact symmetry.

    Raises:
        Singular: if ‖Z·R − I‖ > INV_TOL · cond(Z)
    """
    if not isinstance(Z, ComplexSym):
        Z = ComplexSym(as_array(Z))
    z = Z.value
    r = inverse(z)
    cond = float(np.linalg.cond(z))
    residual = float(np.max(np.abs(z @ r - np.eye(Z.n))))
    if not np.isfinite(cond) or residual > INV_TOL * max(1.0, cond):
        raise Singular(f"inverse residual {residual:.3e} (cond {cond:.3e})")
    return ComplexSym(0.5 * (r + r.T))


def op_norm(M: ArrayLike) -> float:
    """Operator norm (largest singular value)."""
    a = as_array(M)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def frob_norm(M: ArrayLike) -> float:
    return float(np.linalg.norm(as_array(M), "fro"))
