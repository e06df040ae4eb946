"""
Brute-force ground truth on finite windows.

The window Hamiltonian is assembled as one dense site-major matrix with
Dirichlet ends, and Green's blocks are read off direct solves. Used to
cross-check the recursion engine.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import InvalidParameter, SizeCap, Singular
from .matcore import ComplexSym
from .model import OperatorSpec, PotentialSample
from .siegel import SpectralParameter, phi_array

logger = logging.getLogger(__name__)

MAX_ORDER = 8192


@dataclass(frozen=True, eq=False)
class DenseWindowOperator:
    n_min: int
    n_max: int
    m: int
    matrix: np.ndarray
    boundary: str = "dirichlet"

    @property
    def width(self) -> int:
        return self.n_max - self.n_min + 1

    def site_slice(self, n: int) -> slice:
        if not self.n_min <= n <= self.n_max:
            raise InvalidParameter(f"site {n} outside window [{self.n_min}, {self.n_max}]")
        i = (n - self.n_min) * self.m
        return slice(i, i + self.m)


def assemble(spec: OperatorSpec, q: PotentialSample, window: tuple[int, int]) -> DenseWindowOperator:
    """
    Site-major (W·m)×(W·m) matrix: D + q_n on the diagonal blocks and −I
    between neighbouring sites. q is zero outside its sample range.

    Raises:
        SizeCap: if W·m > 8192
    """
    n_min, n_max = int(window[0]), int(window[1])
    if n_min > n_max:
        raise InvalidParameter(f"empty window [{n_min}, {n_max}]")
    m = spec.m
    W = n_max - n_min + 1
    if W * m > MAX_ORDER:
        raise SizeCap(f"window of {W} sites x {m} channels exceeds order {MAX_ORDER}")

    H = np.kron(np.eye(W), spec.D.entries)
    H -= np.kron(np.eye(W, k=1) + np.eye(W, k=-1), np.eye(m))
    for i, qn in enumerate(q.block(n_min, n_max)):
        H[i * m:(i + 1) * m, i * m:(i + 1) * m] += qn
    H = 0.5 * (H + H.T)
    H.setflags(write=False)
    return DenseWindowOperator(n_min, n_max, m, H)


def dense_green_block(opr: DenseWindowOperator, lam: SpectralParameter, n: int) -> ComplexSym:
    """P_n (H − λ)⁻¹ P_n by a direct LU solve against the site-n columns."""
    lam = lam if isinstance(lam, SpectralParameter) else SpectralParameter.from_complex(lam)
    lam.require_positive()
    sl = opr.site_slice(n)
    A = opr.matrix - lam.lam * np.eye(opr.matrix.shape[0])
    rhs = np.zeros((A.shape[0], opr.m), dtype=complex)
    rhs[sl, :] = np.eye(opr.m)
    try:
        X = la.solve(A, rhs, assume_a="sym")
    except la.LinAlgError as exc:
        raise Singular(f"dense solve failed at λ={lam.lam}: {exc}") from exc
    return ComplexSym(X[sl, :])


def half_line_block(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                    n0: int, depth: int) -> ComplexSym:
    """Forward block at n0 of the chain n0..n0+depth with a Dirichlet cut after it."""
    if depth < 0:
        raise InvalidParameter(f"depth must be >= 0, got {depth}")
    opr = assemble(spec, q, (n0, n0 + depth))
    return dense_green_block(opr, lam, n0)


def nested_phi_block(spec: OperatorSpec, q: PotentialSample, lam: SpectralParameter,
                     n0: int, depth: int) -> np.ndarray:
    """
    Φ_{q_{n0}} ∘ … ∘ Φ_{q_{n0+depth−1}} applied to the one-site resolvent
    (D + q_{n0+depth} − λ)⁻¹ = Φ_{q_{n0+depth}}(0). Equals half_line_block
    exactly (Schur complement).
    """
    lam = lam if isinstance(lam, SpectralParameter) else SpectralParameter.from_complex(lam)
    lam.require_positive()
    base = lam.lam * np.eye(spec.m) - spec.D.entries
    z = np.zeros((spec.m, spec.m), dtype=complex)
    for qs in q.block(n0, n0 + depth)[::-1]:
        z = phi_array(z, base - qs)
    return 0.5 * (z + z.T)
