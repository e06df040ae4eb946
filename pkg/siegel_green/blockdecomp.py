"""
Block decomposition of weakly coupled self-adjoint block operators.

H_V = [[H₁, V], [Vᵀ, H₂]] is split by contour Riesz projections P₁, P₂,
whose ranges are graphs {(x, Q₁x)} and {(Q₂y, y)}. With Q = [[0, Q₂], [Q₁, 0]]
the intertwining H_V(1 + Q) = (1 + Q)A holds for A = diag(H₁ + VQ₁, H₂ + VᵀQ₂),
and the orthogonal factor U of 1 + Q = U|1 + Q| block-diagonalizes H_V.

All matrices are real; complex arithmetic appears only on the contour.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
from scipy import special

from .errors import (
    DimensionMismatch,
    EigenvalueOnContour,
    GapViolation,
    InvalidParameter,
    InvariantBreach,
    NotAGraph,
    QuadratureNotConverged,
)
from .matcore import RealSym, herm_eig, op_norm
from .model import BandInterval, OperatorSpec, PotentialSample
from .oracle import assemble

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-9
IMAG_TOL = 1e-10
MAX_QUAD_POINTS = 1 << 16
GRAPH_COND_LIMIT = 1e12
SMALLNESS = 1.0 / 8.0


# ---------------------------------------------------------------------------
# Block operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockOperator:
    H1: RealSym
    H2: RealSym
    V: np.ndarray

    def __post_init__(self):
        for name in ("H1", "H2"):
            val = getattr(self, name)
            if not isinstance(val, RealSym):
                object.__setattr__(self, name, RealSym(np.atleast_2d(np.asarray(val, dtype=float))))
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if V.shape != (self.H1.n, self.H2.n):
            raise DimensionMismatch(f"V is {V.shape}, expected {(self.H1.n, self.H2.n)}")
        V = np.array(V, copy=True)
        V.setflags(write=False)
        object.__setattr__(self, "V", V)

    @property
    def dim1(self) -> int:
        return self.H1.n

    @property
    def dim2(self) -> int:
        return self.H2.n

    @property
    def H0(self) -> np.ndarray:
        return la.block_diag(self.H1.entries, self.H2.entries)

    @property
    def W(self) -> np.ndarray:
        d1, d2 = self.dim1, self.dim2
        out = np.zeros((d1 + d2, d1 + d2))
        out[:d1, d1:] = self.V
        out[d1:, :d1] = self.V.T
        return out

    @property
    def HV(self) -> np.ndarray:
        return self.H0 + self.W

    @property
    def V_norm(self) -> float:
        return op_norm(self.V)

    @property
    def gap(self) -> float:
        """dist(σ(H₁), σ(H₂))."""
        e1 = herm_eig(self.H1)[0]
        e2 = herm_eig(self.H2)[0]
        return float(np.min(np.abs(e1[:, None] - e2[None, :])))

    def block_projector(self, i: int) -> np.ndarray:
        """p₁ or p₂, the coordinate projection onto block i."""
        n = self.dim1 + self.dim2
        p = np.zeros((n, n))
        if i == 1:
            p[:self.dim1, :self.dim1] = np.eye(self.dim1)
        else:
            p[self.dim1:, self.dim1:] = np.eye(self.dim2)
        return p


class ContourShape(str, Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"


@dataclass(frozen=True)
class ContourSpec:
    """
    Counter-clockwise contour. A circle is (center, radius); a rectangle is
    [re_min, re_max] × [−half_height, half_height].
    """

    shape: ContourShape = ContourShape.CIRCLE
    center: float = 0.0
    radius: float = 1.0
    re_min: float = -1.0
    re_max: float = 1.0
    half_height: float = 1.0
    quad_points: int = 256
    gap_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "shape", ContourShape(self.shape))
        if self.quad_points < 4:
            raise InvalidParameter(f"quad_points must be >= 4, got {self.quad_points}")
        if self.shape is ContourShape.CIRCLE and not self.radius > 0:
            raise InvalidParameter(f"radius must be > 0, got {self.radius}")
        if self.shape is ContourShape.RECTANGLE and not (self.re_max > self.re_min and self.half_height > 0):
            raise InvalidParameter("rectangle must have positive width and height")

    @classmethod
    def around(cls, values, margin: float, **kwargs) -> "ContourSpec":
        """Circle around [min, max] of ``values`` widened by ``margin``."""
        lo, hi = float(np.min(values)), float(np.max(values))
        return cls(ContourShape.CIRCLE, center=0.5 * (lo + hi), radius=0.5 * (hi - lo) + margin, **kwargs)

    def encloses(self, x: float) -> bool:
        if self.shape is ContourShape.CIRCLE:
            return abs(x - self.center) < self.radius
        return self.re_min < x < self.re_max

    def distance(self, x: float) -> float:
        """Distance from a real point to the contour."""
        if self.shape is ContourShape.CIRCLE:
            return abs(abs(x - self.center) - self.radius)
        if self.re_min <= x <= self.re_max:
            return min(x - self.re_min, self.re_max - x, self.half_height)
        return min(abs(x - self.re_min), abs(x - self.re_max))

    def nodes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(z_k, w_k) with (1/2πi)∮ f(z) dz ≈ Σ w_k f(z_k)."""
        if self.shape is ContourShape.CIRCLE:
            # trapezoidal rule; nodes come in conjugate pairs
            theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
            e = np.exp(1j * theta)
            return self.center + self.radius * e, self.radius * e / n
        per_edge = max(1, n // 4)
        t, wt = special.roots_legendre(per_edge)
        h = self.half_height
        corners = [complex(self.re_min, -h), complex(self.re_max, -h),
                   complex(self.re_max, h), complex(self.re_min, h)]
        zs, ws = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            zs.append(a + (b - a) * (t + 1.0) / 2.0)
            ws.append(wt * (b - a) / 2.0 / (2j * np.pi))
        return np.concatenate(zs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# Riesz projections
# ---------------------------------------------------------------------------


def _matrix(B: Union[BlockOperator, np.ndarray, RealSym]) -> np.ndarray:
    if isinstance(B, BlockOperator):
        return B.HV
    if isinstance(B, RealSym):
        return B.entries
    return RealSym(np.atleast_2d(np.asarray(B, dtype=float))).entries


def _contour_sum(H: np.ndarray, c: ContourSpec, n: int) -> np.ndarray:
    z, w = c.nodes(n)
    eye = np.eye(H.shape[0])
    R = np.linalg.inv(z[:, None, None] * eye - H[None, :, :])
    return np.einsum("k,kij->ij", w, R)


def _check_separation(B: BlockOperator, c: ContourSpec, evals: np.ndarray) -> None:
    """The contour must hold all of σ(H₁) and none of σ(H₂), or the reverse, and keep that count for H_V."""
    in1 = [c.encloses(float(e)) for e in herm_eig(B.H1)[0]]
    in2 = [c.encloses(float(e)) for e in herm_eig(B.H2)[0]]
    if all(in1) and not any(in2):
        expected = B.dim1
    elif all(in2) and not any(in1):
        expected = B.dim2
    else:
        raise GapViolation(
            f"contour encloses {sum(in1)}/{B.dim1} eigenvalues of H1 and {sum(in2)}/{B.dim2} of H2; "
            "it must separate σ(H1) from σ(H2)"
        )
    enclosed = sum(c.encloses(float(e)) for e in evals)
    if enclosed != expected:
        raise GapViolation(f"contour encloses {enclosed} eigenvalues of H_V, expected {expected}; coupling too strong")


def riesz_projection(B: Union[BlockOperator, np.ndarray, RealSym],
                     c: Optional[ContourSpec] = None) -> np.ndarray:
    """
    P = (1/2πi)∮ (z − H)⁻¹ dz, quadrature doubled until two successive
    estimates agree to 1e-9. Default contour: circle around σ(H₁) with margin g/2.

    Raises:
        GapViolation: a block operator's contour does not separate σ(H₁) from σ(H₂)
        EigenvalueOnContour: an eigenvalue lies within gap_tol of the contour
        QuadratureNotConverged: doubling never stabilizes below the node cap
    """
    H = _matrix(B)
    if c is None:
        if not isinstance(B, BlockOperator):
            raise InvalidParameter("a contour is required for a plain matrix")
        c = ContourSpec.around(herm_eig(B.H1)[0], 0.5 * B.gap)
    evals = herm_eig(H)[0]
    near = [float(e) for e in evals if c.distance(float(e)) < c.gap_tol]
    if near:
        raise EigenvalueOnContour(f"eigenvalues {near} within {c.gap_tol:g} of the contour")
    if isinstance(B, BlockOperator):
        _check_separation(B, c, evals)

    n = c.quad_points
    P = _contour_sum(H, c, n)
    while True:
        if 2 * n > MAX_QUAD_POINTS:
            raise QuadratureNotConverged(f"no stable projection with up to {n} nodes")
        n *= 2
        P_next = _contour_sum(H, c, n)
        change = float(np.max(np.abs(P_next - P)))
        P = P_next
        if change <= QUAD_TOL:
            break
        logger.info("Riesz quadrature: %d nodes still moving by %.2e, doubling", n, change)

    residue = float(np.max(np.abs(P.imag)))
    if residue > IMAG_TOL:
        raise InvariantBreach(f"projection has imaginary residue {residue:.2e}")
    P = 0.5 * (P.real + P.real.T)
    enclosed = sum(c.encloses(float(e)) for e in evals)
    rank = int(round(np.trace(P)))
    if rank != enclosed:
        raise InvariantBreach(f"projection trace {np.trace(P):.6f} != enclosed count {enclosed}")
    return P


def projection_deviation(B: BlockOperator, P1: np.ndarray) -> tuple[float, float]:
    """(‖P₁ − p₁‖, 2‖V‖/g), the measured deviation and its first-order envelope."""
    dev = op_norm(P1 - B.block_projector(1))
    g = B.gap
    return dev, (2.0 * B.V_norm / g) if g > 0 else math.inf


# ---------------------------------------------------------------------------
# Graph operators and block diagonalization
# ---------------------------------------------------------------------------


def graph_projector(Q1: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto {(x, Q₁x)}."""
    G = np.vstack([np.eye(Q1.shape[1]), Q1])
    return G @ np.linalg.solve(G.T @ G, G.T)


def graph_operators(B: BlockOperator, P1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Q₁ = p₂P₁p₁(p₁P₁p₁)⁻¹ and Q₂ = p₁P₂p₂(p₂P₂p₂)⁻¹ with P₂ = 1 − P₁.

    Raises:
        NotAGraph: if ‖V‖ > g/8 or a compression p_iP_ip_i is numerically singular
    """
    d1 = B.dim1
    P1 = np.asarray(P1, dtype=float)
    if P1.shape != (d1 + B.dim2, d1 + B.dim2):
        raise DimensionMismatch(f"projection is {P1.shape}, operator has order {d1 + B.dim2}")
    g = B.gap
    if B.V_norm > SMALLNESS * g:
        raise NotAGraph(f"coupling ‖V‖={B.V_norm:.4g} exceeds g/8={SMALLNESS * g:.4g}")
    P2 = np.eye(P1.shape[0]) - P1

    c11 = P1[:d1, :d1]
    c22 = P2[d1:, d1:]
    cond = max(np.linalg.cond(c11), np.linalg.cond(c22))
    logger.debug("graph_operators: compression condition number %.3e", cond)
    if not np.isfinite(cond) or cond > GRAPH_COND_LIMIT:
        raise NotAGraph(f"compression is numerically singular (cond {cond:.3e})")
    Q1 = np.linalg.solve(c11.T, P1[d1:, :d1].T).T
    Q2 = np.linalg.solve(c22.T, P2[:d1, d1:].T).T
    return Q1, Q2


@dataclass(frozen=True, eq=False)
class BlockDiagonalization:
    A1: np.ndarray
    A2: np.ndarray
    U: np.ndarray
    block1: np.ndarray
    block2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    offdiag_residual: float
    intertwining_residual: float

    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.concatenate([la.eigvalsh(self.block1), la.eigvalsh(self.block2)]))


def block_diagonalize(B: BlockOperator, Q1: np.ndarray, Q2: np.ndarray) -> BlockDiagonalization:
    """
    A₁ = H₁ + VQ₁, A₂ = H₂ + VᵀQ₂, U from the polar decomposition of 1 + Q,
    and the diagonal blocks of UᵀH_VU with T_i = block_i − H_i.
    """
    d1, d2 = B.dim1, B.dim2
    if Q1.shape != (d2, d1) or Q2.shape != (d1, d2):
        raise DimensionMismatch(f"Q1 {Q1.shape} / Q2 {Q2.shape} do not match blocks ({d1}, {d2})")
    H = B.HV
    one_q = np.eye(d1 + d2)
    one_q[d1:, :d1] = Q1
    one_q[:d1, d1:] = Q2

    A1 = B.H1.entries + B.V @ Q1
    A2 = B.H2.entries + B.V.T @ Q2
    A = la.block_diag(A1, A2)
    intertwining = op_norm(H @ one_q - one_q @ A)

    U, _ = la.polar(one_q, side="right")
    C = U.T @ H @ U
    C = 0.5 * (C + C.T)
    block1, block2 = C[:d1, :d1], C[d1:, d1:]
    offdiag = op_norm(C[:d1, d1:])
    return BlockDiagonalization(
        A1, A2, U, block1, block2,
        T1=block1 - B.H1.entries,
        T2=block2 - B.H2.entries,
        offdiag_residual=offdiag,
        intertwining_residual=intertwining,
    )


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def denisov_split(B: BlockOperator, a: float, b: float, epsilon: float) -> BlockOperator:
    """
    Replace H₁ by H₁·χ_[a+ε, b−ε](H₁), computed in H₁'s eigenbasis.

    Raises:
        GapViolation: if σ(H₂) meets (a + ε/2, b − ε/2)
    """
    if not (epsilon > 0 and a + epsilon <= b - epsilon):
        raise InvalidParameter(f"need epsilon > 0 and a + epsilon <= b - epsilon, got [{a}, {b}], {epsilon}")
    e2 = herm_eig(B.H2)[0]
    inside = [float(e) for e in e2 if a + epsilon / 2 < e < b - epsilon / 2]
    if inside:
        raise GapViolation(f"σ(H2) meets ({a + epsilon / 2}, {b - epsilon / 2}): {inside}")
    w, v = herm_eig(B.H1)
    v = v.real
    keep = (w >= a + epsilon) & (w <= b - epsilon)
    H1_hat = (v * np.where(keep, w, 0.0)) @ v.T
    return BlockOperator(RealSym(H1_hat), B.H2, B.V)


def strip_block_operator(spec: OperatorSpec, q: PotentialSample, window: tuple[int, int],
                         interval: BandInterval) -> BlockOperator:
    """
    The dense window operator in D's eigenbasis, split into the channels in
    band on ``interval`` (block 1) and the rest (block 2). Hopping and D are
    channel-diagonal there, so V = P_I q P̄_I site by site.
    """
    chans = set(interval.channels)
    if not chans or len(chans) == spec.m:
        raise InvalidParameter("interval must select a proper nonempty subset of channels")
    opr = assemble(spec, q, window)
    W = opr.width
    Vfull = np.kron(np.eye(W), spec.eigenvectors)
    H = Vfull.T @ opr.matrix @ Vfull
    idx1 = [s * spec.m + k for s in range(W) for k in range(spec.m) if k in chans]
    idx2 = [s * spec.m + k for s in range(W) for k in range(spec.m) if k not in chans]
    H = 0.5 * (H + H.T)
    return BlockOperator(
        RealSym(H[np.ix_(idx1, idx1)]),
        RealSym(H[np.ix_(idx2, idx2)]),
        H[np.ix_(idx1, idx2)],
    )
