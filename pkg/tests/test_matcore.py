"""
Tests for the dense matrix kernel (siegel_green/matcore.py).

Tests cover:
- RealSym / ComplexSym / HermPD: construction checks and symmetrization
- herm_eig: ordering, reconstruction (hypothesis arrays), closed-form eigenvalues up to 3×3
- pd_sqrt / pd_inv_sqrt: squaring back
- cs_inverse: residual, involution
- op_norm / frob_norm
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from siegel_green.errors import NonHermitian, NotPositiveDefinite, NotSymmetric, Singular
from siegel_green.matcore import (
    ComplexSym,
    HermPD,
    RealSym,
    cs_inverse,
    frob_norm,
    herm_eig,
    op_norm,
    pd_inv_sqrt,
    pd_sqrt,
)


def _random_pd(seed: int, m: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return A @ A.conj().T + 0.1 * np.eye(m)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


def test_realsym_symmetrizes_small_asymmetry():
    a = np.array([[1.0, 2.0], [2.0 + 1e-12, 3.0]])
    s = RealSym(a)
    assert np.array_equal(s.entries, s.entries.T)
    assert s.n == 2


def test_realsym_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        RealSym([[0.0, 1.0], [0.0, 0.0]])


def test_realsym_rejects_non_square():
    with pytest.raises(NotSymmetric):
        RealSym(np.zeros((2, 3)))


def test_realsym_is_read_only():
    s = RealSym.identity(2)
    with pytest.raises(ValueError):
        s.entries[0, 0] = 5.0


def test_complexsym_parts_roundtrip():
    z = ComplexSym.from_parts(RealSym([[1.0, 2.0], [2.0, 0.0]]), RealSym.identity(2))
    assert np.allclose(z.re.entries, [[1.0, 2.0], [2.0, 0.0]])
    assert np.allclose(z.im.entries, np.eye(2))


def test_complexsym_rejects_hermitian_but_not_symmetric():
    with pytest.raises(NotSymmetric):
        ComplexSym(np.array([[0.0, 1j], [-1j, 0.0]]))


def test_hermpd_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        HermPD(np.diag([1.0, -1.0]))


def test_hermpd_rejects_ill_conditioned():
    with pytest.raises(NotPositiveDefinite):
        HermPD(np.diag([1.0, 1e-14]))


def test_hermpd_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        HermPD(np.array([[2.0, 1.0], [0.0, 2.0]]))


# ---------------------------------------------------------------------------
# herm_eig
# ---------------------------------------------------------------------------


def test_herm_eig_diagonal():
    w, u = herm_eig(np.diag([3.0, 1.0]))
    assert np.allclose(w, [1.0, 3.0])
    assert np.allclose(np.abs(u), [[0.0, 1.0], [1.0, 0.0]])


def test_herm_eig_strip_adjacency():
    w, _ = herm_eig([[0.0, -1.0], [-1.0, 0.0]])
    assert np.allclose(w, [-1.0, 1.0], atol=1e-14)


def test_herm_eig_reconstructs(rng):
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    M = A + A.conj().T
    w, u = herm_eig(M)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs((u * w) @ u.conj().T - M)) < 1e-12 * op_norm(M)


def test_herm_eig_matches_closed_form_2x2(rng):
    a, b, c = rng.normal(size=3)
    w, _ = herm_eig([[a, b], [b, c]])
    r = math.sqrt(((a - c) / 2) ** 2 + b * b)
    assert w == pytest.approx([(a + c) / 2 - r, (a + c) / 2 + r], abs=1e-10)


def _sym3_eigenvalues(A: np.ndarray) -> list[float]:
    """Trigonometric closed form for a real symmetric 3×3, ascending."""
    q = np.trace(A) / 3
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    p = math.sqrt((np.sum((np.diag(A) - q) ** 2) + 2 * p1) / 6)
    if p == 0.0:
        return [q, q, q]
    r = float(np.clip(np.linalg.det((A - q * np.eye(3)) / p) / 2, -1.0, 1.0))
    t = math.acos(r) / 3
    hi, lo = q + 2 * p * math.cos(t), q + 2 * p * math.cos(t + 2 * math.pi / 3)
    return [lo, 3 * q - hi - lo, hi]


def test_herm_eig_matches_closed_form_1x1():
    w, u = herm_eig([[-2.5]])
    assert w == pytest.approx([-2.5])
    assert abs(u[0, 0]) == pytest.approx(1.0)


def test_herm_eig_path_3x3():
    w, _ = herm_eig([[0.0, -1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, -1.0, 0.0]])
    assert w == pytest.approx([-math.sqrt(2), 0.0, math.sqrt(2)], abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_herm_eig_matches_closed_form_3x3(a):
    S = a + a.T
    w, _ = herm_eig(S)
    assert w == pytest.approx(_sym3_eigenvalues(S), abs=1e-6 * max(1.0, op_norm(S)))


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 6).map(lambda n: (n, n)), elements=st.floats(-10, 10)))
def test_herm_eig_real_symmetric(a):
    S = RealSym(a + a.T).entries
    w, U = herm_eig(S)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose((U * w) @ U.conj().T, S, atol=1e-10 * max(1.0, op_norm(S)))


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        herm_eig([[0.0, 1.0], [2.0, 0.0]])


# ---------------------------------------------------------------------------
# Square roots
# ---------------------------------------------------------------------------


def test_pd_sqrt_identity_and_diagonal():
    assert np.allclose(pd_sqrt(HermPD(np.eye(3))).entries, np.eye(3))
    assert np.allclose(pd_sqrt(HermPD(np.diag([4.0, 9.0]))).entries, np.diag([2.0, 3.0]))
    assert np.allclose(pd_inv_sqrt(HermPD(np.diag([4.0, 9.0]))).entries, np.diag([0.5, 1 / 3]))


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 8))
def test_pd_sqrt_squares_back(seed, m):
    M = _random_pd(seed, m)
    R = pd_sqrt(HermPD(M)).entries
    assert np.max(np.abs(R @ R - M)) <= 1e-11 * op_norm(M)
    assert np.allclose(R, R.conj().T)


# ---------------------------------------------------------------------------
# cs_inverse
# ---------------------------------------------------------------------------


def test_cs_inverse_simple_values():
    assert np.allclose(cs_inverse(ComplexSym(1j * np.eye(3))).value, -1j * np.eye(3))
    assert cs_inverse(ComplexSym([[2j]])).value[0, 0] == pytest.approx(-0.5j)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6))
def test_cs_inverse_residual_and_involution(seed, m):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, m))
    A = rng.normal(size=(m, m))
    Z = ComplexSym(0.5 * (X + X.T) + 1j * (A @ A.T + 0.5 * np.eye(m)))
    R = cs_inverse(Z)
    assert np.array_equal(R.value, R.value.T)
    cond = np.linalg.cond(Z.value)
    assert np.max(np.abs(Z.value @ R.value - np.eye(m))) <= 1e-11 * max(1.0, cond)
    assert np.allclose(cs_inverse(R).value, Z.value, atol=1e-10 * max(1.0, cond))


def test_cs_inverse_singular():
    with pytest.raises(Singular):
        cs_inverse(ComplexSym(np.zeros((2, 2), dtype=complex)))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def test_norms_identity():
    assert op_norm(np.eye(3)) == pytest.approx(1.0)
    assert frob_norm(np.eye(3)) == pytest.approx(math.sqrt(3))


def test_op_norm_diagonal():
    assert op_norm(np.diag([-2.0, 1.0])) == pytest.approx(2.0)


def test_op_norm_below_frobenius(rng):
    for _ in range(20):
        M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        w = np.linalg.eigvalsh(M.conj().T @ M)
        assert op_norm(M) == pytest.approx(math.sqrt(w[-1]))
        assert op_norm(M) <= frob_norm(M) + 1e-12
