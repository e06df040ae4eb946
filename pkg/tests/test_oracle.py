"""
Tests for the dense reference solver (siegel_green/oracle.py).

Tests cover:
- assemble: block layout, symmetry, size cap, arcsine moments of the free chain
- dense_green_block: free full-line value W_λ, resolvent symmetry
- half_line_block at depth 0 and 1, and vs nested_phi_block (Schur complement)
"""

import numpy as np
import pytest

from siegel_green.errors import InvalidParameter, SizeCap
from siegel_green.model import DisorderKind, DisorderModel, OperatorSpec, PotentialSample, sample_potential
from siegel_green.oracle import assemble, dense_green_block, half_line_block, nested_phi_block
from siegel_green.siegel import SpectralParameter, phi_array, w_lambda


def test_assemble_layout(strip_2x1):
    q = PotentialSample.from_sites({1: np.diag([0.5, -0.5])}, m=2)
    opr = assemble(strip_2x1, q, (0, 2))
    H = opr.matrix
    assert H.shape == (6, 6)
    assert np.array_equal(H, H.T)
    assert np.allclose(H[opr.site_slice(0), opr.site_slice(0)], strip_2x1.D.entries)
    assert np.allclose(H[opr.site_slice(1), opr.site_slice(1)], strip_2x1.D.entries + np.diag([0.5, -0.5]))
    assert np.allclose(H[opr.site_slice(0), opr.site_slice(1)], -np.eye(2))
    assert np.allclose(H[opr.site_slice(0), opr.site_slice(2)], 0.0)


def test_assemble_size_cap(free_scalar, zero_q):
    with pytest.raises(SizeCap):
        assemble(free_scalar, zero_q, (0, 8192))


def test_site_outside_window(free_scalar, zero_q):
    opr = assemble(free_scalar, zero_q, (0, 3))
    with pytest.raises(InvalidParameter):
        opr.site_slice(4)


def test_free_window_matches_arcsine_moments(free_scalar, zero_q):
    # eigenvalues of the free chain follow −2cos θ: moments 0, 2, 0, 6
    w = np.linalg.eigvalsh(assemble(free_scalar, zero_q, (0, 1999)).matrix)
    assert abs(np.mean(w)) < 0.01
    assert np.var(w) == pytest.approx(2.0, rel=0.01)
    assert np.mean(w**4) == pytest.approx(6.0, rel=0.01)
    assert np.all(np.abs(w) < 2.0)


def test_dense_free_matches_w_lambda(free_scalar, zero_q):
    lam = SpectralParameter(0.2, 0.1)
    G = dense_green_block(assemble(free_scalar, zero_q, (-250, 250)), lam, 0)
    assert abs(G.value[0, 0] - w_lambda(lam, free_scalar.D).value[0, 0]) < 1e-8


def test_dense_block_is_symmetric_with_positive_imaginary_part(strip_2x1):
    q = sample_potential(DisorderModel(DisorderKind.UNIFORM, m=2, c=1.0), 9, (-5, 5))
    G = dense_green_block(assemble(strip_2x1, q, (-10, 10)), SpectralParameter(0.0, 0.2), 0)
    assert np.allclose(G.value, G.value.T)
    assert np.all(np.linalg.eigvalsh(G.value.imag) > 0)


def test_half_line_two_sites_free(free_scalar, zero_q):
    G = half_line_block(free_scalar, zero_q, SpectralParameter(0.0, 1.0), 0, 1)
    assert G.value[0, 0] == pytest.approx(0.5j, abs=1e-14)


def test_half_line_single_site_is_resolvent(strip_2x1):
    q = sample_potential(DisorderModel(DisorderKind.UNIFORM, m=2, c=1.0), 4, (2, 2))
    lam = SpectralParameter(0.3, 0.4)
    G = half_line_block(strip_2x1, q, lam, 2, 0)
    expected = np.linalg.inv(strip_2x1.D.entries + q.at(2) - lam.lam * np.eye(2))
    assert np.allclose(G.value, expected, atol=1e-14)
    assert np.allclose(G.value, phi_array(np.zeros((2, 2)), lam.lam * np.eye(2) - strip_2x1.D.entries - q.at(2)))


def test_nested_phi_equals_half_line(rng):
    for _ in range(40):
        m = int(rng.integers(1, 5))
        N = int(rng.integers(0, 51))
        A = rng.normal(size=(m, m))
        spec = OperatorSpec.from_matrix(0.5 * (A + A.T))
        q = sample_potential(DisorderModel(DisorderKind.UNIFORM, m=m, c=1.0), int(rng.integers(0, 2**31)), (0, N))
        lam = SpectralParameter(rng.uniform(-2, 2), rng.uniform(0.01, 1.0))
        dense = half_line_block(spec, q, lam, 0, N)
        nested = nested_phi_block(spec, q, lam, 0, N)
        assert np.max(np.abs(dense.value - nested)) < 1e-10 * max(1.0, np.max(np.abs(nested)))
