"""
Tests for the operator and disorder model (siegel_green/model.py).

Tests cover:
- strip_dirichlet: spectrum against the closed form, size cap
- band_report: I_D, σ(Δ + D), interval decomposition, summary line
- mode_count / channel_roots / interval restriction
- DisorderModel draws, support bound, second moments and zero mean
- PotentialSample windows, reflection, sample_potential determinism
"""

import math

import numpy as np
import pytest

from siegel_green.errors import InvalidParameter, SizeCap
from siegel_green.model import (
    DisorderKind,
    DisorderModel,
    OperatorSpec,
    PotentialSample,
    band_report,
    channel_roots,
    interval_projection,
    mode_count,
    restrict_spec,
    sample_potential,
    second_moment_sum,
    strip_dirichlet,
    strip_eigenvalues,
)
from siegel_green.siegel import SpectralParameter


# ---------------------------------------------------------------------------
# Strip operators
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("L,d", [(1, 1), (2, 1), (3, 1), (2, 2), (3, 2), (2, 3), (4, 3)])
def test_strip_spectrum_matches_closed_form(L, d):
    spec = strip_dirichlet(L, d)
    assert spec.m == L**d
    assert np.allclose(spec.mu, strip_eigenvalues(L, d), atol=1e-12)


def test_strip_size_cap():
    with pytest.raises(SizeCap):
        strip_dirichlet(5, 3)
    with pytest.raises(InvalidParameter):
        strip_dirichlet(0, 1)


def test_operator_spec_size_cap():
    with pytest.raises(SizeCap):
        OperatorSpec.from_matrix(np.zeros((65, 65)))


# ---------------------------------------------------------------------------
# Band geometry
# ---------------------------------------------------------------------------


def test_band_report_strip_l2_d1(strip_2x1):
    report = band_report(strip_2x1)
    assert report.I_D == (-1.0, 1.0)
    assert report.sigma_free == ((-3.0, 3.0),)
    assert report.summary_line() == "I_D = [-1.000000, 1.000000]; sigma = [-3.000000, 3.000000]"
    assert report.intervals_with_count == [
        ((-3.0, -1.0), 1, (0,)),
        ((-1.0, 1.0), 2, (0, 1)),
        ((1.0, 3.0), 1, (1,)),
    ]


def test_band_report_strip_formula():
    for L in (2, 3, 4):
        c = math.cos(math.pi / (L + 1))
        report = band_report(strip_dirichlet(L, 1))
        assert report.I_D[0] == pytest.approx(-2 * (1 - c), abs=1e-12)
        assert report.I_D[1] == pytest.approx(2 * (1 - c), abs=1e-12)
        assert report.sigma_free[0][0] == pytest.approx(-2 - 2 * c, abs=1e-12)
        assert report.sigma_free[-1][1] == pytest.approx(2 + 2 * c, abs=1e-12)


@pytest.mark.parametrize("L", [2, 3])
def test_band_report_empty_i_d_for_2d_strip(L):
    report = band_report(strip_dirichlet(L, 2))
    assert report.I_D is None
    assert report.summary_line().startswith("I_D = (empty); sigma = ")


def test_band_report_free_scalar(free_scalar):
    report = band_report(free_scalar)
    assert report.I_D == (-2.0, 2.0)
    assert [iv.count for iv in report.intervals] == [1]


def test_band_report_split_spectrum():
    report = band_report(OperatorSpec.from_matrix(np.diag([0.0, 10.0])))
    assert report.I_D is None
    assert report.sigma_free == ((-2.0, 2.0), (8.0, 12.0))


def test_mode_count(strip_2x1):
    assert mode_count(strip_2x1, 0.0) == 2
    assert mode_count(strip_2x1, 2.0) == 1
    assert mode_count(strip_2x1, 3.5) == 0


def test_channel_roots_on_unit_circle(strip_2x1):
    roots = channel_roots(strip_2x1, SpectralParameter(0.5, 0.0))
    assert np.allclose(np.abs(roots), 1.0)
    assert np.all(roots.imag > 0)


def test_interval_restriction(strip_2x1):
    iv = band_report(strip_2x1).intervals[0]
    P = interval_projection(strip_2x1, iv)
    assert np.allclose(P @ P, P)
    assert np.trace(P) == pytest.approx(1.0)
    sub = restrict_spec(strip_2x1, iv)
    assert sub.m == 1
    assert sub.mu[0] == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# Disorder
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", list(DisorderKind))
def test_draws_respect_support_bound(kind, rng):
    model = DisorderModel(kind, m=3, c=0.7, alpha=0.5)
    for n in range(-10, 11):
        q = model.draw(rng, n)
        assert np.allclose(q, q.T)
        assert np.linalg.norm(q, 2) <= model.amplitude(n) + 1e-12
        assert model.amplitude(n) <= model.support_bound


def test_rademacher_magnitude_is_amplitude(rng):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=1.0, alpha=1.0)
    for n in range(5):
        assert abs(model.draw(rng, n)[0, 0]) == pytest.approx(1.0 / (1 + n))


@pytest.mark.parametrize("kind", list(DisorderKind))
def test_second_moment_matches_sampling(kind):
    model = DisorderModel(kind, m=2, c=1.0)
    rng = np.random.default_rng(5)
    draws = [np.linalg.norm(model.draw(rng, 0), 2) ** 2 for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(model.second_moment(0), rel=0.03)


@pytest.mark.parametrize("kind", list(DisorderKind))
def test_sampled_potential_has_zero_mean(kind):
    model = DisorderModel(kind, m=2, c=1.0)
    trials = 10_000
    mean = sum(sample_potential(model, seed, (3, 3)).at(3) for seed in range(trials)) / trials
    sd = math.sqrt(model.second_moment(3))
    assert np.linalg.norm(mean, 2) <= 4 * sd / math.sqrt(trials)


def test_direction_is_normalized():
    model = DisorderModel(DisorderKind.UNIFORM, m=2, c=1.0, direction=[[2.0, 0.0], [0.0, -4.0]])
    assert np.linalg.norm(model.direction.entries, 2) == pytest.approx(1.0)


def test_model_validation():
    with pytest.raises(InvalidParameter):
        DisorderModel(DisorderKind.RADEMACHER, m=1, c=-1.0)
    with pytest.raises(InvalidParameter):
        DisorderModel(DisorderKind.RADEMACHER, m=1, c=1.0, support_bound=0.5)
    with pytest.raises(InvalidParameter):
        DisorderModel(DisorderKind.RADEMACHER, m=2, c=1.0, direction=[[1.0]])
    with pytest.raises(ValueError):
        DisorderModel("gamma", m=1, c=1.0)


def test_amplitude_fn_override():
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, support_bound=1.0,
                          amplitude_fn=lambda n: 1.0 if n % 2 == 0 else 0.0)
    assert model.amplitude(2) == 1.0
    assert model.amplitude(3) == 0.0
    assert not model.is_zero


def test_second_moment_sum_closed_form():
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=1.0, alpha=1.0)
    assert second_moment_sum(model, (0, 3)) == pytest.approx(1 + 1 / 4 + 1 / 9 + 1 / 16)


# ---------------------------------------------------------------------------
# Potential samples
# ---------------------------------------------------------------------------


def test_sample_potential_is_deterministic_and_nested():
    model = DisorderModel(DisorderKind.UNIFORM, m=2, c=0.5)
    a = sample_potential(model, 42, (-5, 5))
    b = sample_potential(model, 42, (-5, 5))
    wide = sample_potential(model, 42, (-20, 20))
    other = sample_potential(model, 43, (-5, 5))
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, wide.block(-5, 5))
    assert not np.array_equal(a.values, other.values)


def test_zero_model_gives_zero_sample():
    q = sample_potential(DisorderModel(DisorderKind.RADEMACHER, m=2), 1, (0, 10))
    assert q.is_zero


def test_potential_sample_access():
    q = PotentialSample.from_sites({1: [[0.5]], 3: [[-0.25]]}, m=1)
    assert q.range == (1, 3)
    assert q.at(0)[0, 0] == 0.0
    assert q.at(3)[0, 0] == -0.25
    assert q.block(0, 4)[:, 0, 0].tolist() == [0.0, 0.5, 0.0, -0.25, 0.0]
    r = q.reflected()
    assert r.range == (-3, -1)
    assert r.at(-3)[0, 0] == -0.25
    assert q.norms().tolist() == [0.5, 0.0, 0.25]


def test_potential_sample_rejects_asymmetric():
    with pytest.raises(InvalidParameter):
        PotentialSample(0, 0, np.array([[[0.0, 1.0], [0.0, 0.0]]]))
