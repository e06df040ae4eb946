"""
Tests for the disorder Monte Carlo (siegel_green/disorder_mc.py).

Tests cover:
- Experiment validation (J inside I_D, eps grid, model size)
- run: zero disorder, determinism across worker counts, failure accounting
- product_bound closed form and ordering against the exponential bound
- zero_mean_check on symmetric, zero and shifted (negative control) models
- pathwise one-step bound and the mean-vs-product-bound consistency check
"""

import math
import warnings

import numpy as np
import pytest

from siegel_green.disorder_mc import (
    CSV_HEADER,
    Experiment,
    Target,
    pathwise_lemma25,
    product_bound,
    run,
    zero_mean_check,
    zero_mean_test,
)
from siegel_green.errors import InvalidParameter, OutsideBand
from siegel_green.green import EngineConfig
from siegel_green.model import DisorderKind, DisorderModel, OperatorSpec


def _experiment(spec, model, **overrides):
    kwargs = dict(
        spec=spec,
        model=model,
        J=(-1.0, 1.0),
        x_grid=(-0.5, 0.0, 0.5),
        eps_grid=(1.0, 0.1),
        trials=6,
        master_seed=17,
        window=(0, 10),
    )
    kwargs.update(overrides)
    return Experiment(**kwargs)


class ShiftedModel(DisorderModel):
    """Always q = c·M: mean ≠ 0, used as the negative control."""

    def draw(self, rng, n):
        return self.amplitude(n) * self.direction.entries


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


def test_experiment_rejects_j_outside_band(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5)
    with pytest.raises(OutsideBand):
        _experiment(free_scalar, model, J=(-2.0, 1.0))


def test_experiment_rejects_empty_band():
    spec = OperatorSpec.from_matrix(np.diag([-3.0, 3.0]))
    with pytest.raises(OutsideBand):
        _experiment(spec, DisorderModel(DisorderKind.RADEMACHER, m=2), J=(0.0, 0.0), x_grid=(0.0,))


def test_experiment_validation(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5)
    with pytest.raises(InvalidParameter):
        _experiment(free_scalar, model, eps_grid=(1.5,))
    with pytest.raises(InvalidParameter):
        _experiment(free_scalar, model, x_grid=(1.5,))
    with pytest.raises(InvalidParameter):
        _experiment(free_scalar, DisorderModel(DisorderKind.RADEMACHER, m=2, c=0.5))
    with pytest.raises(InvalidParameter):
        _experiment(free_scalar, model, target="sideways")


def test_trial_seeds_are_distinct(free_scalar):
    exp = _experiment(free_scalar, DisorderModel(DisorderKind.UNIFORM, m=1, c=0.5))
    assert len({exp.trial_seed(t) for t in range(100)}) == 100
    assert np.array_equal(exp.potential(3).values, exp.potential(3).values)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def test_zero_disorder_gives_zero_means(free_scalar):
    report = run(_experiment(free_scalar, DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.0)))
    assert report.failures == 0
    assert len(report.points) == 6
    for p in report.points:
        assert p.mean == pytest.approx(0.0, abs=1e-18)
        assert p.max == pytest.approx(0.0, abs=1e-18)
    assert report.product_bound == 1.0
    assert report.exp_bound == 1.0


def test_run_reports_finite_ordered_statistics(strip_2x1):
    model = DisorderModel(DisorderKind.UNIFORM, m=2, c=0.4, alpha=1.0)
    report = run(_experiment(strip_2x1, model, J=(-0.5, 0.5), x_grid=(-0.5, 0.5)))
    assert report.trials_used == 6
    assert not report.flagged
    for p in report.points:
        assert math.isfinite(p.mean) and math.isfinite(p.var)
        assert 0.0 <= p.mean <= p.max
    assert report.product_bound <= report.exp_bound
    assert report.grid_max(0.1) == max(report.point(x, 0.1).mean for x in (-0.5, 0.5))
    assert all(len(row) == len(CSV_HEADER) for row in report.csv_rows())


def test_run_is_deterministic_across_jobs(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5, alpha=1.0)
    exp = _experiment(free_scalar, model, trials=8)
    serial = run(exp, jobs=1)
    parallel = run(exp, jobs=3)
    assert serial.csv_rows() == parallel.csv_rows()


def test_diagonal_target(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.0)
    report = run(_experiment(free_scalar, model, target=Target.DIAGONAL, trials=2))
    assert all(p.mean == pytest.approx(0.0, abs=1e-18) for p in report.points)


def test_failures_are_counted_and_flagged(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5)
    cfg = EngineConfig(max_depth=32)
    report = run(_experiment(free_scalar, model, eps_grid=(1.0, 0.001), cfg=cfg, trials=3))
    assert report.failures > 0
    assert report.flagged
    assert set(report.failed_trials) <= {0, 1, 2}
    fine = report.point(0.0, 1.0)
    assert fine.failures == 0 and fine.trials == 3
    starved = report.point(0.0, 0.001)
    assert starved.trials == 0 and math.isnan(starved.mean)


def test_zero_trials_gives_empty_report(free_scalar):
    report = run(_experiment(free_scalar, DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5), trials=0))
    assert report.points == ()
    assert report.trials_used == 0
    assert not report.flagged


# ---------------------------------------------------------------------------
# product_bound
# ---------------------------------------------------------------------------


def test_product_bound_four_sites(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=1.0, alpha=1.0)
    prod, expo = product_bound(_experiment(free_scalar, model, window=(0, 3)), 1.0)
    assert prod == pytest.approx(2.951389, abs=1e-6)
    assert expo == pytest.approx(math.exp(1 + 1 / 4 + 1 / 9 + 1 / 16))
    assert prod <= expo


def test_product_bound_zero_model(free_scalar):
    prod, expo = product_bound(_experiment(free_scalar, DisorderModel(DisorderKind.UNIFORM, m=1)), 3.0)
    assert prod == 1.0 and expo == 1.0


def test_product_bound_requires_positive_c0(free_scalar):
    with pytest.raises(InvalidParameter):
        product_bound(_experiment(free_scalar, DisorderModel(DisorderKind.UNIFORM, m=1)), 0.0)


def test_product_bound_overflow_is_inf(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.5, alpha=0.0)
    exp = _experiment(free_scalar, model, window=(-2000, 2000))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        prod, expo = product_bound(exp, 100.0)
    assert prod == math.inf and expo == math.inf


@pytest.mark.parametrize("kind", list(DisorderKind))
def test_product_below_exponential(kind, strip_2x1):
    model = DisorderModel(kind, m=2, c=0.8, alpha=0.5)
    exp = _experiment(strip_2x1, model, J=(-0.5, 0.5), x_grid=(0.0,), window=(-30, 30))
    for C0 in (0.1, 1.0, 25.0):
        prod, expo = product_bound(exp, C0)
        assert prod <= expo


# ---------------------------------------------------------------------------
# Zero-mean check
# ---------------------------------------------------------------------------


def test_zero_mean_symmetric_model():
    result = zero_mean_test(DisorderModel(DisorderKind.RADEMACHER, m=2, c=0.5), 2000, seed=3)
    assert result.ok
    assert abs(result.mean) <= 4 * result.sd / math.sqrt(2000)


def test_zero_mean_zero_model():
    assert zero_mean_check(DisorderModel(DisorderKind.UNIFORM, m=2, c=0.0), 100, seed=1) == 0.0


def test_zero_mean_detects_shifted_model():
    result = zero_mean_test(ShiftedModel(DisorderKind.RADEMACHER, m=2, c=0.5), 200, seed=3)
    assert not result.ok
    assert zero_mean_check(ShiftedModel(DisorderKind.RADEMACHER, m=2, c=0.5), 200, seed=3) > 0.0


# ---------------------------------------------------------------------------
# Pathwise bound
# ---------------------------------------------------------------------------


def test_pathwise_bound_and_mean_consistency(free_scalar):
    model = DisorderModel(DisorderKind.RADEMACHER, m=1, c=0.3, alpha=1.0)
    exp = _experiment(free_scalar, model, x_grid=(0.0,), eps_grid=(0.5,), trials=40)
    path = pathwise_lemma25(exp)
    assert path.violations == 0
    assert path.steps == 40 * 11
    assert path.c0_measured > 0.0

    report = run(exp, C0=path.c0_measured)
    p = report.point(0.0, 0.5)
    assert p.mean + 1.0 <= report.product_bound + 3.0 * p.stderr
