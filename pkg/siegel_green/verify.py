"""
Sampled property suites.

Each suite draws random inputs from a seeded generator, checks every
inequality or identity on every sample, and records the pass count and the
worst relative margin per property. The first hard failure raises
PropertyViolation with a JSON-serialisable counterexample; soft properties
(empirical envelopes) are only counted.

Suites: siegel, lemma25, appendixB, oracle, blockdecomp, all.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .blockdecomp import (
    BlockOperator,
    ContourSpec,
    block_diagonalize,
    graph_operators,
    graph_projector,
    projection_deviation,
    riesz_projection,
)
from .common import make_rng, to_jsonable
from .errors import InvalidParameter, PropertyViolation
from .green import EngineConfig, diagonal_green
from .matcore import RealSym, op_norm
from .model import OperatorSpec, PotentialSample
from .oracle import assemble, dense_green_block, half_line_block, nested_phi_block
from .siegel import (
    SiegelPoint,
    SpectralParameter,
    appendix_b_a,
    appendix_b_b,
    appendix_b_c,
    cd,
    cd_lambda,
    contraction_ratio,
    dist,
    explicit_c0,
    free_fixed_point,
    lemma25_report,
    mobius_neg_inv,
    phi,
    random_siegel_point,
    random_sym,
    separation_bound,
    trace_inequality,
    translate,
    two_step_floor,
)

logger = logging.getLogger(__name__)

REL_TOL = 1e-9
DIMS = (1, 2, 4, 8)
SUITES = ("siegel", "lemma25", "appendixB", "oracle", "blockdecomp")


@dataclass
class PropertyStat:
    name: str
    samples: int = 0
    passed: int = 0
    worst_margin: float = math.inf
    soft: bool = False


@dataclass
class SuiteReport:
    suite: str
    seed: int
    samples: int
    properties: dict[str, PropertyStat] = field(default_factory=dict)

    def check(self, name: str, lhs: float, rhs: float, context: Callable[[], dict[str, Any]],
              soft: bool = False, rel_tol: float = REL_TOL) -> None:
        """Record lhs ≤ rhs + rel_tol·max(1, |lhs|, |rhs|)."""
        stat = self.properties.setdefault(name, PropertyStat(name, soft=soft))
        stat.samples += 1
        scale = max(1.0, abs(rhs), abs(lhs))
        margin = (rhs - lhs) / scale
        stat.worst_margin = min(stat.worst_margin, margin)
        if lhs <= rhs + rel_tol * scale:
            stat.passed += 1
            return
        if soft:
            logger.warning("%s.%s outside its envelope: %.6g > %.6g", self.suite, name, lhs, rhs)
            return
        example = {"suite": self.suite, "property": name, "seed": self.seed, "lhs": lhs, "rhs": rhs}
        example.update(context())
        raise PropertyViolation(f"{self.suite}.{name} failed: {lhs!r} > {rhs!r}", to_jsonable(example))

    def check_residual(self, name: str, residual: float, tol: float, context: Callable[[], dict[str, Any]]) -> None:
        """Record residual ≤ tol with no further slack."""
        self.check(name, residual, tol, context, rel_tol=0.0)

    def check_close(self, name: str, value: float, reference: float, context: Callable[[], dict[str, Any]]) -> None:
        """Record |value − reference| ≤ REL_TOL·max(1, |reference|)."""
        self.check_residual(name, abs(value - reference), REL_TOL * max(1.0, abs(reference)), context)

    def lines(self) -> list[str]:
        out = []
        for s in self.properties.values():
            tag = " (envelope)" if s.soft else ""
            out.append(f"{self.suite}.{s.name}: {s.passed}/{s.samples} passed, worst margin {s.worst_margin:.3e}{tag}")
        return out


def _lam_in_band(rng: np.random.Generator, mu: np.ndarray, eps_range=(1e-3, 1.0), margin=0.05) -> SpectralParameter:
    lo, hi = mu.max() - 2 + margin, mu.min() + 2 - margin
    return SpectralParameter(float(rng.uniform(lo, hi)), float(rng.uniform(*eps_range)))


def _random_D(rng: np.random.Generator, m: int, spread: float = 1.0) -> RealSym:
    """Symmetric D with eigenvalues in [−spread, spread], so I_D ⊇ [−2+spread, 2−spread]."""
    Qm, _ = np.linalg.qr(rng.normal(size=(m, m)))
    mu = rng.uniform(-spread, spread, size=m)
    return RealSym((Qm * mu) @ Qm.T)


def _pt(Z: SiegelPoint) -> np.ndarray:
    return Z.value


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_siegel(samples: int, seed: int) -> SuiteReport:
    rep = SuiteReport("siegel", seed, samples)
    for i in range(samples):
        rng = make_rng(seed, "siegel", i)
        m = DIMS[i % len(DIMS)]
        Z, W, V = (random_siegel_point(rng, m) for _ in range(3))
        S = random_sym(rng, m)
        D = random_sym(rng, m)
        delta = random_sym(rng, m, 0.5)
        lam = SpectralParameter(float(rng.uniform(-3, 3)), float(rng.uniform(1e-4, 1.0)))

        def ctx():
            return {"sample": i, "m": m, "Z": _pt(Z), "W": _pt(W), "V": _pt(V), "S": S.entries,
                    "D": D.entries, "delta": delta.entries, "lambda": lam.lam}

        c = cd(Z, W)
        rep.check_close("isometry_neg_inv", cd(mobius_neg_inv(Z), mobius_neg_inv(W)), c, ctx)
        rep.check_close("isometry_translate", cd(translate(Z, S), translate(W, S)), c, ctx)
        d = dist(Z, W)
        rep.check_close("dist_symmetry", dist(W, Z), d, ctx)
        rep.check("dist_identity", dist(Z, Z), 0.0, ctx)
        rep.check("separation", *separation_bound(Z, W), ctx)
        near = SiegelPoint.from_array(Z.value + 1e-9 * (S.entries + 1j * np.eye(m)))
        rep.check_residual("near_cd", cd(Z, near), 1e-12, ctx)
        gap, cap = separation_bound(Z, near)
        rep.check("near_separation", gap / cap, 1.0, ctx)
        rep.check("triangle", d, dist(Z, V) + dist(V, W), ctx)
        pZ, pW = phi(Z, delta, lam, D), phi(W, delta, lam, D)
        rep.check("non_expansive", dist(pZ, pW), d, ctx)
        rep.check("resolvent_bound", op_norm(pZ.value), 1.0 / lam.eps, ctx)
        _, cd_ratio, bound = contraction_ratio(Z, W, lam)
        rep.check("strict_contraction", cd_ratio, bound, ctx)
        floor_val, floor_bound = two_step_floor(Z, delta, random_sym(rng, m, 0.5), lam, D)
        rep.check("two_step_floor", -floor_val, -floor_bound, ctx)
        Zl = free_fixed_point(lam, D)
        fp = phi(Zl, RealSym.zeros(m), lam, D)
        rep.check_residual("fixed_point", op_norm(fp.value - Zl.value), 1e-10 * max(1.0, op_norm(Zl.value)), ctx)
        rep.check("phi0_contraction", cd_lambda(phi(Z, RealSym.zeros(m), lam, D), lam, D), cd_lambda(Z, lam, D), ctx)
    return rep


def suite_lemma25(samples: int, seed: int, delta: Optional[RealSym] = None) -> SuiteReport:
    """
    One-step growth diagnostics. With ``delta`` given, every sample uses that
    δ (and its size fixes m).
    """
    rep = SuiteReport("lemma25", seed, samples)
    stored = []
    for i in range(samples):
        rng = make_rng(seed, "lemma25", i)
        m = delta.n if delta is not None else DIMS[i % len(DIMS)]
        D = _random_D(rng, m)
        spec_mu = np.linalg.eigvalsh(D.entries)
        lam = _lam_in_band(rng, spec_mu)
        Z = random_siegel_point(rng, m)
        dl = delta if delta is not None else random_sym(rng, m, 0.5)
        s = float(rng.uniform(-2, 2))

        def ctx():
            return {"sample": i, "m": m, "Z": _pt(Z), "D": D.entries, "delta": dl.entries,
                    "lambda": lam.lam, "s": s}

        r = lemma25_report(Z, dl, lam, D)
        rep.check("a_sq_le_4_cd_b", r.a * r.a, 4.0 * r.cd_lambda * r.b, ctx)
        shifted = cd(free_fixed_point(lam, D), translate(Z, dl.scaled(-1.0)))
        rep.check_close("shift_identity", shifted, r.cd_shifted, ctx)
        rep.check("ratio_bound", r.lhs_ratio, r.bound_rhs, ctx)
        dn = r.delta_norm
        rep.check("explicit_c0", r.C, explicit_c0(lam, D, dn) * dn * dn, ctx)
        a_scaled = lemma25_report(Z, dl.scaled(s), lam, D).a
        rep.check_close("a_linear", a_scaled, s * r.a, ctx)
        lhs, rhs = trace_inequality(Z, lam, D)
        rep.check("trace_inequality", lhs, rhs, ctx)
        stored.append((i, r))

    c0 = max((r.c0_measured for _, r in stored), default=0.0)
    for i, r in stored:
        rep.check("ratio_bound_measured_c0", r.lhs_ratio, 1.0 + r.A + c0 * r.delta_norm**2,
                  lambda: {"sample": i, "c0": c0})
    logger.info("lemma25: measured C0 = %.6g over %d samples", c0, len(stored))
    return rep


def suite_appendix_b(samples: int, seed: int) -> SuiteReport:
    rep = SuiteReport("appendixB", seed, samples)
    for i in range(samples):
        rng = make_rng(seed, "appendixB", i)
        m = DIMS[i % len(DIMS)]
        Z0, Z1, Z2 = (random_siegel_point(rng, m) for _ in range(3))
        delta = random_sym(rng, m)
        D = _random_D(rng, m)
        lam = _lam_in_band(rng, np.linalg.eigvalsh(D.entries))

        def ctx():
            return {"sample": i, "m": m, "Z0": _pt(Z0), "Z1": _pt(Z1), "Z2": _pt(Z2),
                    "delta": delta.entries, "D": D.entries, "lambda": lam.lam}

        rep.check("a_midpoint", *appendix_b_a(Z0, Z1, Z2), ctx)
        rep.check("b_translate", *appendix_b_b(Z0, Z1, delta), ctx)
        rep.check("c_trace", *appendix_b_c(Z0, lam, D), ctx)
    return rep


def suite_oracle(samples: int, seed: int) -> SuiteReport:
    """Exact nested-Φ identity, plus a few engine-vs-dense limit checks."""
    count = max(1, samples // 50)
    rep = SuiteReport("oracle", seed, count)
    for i in range(count):
        rng = make_rng(seed, "oracle", i)
        m = int(rng.integers(1, 5))
        N = int(rng.integers(0, 51))
        spec = OperatorSpec(random_sym(rng, m))
        q = PotentialSample(0, N, np.stack([random_sym(rng, m).entries for _ in range(N + 1)]))
        lam = SpectralParameter(float(rng.uniform(-3, 3)), float(rng.uniform(0.05, 1.0)))

        def ctx():
            return {"sample": i, "m": m, "depth": N, "D": spec.D.entries, "q": q.values, "lambda": lam.lam}

        dense = half_line_block(spec, q, lam, 0, N).value
        nested = nested_phi_block(spec, q, lam, 0, N)
        rep.check_residual("nested_phi_identity", op_norm(dense - nested), 1e-10 * max(1.0, op_norm(dense)), ctx)
        rep.check_residual("resolvent_symmetry", float(np.max(np.abs(dense - dense.T))), 1e-11, ctx)

    limit_count = max(1, samples // 500)
    lam = SpectralParameter(0.2, 0.1)
    cfg = EngineConfig(tol=1e-10)
    for i in range(limit_count):
        rng = make_rng(seed, "oracle-limit", i)
        spec = OperatorSpec(RealSym.zeros(2))
        q = PotentialSample(-15, 15, np.stack([random_sym(rng, 2, 0.5).entries for _ in range(31)]))
        G = diagonal_green(spec, q, lam, 0, cfg).value.value
        ref = dense_green_block(assemble(spec, q, (-250, 250)), lam, 0).value
        rep.check_residual("diagonal_vs_dense", op_norm(G - ref), 1e-8, lambda: {"sample": i, "q": q.values})
    return rep


def random_block_operator(rng: np.random.Generator, dim1: int, dim2: int, coupling: float) -> BlockOperator:
    """σ(H₁) ⊂ [−1, 1], σ(H₂) ⊂ [2, 4], ‖V‖ = coupling·g/8 with g the actual gap."""
    def sym_with(evals):
        Qm, _ = np.linalg.qr(rng.normal(size=(len(evals), len(evals))))
        return (Qm * evals) @ Qm.T

    H1 = sym_with(rng.uniform(-1, 1, size=dim1))
    H2 = sym_with(rng.uniform(2, 4, size=dim2))
    B0 = BlockOperator(H1, H2, np.zeros((dim1, dim2)))
    V = rng.normal(size=(dim1, dim2))
    V *= coupling * B0.gap / 8.0 / op_norm(V)
    return BlockOperator(H1, H2, V)


def suite_blockdecomp(samples: int, seed: int) -> SuiteReport:
    count = max(1, samples // 20)
    rep = SuiteReport("blockdecomp", seed, count)
    for i in range(count):
        rng = make_rng(seed, "blockdecomp", i)
        B = random_block_operator(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)),
                                  float(rng.uniform(0.05, 0.95)))
        H = B.HV

        def ctx():
            return {"sample": i, "H1": B.H1.entries, "H2": B.H2.entries, "V": B.V}

        P1 = riesz_projection(B)
        P2 = riesz_projection(H, ContourSpec.around(np.linalg.eigvalsh(B.H2.entries), 0.5 * B.gap))
        rep.check_residual("idempotent", op_norm(P1 @ P1 - P1), 1e-9, ctx)
        rep.check_residual("commutes", op_norm(P1 @ H - H @ P1), 1e-9, ctx)
        rep.check_residual("complementary", op_norm(P1 + P2 - np.eye(H.shape[0])), 1e-9, ctx)
        Q1, Q2 = graph_operators(B, P1)
        rep.check_residual("graph_range", op_norm(P1 - graph_projector(Q1)), 1e-8, ctx)
        rep.check_residual("q2_is_minus_q1t", op_norm(Q2 + Q1.T), 1e-8, ctx)
        bd = block_diagonalize(B, Q1, Q2)
        rep.check_residual("intertwining", bd.intertwining_residual, 1e-8, ctx)
        rep.check_residual("offdiag", bd.offdiag_residual, 1e-8, ctx)
        ev = np.linalg.eigvalsh(H)
        rep.check_residual("eigenvalues_preserved", float(np.max(np.abs(bd.eigenvalues() - ev))),
                  1e-9 * max(1.0, float(np.max(np.abs(ev)))), ctx)
        dev, envelope = projection_deviation(B, P1)
        rep.check("deviation_envelope", dev, envelope, ctx, soft=True)
    return rep


def run_suite(suite: str, samples: int, seed: int, delta: Optional[RealSym] = None) -> list[SuiteReport]:
    """Run one suite, or every suite for 'all'."""
    if samples < 1:
        raise InvalidParameter(f"samples must be >= 1, got {samples}")
    names = SUITES if suite == "all" else (suite,)
    reports = []
    for name in names:
        logger.info("verify: suite %s, %d samples, seed %d", name, samples, seed)
        if name == "siegel":
            reports.append(suite_siegel(samples, seed))
        elif name == "lemma25":
            reports.append(suite_lemma25(samples, seed, delta))
        elif name == "appendixB":
            reports.append(suite_appendix_b(samples, seed))
        elif name == "oracle":
            reports.append(suite_oracle(samples, seed))
        elif name == "blockdecomp":
            reports.append(suite_blockdecomp(samples, seed))
        else:
            raise InvalidParameter(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    return reports
