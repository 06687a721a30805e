"""Tests for frame extraction from rescalable families."""

import math
from fractions import Fraction

import numpy as np
import pytest

from framex import (
    VectorFamily,
    canonical_dual,
    equivalence_a_to_d,
    equivalence_b_to_a,
    equivalence_c_check,
    extract,
    frame_bounds,
    paired_rescaling_diagnostic,
    rank_one,
)
from framex.errors import NotAFrameError, PreconditionError
from framex.extraction import ENVELOPE_SLACK, _snap_weight, plan

from helpers import rescalable_fixture

MERCEDES = np.array([[0.0, 1.0], [-math.sqrt(3) / 2, -0.5], [math.sqrt(3) / 2, -0.5]])


def complex_integer_weight_family(rng, dim, extras=3, kmax=4):
    vecs = np.concatenate(
        [np.eye(dim, dtype=complex), rng.normal(size=(extras, dim)) + 1j * rng.normal(size=(extras, dim))]
    )
    norms = np.linalg.norm(vecs, axis=1)
    ks = rng.integers(1, kmax + 1, size=len(vecs))
    return VectorFamily(vecs, scalars=np.sqrt(ks) / norms)


def test_snap_weight():
    assert _snap_weight(4.0 - 4e-16, beta=3) == Fraction(4)
    assert _snap_weight(1.0, beta=2) == Fraction(1)
    # off-grid values pass through as the exact binary float
    assert _snap_weight(0.3, beta=3) == Fraction(0.3)
    assert _snap_weight(1e-20, beta=5) == Fraction(1e-20)


def test_plan_orthonormal_basis():
    layout = plan(VectorFamily(np.eye(4)), 1.0, 1.0)
    assert layout.blocks == ((0, 1), (1, 2), (2, 3), (3, 4), (4, 4))
    assert layout.beta == 2
    assert layout.epsilon == pytest.approx(1.0 / 3.0)
    assert layout.trace_cap == 1.0
    assert layout.thresholds[0] == 0.0
    for j, cap in enumerate(layout.thresholds[1:], start=1):
        assert cap == pytest.approx(layout.epsilon**2 / (36 * 4**j))
    assert all(g <= c * (1 + 1e-9) + 1e-12 for g, c in zip(layout.gammas, layout.thresholds))
    assert layout.identity_defect <= 1e-9
    assert len(layout.subspaces) == len(layout.blocks) + 1


def test_plan_rejects_bad_bounds():
    fam = VectorFamily(np.eye(3))
    with pytest.raises(NotAFrameError):
        plan(fam, 0.0, 1.0)
    with pytest.raises(NotAFrameError):
        plan(fam, 2.0, 1.0)


def test_extract_orthonormal_basis():
    res = extract(VectorFamily(np.eye(4)), seed=0)
    assert res.sigma.multiplicity == {0: 4, 1: 4, 2: 4, 3: 4}
    assert res.report.lower == pytest.approx(4.0)
    assert res.report.upper == pytest.approx(4.0)
    assert res.mult_bound_L == pytest.approx(9.0)
    assert res.mult_ok
    assert res.total_deviation <= 1e-12
    assert res.envelope == pytest.approx((4.0 / 3.0, 12.0))
    assert res.plan.identity_defect <= 1e-12


def test_extract_rescalable_family(rng):
    fam = rescalable_fixture(rng, 5)
    res = extract(fam, seed=3)
    rep_in = frame_bounds(fam, use_scalars=True)

    out = res.report
    assert out.is_frame and out.lower > 0
    scale = 2.0**res.plan.beta
    assert out.lower >= scale * rep_in.lower / 3.0 * (1 - ENVELOPE_SLACK)
    assert out.upper <= 3.0 * scale * rep_in.upper * (1 + ENVELOPE_SLACK)

    # recompute the stacked deviation from sigma alone
    norms = fam.norms()
    weights = np.abs(fam.scalars) ** 2 * norms**2
    units = fam.vectors / norms[:, None]
    b = rep_in.upper
    target = sum(w * rank_one(u / math.sqrt(b)).matrix for w, u in zip(weights, units))
    achieved = sum(
        (times / scale) * rank_one(units[n] / math.sqrt(b)).matrix
        for n, times in res.sigma.multiplicity.items()
    )
    dev = np.max(np.abs(np.linalg.eigvalsh(achieved - target)))
    assert dev == pytest.approx(res.total_deviation, abs=1e-12)
    assert dev <= 2.0 * res.plan.epsilon + 1e-8

    # multiplicity bound, checked in exact rationals
    c = res.plan.constant
    bound = max(144.0 * c * c * b / rep_in.lower**2, 64.0 * c**4 / (b * b))
    assert res.mult_bound_L == pytest.approx(bound)
    for n, times in res.sigma.multiplicity.items():
        assert Fraction(times) <= Fraction(bound) * Fraction(float(weights[n]))
    assert all(cert is None or cert.sandwich_ok for cert in res.certificates)


def test_extract_complex_family(rng):
    fam = complex_integer_weight_family(rng, 4)
    res = extract(fam, seed=5)
    assert res.report.is_frame
    assert res.normalized.field == "complex"
    assert res.total_deviation <= 2.0 * res.plan.epsilon + 1e-8
    assert res.mult_ok


def test_extract_is_deterministic(rng):
    fam = rescalable_fixture(rng, 4)
    first = extract(fam, seed=9)
    second = extract(fam, seed=9)
    assert first.sigma.multiplicity == second.sigma.multiplicity
    assert first.report.lower == second.report.lower


def test_extract_rejects_non_spanning():
    with pytest.raises(NotAFrameError):
        extract(VectorFamily(np.eye(3)[:2]))


def test_equivalence_b_to_a_plain():
    out = equivalence_b_to_a(VectorFamily([[2.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(out.vectors, [[0.5, 0.0], [0.0, 1.0]])


def test_equivalence_b_to_a_with_scalars():
    # scalars fold into the coefficient duals so reconstruction uses x_n itself
    out = equivalence_b_to_a(VectorFamily(np.eye(2)), scalars=[2.0, 1.0])
    assert np.allclose(out.vectors, np.eye(2))


def test_equivalence_c_check():
    fam = VectorFamily(np.eye(2))
    duals = canonical_dual(fam)
    assert equivalence_c_check(fam, duals)
    assert not equivalence_c_check(fam, VectorFamily([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(Exception):
        equivalence_c_check(fam, VectorFamily(np.eye(3)))


def test_equivalence_a_to_d_collinear_classes():
    fam = VectorFamily([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    sel = equivalence_a_to_d(fam, seed=0)
    assert sel.representatives == (0, 2)
    assert sel.classes == ((0, 1, 3), (2,))
    assert sel.class_weights == (3.0, 1.0)
    assert sel.indices == (0, 2)
    assert sel.extraction.report.is_frame
    # selected rays stay pairwise non-collinear by construction
    u = fam.vectors[list(sel.indices)]
    gram = np.abs(u @ u.T)
    assert np.all(gram - np.eye(len(u)) < 1.0 - 1e-8)


def test_equivalence_a_to_d_rejects_non_spanning():
    with pytest.raises(NotAFrameError):
        equivalence_a_to_d(VectorFamily([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(NotAFrameError):
        equivalence_a_to_d(VectorFamily([[0.0, 0.0]]))


def test_paired_rescaling_diagnostic():
    diag = paired_rescaling_diagnostic(VectorFamily(MERCEDES))
    assert diag["indices"] == (0, 1, 2)
    assert diag["bessel_bound"] == pytest.approx(2.0 / 3.0)
    assert diag["observed_lower"] == pytest.approx(2.0 / 3.0)
    assert diag["lower_bound_claimed"] is False

    two = paired_rescaling_diagnostic(VectorFamily(MERCEDES), indices=[0, 1])
    assert two["bessel_bound"] == pytest.approx(2.0 / 3.0)
    assert two["observed_lower"] == pytest.approx(2.0 / 9.0)


def test_paired_rescaling_diagnostic_guards():
    fam = VectorFamily(MERCEDES)
    with pytest.raises(PreconditionError):
        paired_rescaling_diagnostic(fam, indices=[5])
    with pytest.raises(PreconditionError):
        paired_rescaling_diagnostic(fam, indices=[])
