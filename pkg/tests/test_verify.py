import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolab.sphere import great_circle, sphere_oracle
from geolab.verify import (FAIL, INCONCLUSIVE, PASS, TWO_PI, ClosedCurve,
                           CurveError, DistanceOracle, ToleranceConfig,
                           curve_length, diameter_cutoff, metric_axiom_check,
                           resolve_tolerances, verify_one_over_k)


def test_great_circle_length():
    gc = great_circle()
    assert curve_length(gc) == pytest.approx(2.0 * math.pi, abs=1e-12)


def test_great_circle_half_geodesic():
    rep = verify_one_over_k(great_circle(), sphere_oracle(), 2)
    assert rep.verdict == PASS
    assert rep.max_deviation <= 1e-12


@pytest.mark.parametrize("k", [2, 3, 4, 7])
def test_great_circle_all_k(k):
    rep = verify_one_over_k(great_circle(), sphere_oracle(), k)
    assert rep.verdict == PASS


def test_k_below_two_rejected():
    with pytest.raises(ValueError):
        verify_one_over_k(great_circle(), sphere_oracle(), 1)


def test_surface_mismatch_rejected():
    with pytest.raises(ValueError):
        verify_one_over_k(great_circle(radius=2.0), sphere_oracle(1.0), 2)


def test_degenerate_single_breakpoint_rejected():
    with pytest.raises(CurveError):
        ClosedCurve("s", 1.0, [0.0], [np.zeros(3)],
                    segment_interp=lambda i, f: np.zeros(3),
                    segment_length_fn=lambda i: 1.0)


def test_breakpoint_order_enforced():
    gc = great_circle()
    with pytest.raises(CurveError):
        ClosedCurve(gc.surface_id, gc.total_length, [0.0, 3.0, 1.0],
                    [gc.point_at(t) for t in (0.0, 3.0, 1.0)],
                    segment_interp=lambda i, f: None,
                    segment_length_fn=lambda i: 1.0)


def test_constant_speed_enforced():
    # badly spaced parameters break the speed invariant
    ev = great_circle().evaluator
    with pytest.raises(CurveError):
        ClosedCurve("sphere:1", 2 * math.pi, [0.0, 0.3, math.pi],
                    [ev(0.0), ev(0.3), ev(math.pi)],
                    segment_interp=lambda i, f: None,
                    segment_length_fn=lambda i: 1.0)


def test_resolve_tolerances_exact_and_noisy():
    cfg = ToleranceConfig()
    p, f = resolve_tolerances(cfg, 0.0)
    assert p == pytest.approx(1e-9) and f == pytest.approx(2e-9)
    p, f = resolve_tolerances(cfg, 0.01)
    assert p == pytest.approx(0.05) and f == pytest.approx(0.1 + 1e-9)
    with pytest.raises(ValueError):
        resolve_tolerances(ToleranceConfig(pass_tol=1.0, fail_gap=0.5), 0.0)


def _biased_sphere_oracle(bias):
    base = sphere_oracle()
    return DistanceOracle(surface_id=base.surface_id, err=0.0,
                          fn=lambda p, q: base.fn(p, q) + bias)


@pytest.mark.parametrize("bias,verdict", [
    (0.0, PASS), (1.5e-9, INCONCLUSIVE), (5e-9, FAIL), (0.3, FAIL)])
def test_three_way_verdict(bias, verdict):
    rep = verify_one_over_k(great_circle(), _biased_sphere_oracle(bias), 2)
    assert rep.verdict == verdict


def test_reversal_invariance():
    fwd = great_circle(axis=(0, 0, 1))
    rev = great_circle(axis=(0, 0, -1))  # same circle, opposite orientation
    r1 = verify_one_over_k(fwd, sphere_oracle(), 2)
    r2 = verify_one_over_k(rev, sphere_oracle(), 2)
    assert r1.max_deviation == pytest.approx(r2.max_deviation, abs=1e-15)


def test_rotation_invariance_with_aligned_grid():
    # shifting parameterization by a whole number of grid steps leaves the
    # sampled pair set, and hence the verdict, unchanged
    gc = great_circle()
    shift = TWO_PI * (180 / 720)

    def ev(t, base=gc.evaluator):
        return base(t + shift)

    shifted = ClosedCurve(gc.surface_id, gc.total_length, gc.ts,
                          [ev(t) for t in gc.ts],
                          segment_interp=lambda i, f: None,
                          segment_length_fn=gc.segment_length,
                          evaluator=ev)
    r1 = verify_one_over_k(gc, sphere_oracle(), 2)
    r2 = verify_one_over_k(shifted, sphere_oracle(), 2)
    assert r1.verdict == r2.verdict
    assert r1.max_deviation == pytest.approx(r2.max_deviation, abs=1e-14)


def test_report_determinism():
    r1 = verify_one_over_k(great_circle(), sphere_oracle(), 3)
    r2 = verify_one_over_k(great_circle(), sphere_oracle(), 3)
    assert r1.to_json() == r2.to_json()
    assert r1.max_deviation == r2.max_deviation and r1.worst_t == r2.worst_t


def test_report_serialization_fields():
    rep = verify_one_over_k(great_circle(), sphere_oracle(), 2)
    d = rep.to_dict()
    assert set(d) == {"k", "sample_count", "max_deviation", "worst_t", "verdict"}


def test_metric_axioms_on_sphere():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(12, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    rep = metric_axiom_check(sphere_oracle(), list(pts))
    assert rep.ok
    assert rep.identity_worst <= 1e-12
    assert rep.symmetry_worst <= 1e-12


def test_metric_axioms_repeated_point():
    p = np.array([1.0, 0.0, 0.0])
    rep = metric_axiom_check(sphere_oracle(), [p, p, p])
    assert rep.ok and rep.identity_worst == 0.0


def test_metric_axioms_need_three_points():
    p = np.array([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        metric_axiom_check(sphere_oracle(), [p, p])


def test_diameter_cutoff():
    assert diameter_cutoff(2.0, 1.2)
    assert not diameter_cutoff(10.0, 1.0)
    d = 0.7318
    assert diameter_cutoff(2 * d, d)  # boundary case
    with pytest.raises(ValueError):
        diameter_cutoff(-1.0, 1.0)
    with pytest.raises(ValueError):
        diameter_cutoff(1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.0, max_value=20.0, allow_nan=False))
def test_point_at_wraps(t):
    gc = great_circle()
    a, b = gc.point_at(t), gc.point_at(t + TWO_PI)
    assert np.linalg.norm(np.asarray(a) - np.asarray(b)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=9),
       st.integers(min_value=10, max_value=300))
def test_verdict_stable_under_sampling(k, samples):
    cfg = ToleranceConfig(sample_count=samples)
    rep = verify_one_over_k(great_circle(), sphere_oracle(), k, cfg)
    assert rep.verdict == PASS
    assert rep.sample_count >= samples
