import math

import numpy as np
import pytest

from geolab.billiards import (EnumConfig, SearchBudgetExceeded,
                              _canonical_cyclic, brute_force_families,
                              classify_half_geodesics,
                              enumerate_closed_geodesics, solve_family)
from geolab.polygon import build_ngon, exact_oracle, meridians
from geolab.verify import FAIL, PASS, ToleranceConfig, verify_one_over_k

SQ = build_ngon(4, 1.0)
TRI = build_ngon(3, 1.0)
HEX = build_ngon(6, 1.0)


def _curves_coincide(c1, c2, tol=1e-9):
    """Breakpoint-wise agreement of two closed curves (chart + face)."""
    for t, pt in zip(c1.ts, c1.points):
        other = c2.point_at(t)
        if np.linalg.norm(pt.chart - other.chart) > tol:
            return False
        if pt.kind == "interior" and other.kind == "interior" \
                and pt.face != other.face:
            return False
    return True


# -- family closure ---------------------------------------------------------

def test_meridian_band_square():
    fam = solve_family(SQ, (0, 2))
    assert fam is not None
    assert fam.length == pytest.approx(2.0, abs=1e-12)
    assert fam.u_lo == pytest.approx(0.0, abs=1e-6)
    assert fam.u_hi == pytest.approx(1.0, abs=1e-6)
    assert fam.is_meridian_band(SQ)


def test_meridian_band_center_is_meridian_curve():
    fam = solve_family(SQ, (0, 2))
    member = fam.member(SQ, 0.5)
    assert member.tag == "MERIDIAN"
    assert _curves_coincide(member.curve, meridians(SQ)[0].curve)


def test_diamond_family():
    fam = solve_family(SQ, (0, 1, 2, 3))
    assert fam is not None
    assert fam.length == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    # representative crosses all four edge midpoints
    for e, s, _ in fam.crossings(fam.u_center):
        assert s == pytest.approx(0.5, abs=1e-9)


def test_fagnano_family():
    fam = solve_family(TRI, (0, 1, 2, 0, 1, 2))
    assert fam is not None
    assert fam.length == pytest.approx(3.0, abs=1e-12)
    for e, s, _ in fam.crossings(0.5):
        assert s == pytest.approx(0.5, abs=1e-9)   # medial triangle, doubled


def test_rotation_blocked_words_fail():
    assert solve_family(SQ, (0, 1)) is None        # non-parallel pair
    assert solve_family(SQ, (0, 1, 0, 1)) is None  # vertex churn
    assert solve_family(SQ, (0, 1, 3, 2)) is None  # empty corridor


def test_reflection_law_on_found_families():
    # every family member projects to a billiard path: chart directions
    # reflect across each crossed edge
    for ngon, word in [(SQ, (0, 1, 2, 3)), (TRI, (0, 2, 1, 2)),
                       (TRI, (0, 1, 2, 0, 1, 2))]:
        fam = solve_family(ngon, word)
        assert fam is not None
        cross = fam.crossings(fam.u_center)
        pts = [ngon.edge_chart(e, s) for e, s, _ in cross]
        m = len(pts)
        for i in range(m):
            prev = pts[i] - pts[i - 1]
            nxt = pts[(i + 1) % m] - pts[i]
            nrm = ngon.edge_normals[cross[i][0]]
            refl = nxt - 2 * np.dot(nxt, nrm) * nrm
            cosang = np.dot(prev, refl) / (np.linalg.norm(prev)
                                           * np.linalg.norm(refl))
            assert cosang == pytest.approx(1.0, abs=1e-12)


# -- enumeration ------------------------------------------------------------

def test_enumeration_square():
    res = enumerate_closed_geodesics(SQ, 3.0)
    words = sorted(g.word for g in res)
    assert words == [(0, 1, 2, 3), (0, 2), (1, 3)]
    lengths = sorted(round(g.length, 9) for g in res)
    assert lengths == [2.0, 2.0, pytest.approx(2 * math.sqrt(2))]
    assert res.certificate.complete
    reps = [g for g in res if g.is_representative]
    assert len(reps) == 2  # meridian class + diamond class


def test_enumeration_contains_fagnano():
    res = enumerate_closed_geodesics(TRI, 3.5)
    assert any(g.length == pytest.approx(3.0) and g.period == 6 for g in res)


def test_enumeration_below_shortest_band_is_empty():
    assert len(enumerate_closed_geodesics(SQ, 1.5)) == 0
    assert len(enumerate_closed_geodesics(TRI, 1.5)) == 0


def test_enumeration_matches_brute_force_square():
    res = enumerate_closed_geodesics(SQ, 3.0)
    pruned = {_canonical_cyclic(g.word) for g in res}
    brute = {k for k, fam in brute_force_families(SQ, 8, L_max=3.0).items()}
    assert pruned == brute


def test_enumeration_matches_brute_force_triangle():
    res = enumerate_closed_geodesics(TRI, 3.5)
    pruned = {_canonical_cyclic(g.word) for g in res}
    brute = {k for k in brute_force_families(TRI, 6, L_max=3.5)}
    assert pruned == brute


def test_enumeration_matches_brute_force_hexagon():
    res = enumerate_closed_geodesics(HEX, 4.0)
    pruned = {_canonical_cyclic(g.word) for g in res}
    brute = {k for k in brute_force_families(HEX, 6, L_max=4.0)}
    assert pruned == brute


def test_budget_exhaustion_is_loud():
    with pytest.raises(SearchBudgetExceeded):
        enumerate_closed_geodesics(SQ, 3.0, EnumConfig(max_nodes=5))


def test_depth_cap_marks_incomplete():
    res = enumerate_closed_geodesics(SQ, 3.0, EnumConfig(max_depth=3))
    assert not res.certificate.complete
    assert res.certificate.depth_cap_hits > 0


# -- classification ---------------------------------------------------------

@pytest.mark.parametrize("n,count", [(3, 0), (4, 2), (5, 0), (6, 3)])
def test_half_geodesic_counts(n, count):
    res = classify_half_geodesics(build_ngon(n, 1.0))
    assert res.count == count
    assert res.certificate.complete
    for g in res.half_geodesics:
        assert g.verification is not None
        assert g.verification.verdict == PASS
        assert g.verification.max_deviation <= 1e-9
        assert g.tag == "MERIDIAN"


def test_classified_coincide_with_meridians():
    res = classify_half_geodesics(SQ)
    ms = meridians(SQ)
    for g in res.half_geodesics:
        assert any(_curves_coincide(g.curve, m.curve) for m in ms)


def test_off_center_member_fails_verification():
    fam = solve_family(SQ, (0, 2))
    off = fam.member(SQ, 0.3)
    rep = verify_one_over_k(off.curve, exact_oracle(SQ), 2)
    assert rep.verdict == FAIL
    # the worst pair is the halfway pair, at gap 2 * |offset from center|
    assert rep.max_deviation == pytest.approx(0.4, abs=1e-9)


def test_bowtie_family_on_triangle_fails_verification():
    fam = solve_family(TRI, (0, 2, 1, 2))
    assert fam is not None
    assert fam.length == pytest.approx(math.sqrt(3), abs=1e-12)
    rep = verify_one_over_k(fam.member(TRI, fam.u_center).curve,
                            exact_oracle(TRI), 2)
    assert rep.verdict == FAIL


def test_diamond_members_fail_verification():
    fam = solve_family(SQ, (0, 1, 2, 3))
    for u in (0.2, 0.5, 0.8):
        rep = verify_one_over_k(fam.member(SQ, u).curve, exact_oracle(SQ), 2)
        assert rep.verdict == FAIL
