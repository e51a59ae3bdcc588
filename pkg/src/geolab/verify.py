"""Closed-curve model, distance-oracle contract, and the 1/k-minimality verifier.

Every surface backend (doubled polygon, tube surface, ellipsoid, sphere)
exposes distances through a :class:`DistanceOracle` and represents closed
curves as :class:`ClosedCurve`.  The verifier below checks the defining
property of a 1/k-geodesic, namely that points a fraction 1/k of the total
length apart along the curve are at exactly that distance in the surface:

    d(c(t), c(t + 2*pi/k)) == length / k   for all t.

Curves are parameterized at constant speed by a circle of length 2*pi and
stored as breakpoint polylines in surface-intrinsic coordinates; backends
supply segment interpolation, so a single verifier serves all of them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


class CurveError(ValueError):
    """Raised when a ClosedCurve violates its construction invariants."""


class OracleError(RuntimeError):
    """Raised when a distance backend fails on a query.

    Carries the curve parameter of the offending sample when known.
    """

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class ToleranceConfig:
    """Verification thresholds and sampling controls.

    pass_tol / fail_gap default to oracle-error-scaled values resolved at
    verification time (see :func:`resolve_tolerances`): an exact oracle gets
    pass_tol 1e-9, a noisy oracle 5x its declared error; fail_gap always
    sits strictly above pass_tol so the INCONCLUSIVE band is well defined.
    """

    pass_tol: Optional[float] = None
    fail_gap: Optional[float] = None
    sample_count: int = 720
    rng_seed: int = 0
    band_samples: int = 9  # members sampled per closed-geodesic family

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.band_samples < 1 or self.band_samples % 2 == 0:
            raise ValueError("band_samples must be a positive odd integer")


def resolve_tolerances(cfg: ToleranceConfig, oracle_err: float) -> tuple[float, float]:
    """Effective (pass_tol, fail_gap) for an oracle with declared error.

    Defaults: pass_tol = 1e-9 for exact oracles else 5*err, and
    fail_gap = 10*err + 1e-9 bumped to 2*pass_tol so that
    0 < pass_tol < fail_gap always holds.
    """
    pass_tol = cfg.pass_tol
    if pass_tol is None:
        pass_tol = 1e-9 if oracle_err == 0.0 else 5.0 * oracle_err
    fail_gap = cfg.fail_gap
    if fail_gap is None:
        fail_gap = max(10.0 * oracle_err + 1e-9, 2.0 * pass_tol)
    if not (0.0 < pass_tol < fail_gap):
        raise ValueError(f"need 0 < pass_tol < fail_gap, got {pass_tol}, {fail_gap}")
    return pass_tol, fail_gap


@dataclass
class DistanceOracle:
    """Callable distance contract d(p, q) with a declared error bound.

    err == 0 marks an exact backend.  Implementations must satisfy, on all
    tested inputs, d(p,p)=0, |d(p,q)-d(q,p)| <= 2*err and the triangle
    inequality up to a 3*err defect; :func:`metric_axiom_check` probes this.
    """

    surface_id: str
    err: float
    fn: Callable[[Any, Any], float]
    batch_fn: Optional[Callable[[Sequence[tuple]], np.ndarray]] = None

    def distance(self, p, q) -> float:
        return float(self.fn(p, q))

    def distance_many(self, pairs: Sequence[tuple]) -> np.ndarray:
        if self.batch_fn is not None:
            out = np.asarray(self.batch_fn(pairs), dtype=float)
        else:
            out = np.array([self.fn(p, q) for p, q in pairs], dtype=float)
        if out.shape != (len(pairs),):
            raise OracleError("batch distance returned wrong shape")
        return out


class ClosedCurve:
    """Constant-speed closed curve with period 2*pi over a surface backend.

    Parameters
    ----------
    surface_id : identifier shared with the distance oracle of the backend.
    total_length : curve length in surface units.
    ts : strictly increasing breakpoint parameters, ts[0] == 0, all < 2*pi.
    points : breakpoint point handles (backend specific).
    segment_interp : callable (i, frac) -> point at `frac` in (0,1) along
        segment i, where segment i joins points[i] to points[(i+1) % m].
    segment_length_fn : callable (i) -> intrinsic length of segment i.
    evaluator : optional exact map t -> point; overrides polyline
        interpolation when present (used by analytic backends).
    cs_tol : relative tolerance for the constant-speed invariant.
    """

    def __init__(self, surface_id: str, total_length: float,
                 ts: Sequence[float], points: Sequence[Any],
                 segment_interp: Callable[[int, float], Any],
                 segment_length_fn: Callable[[int], float],
                 evaluator: Optional[Callable[[float], Any]] = None,
                 cs_tol: float = 1e-9,
                 meta: Optional[dict] = None):
        self.surface_id = surface_id
        self.total_length = float(total_length)
        self.ts = np.asarray(ts, dtype=float)
        self.points = list(points)
        self._interp = segment_interp
        self._seglen = segment_length_fn
        self.evaluator = evaluator
        self.cs_tol = float(cs_tol)
        self.meta = dict(meta) if meta else {}
        self._validate()

    # -- invariants ------------------------------------------------------
    def _validate(self):
        m = len(self.points)
        if m != len(self.ts):
            raise CurveError("breakpoint parameter/point count mismatch")
        if m < 2:
            raise CurveError("closed curve needs at least 2 breakpoints")
        if self.total_length <= 0:
            raise CurveError("total_length must be positive")
        if abs(self.ts[0]) > 1e-15:
            raise CurveError("first breakpoint parameter must be 0")
        if np.any(np.diff(self.ts) <= 0) or self.ts[-1] >= TWO_PI:
            raise CurveError("breakpoint parameters must be strictly "
                             "increasing within [0, 2*pi)")
        speed = self.total_length / TWO_PI
        for i in range(m):
            dt = self._segment_dt(i)
            seg = self._seglen(i)
            if abs(seg / dt - speed) > self.cs_tol * speed:
                raise CurveError(
                    f"segment {i} violates constant speed: "
                    f"{seg / dt:.12g} vs {speed:.12g}")

    def _segment_dt(self, i: int) -> float:
        m = len(self.points)
        if i < m - 1:
            return self.ts[i + 1] - self.ts[i]
        return TWO_PI - self.ts[-1]

    def segment_length(self, i: int) -> float:
        return float(self._seglen(i))

    @property
    def n_segments(self) -> int:
        return len(self.points)

    # -- evaluation ------------------------------------------------------
    def point_at(self, t: float):
        t = float(t) % TWO_PI
        if self.evaluator is not None:
            return self.evaluator(t)
        i = int(np.searchsorted(self.ts, t, side="right") - 1)
        dt = self._segment_dt(i)
        frac = (t - self.ts[i]) / dt
        if frac <= 0.0:
            return self.points[i]
        if frac >= 1.0:
            return self.points[(i + 1) % len(self.points)]
        return self._interp(i, frac)

    def to_dict(self) -> dict:
        d = {"surface": self.meta.get("surface", self.surface_id),
             "breakpoints": self.meta.get("breakpoints",
                                          [{"t": float(t)} for t in self.ts]),
             "length": self.total_length}
        return d


def curve_length(curve: ClosedCurve) -> float:
    """Sum of segment lengths; agrees with total_length to 1e-12 relative."""
    total = sum(curve.segment_length(i) for i in range(curve.n_segments))
    if abs(total - curve.total_length) > 1e-12 * max(1.0, curve.total_length):
        raise CurveError(
            f"segment lengths sum to {total!r}, declared {curve.total_length!r}")
    return total


@dataclass
class VerificationReport:
    """Outcome of a 1/k-minimality check.

    max_deviation is the largest |d(c(t), c(t + 2*pi/k)) - L/k| over the
    sample grid; verdict is PASS when it stays at or below pass_tol, FAIL
    when it reaches fail_gap, and INCONCLUSIVE in between (a band that is
    only meaningfully wide for oracles with declared error).
    """

    k: int
    sample_count: int
    max_deviation: float
    worst_t: float
    verdict: str
    pass_tol: float = 0.0
    fail_gap: float = 0.0
    oracle_err: float = 0.0
    deviations: Optional[np.ndarray] = field(default=None, repr=False)
    sample_ts: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"k": self.k,
                "sample_count": self.sample_count,
                "max_deviation": self.max_deviation,
                "worst_t": self.worst_t,
                "verdict": self.verdict}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def _sample_grid(curve: ClosedCurve, sample_count: int) -> np.ndarray:
    ts = np.arange(sample_count, dtype=float) * (TWO_PI / sample_count)
    ts = np.concatenate([ts, curve.ts])
    ts = np.unique(ts)
    return ts


def verify_one_over_k(curve: ClosedCurve, oracle: DistanceOracle, k: int,
                      cfg: ToleranceConfig = ToleranceConfig()) -> VerificationReport:
    """Check whether `curve` minimizes on all subintervals of length L/k.

    Samples d(c(t), c(t + 2*pi/k)) on a uniform grid of cfg.sample_count
    parameters plus every breakpoint parameter; deterministic for fixed cfg.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if curve.surface_id != oracle.surface_id:
        raise ValueError(f"curve surface {curve.surface_id!r} does not match "
                         f"oracle surface {oracle.surface_id!r}")
    pass_tol, fail_gap = resolve_tolerances(cfg, oracle.err)
    ts = _sample_grid(curve, cfg.sample_count)
    shift = TWO_PI / k
    target = curve.total_length / k

    pairs = []
    for t in ts:
        try:
            pairs.append((curve.point_at(t), curve.point_at(t + shift)))
        except Exception as exc:  # surface lookup failure at this parameter
            raise OracleError(f"curve evaluation failed at t={t}: {exc}", t=t)
    try:
        ds = oracle.distance_many(pairs)
    except OracleError:
        raise
    except Exception as exc:
        raise OracleError(f"oracle failed on sample batch: {exc}")
    if np.any(~np.isfinite(ds)):
        bad = int(np.argmax(~np.isfinite(ds)))
        raise OracleError(f"oracle returned non-finite distance", t=float(ts[bad]))

    dev = np.abs(ds - target)
    worst = int(np.argmax(dev))
    max_dev = float(dev[worst])
    if max_dev <= pass_tol:
        verdict = PASS
    elif max_dev >= fail_gap:
        verdict = FAIL
    else:
        verdict = INCONCLUSIVE
    return VerificationReport(k=k, sample_count=len(ts), max_deviation=max_dev,
                              worst_t=float(ts[worst]), verdict=verdict,
                              pass_tol=pass_tol, fail_gap=fail_gap,
                              oracle_err=oracle.err,
                              deviations=dev, sample_ts=ts)


@dataclass
class MetricAxiomReport:
    identity_worst: float
    symmetry_worst: float
    triangle_worst: float
    identity_tol: float
    symmetry_tol: float
    triangle_tol: float

    @property
    def ok(self) -> bool:
        return (self.identity_worst <= self.identity_tol
                and self.symmetry_worst <= self.symmetry_tol
                and self.triangle_worst <= self.triangle_tol)

    def to_dict(self) -> dict:
        return {"identity_worst": self.identity_worst,
                "symmetry_worst": self.symmetry_worst,
                "triangle_worst": self.triangle_worst,
                "ok": self.ok}


def metric_axiom_check(oracle: DistanceOracle, points: Sequence[Any],
                       cfg: ToleranceConfig = ToleranceConfig()) -> MetricAxiomReport:
    """Probe identity, symmetry and triangle inequality on all pairs/triples.

    Violations are measured against the oracle's declared error: symmetry
    defects up to 2*err and triangle defects up to 3*err are tolerated.
    """
    n = len(points)
    if n < 3:
        raise ValueError("need at least 3 points")
    pass_tol, _ = resolve_tolerances(cfg, oracle.err)

    pairs = [(points[i], points[j]) for i in range(n) for j in range(n)]
    D = oracle.distance_many(pairs).reshape(n, n)

    identity_worst = float(np.max(np.abs(np.diag(D))))
    symmetry_worst = float(np.max(np.abs(D - D.T)))
    # defect of d(i,k) <= d(i,j) + d(j,k), over all ordered triples
    defect = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    triangle_worst = float(np.max(defect))
    return MetricAxiomReport(
        identity_worst=identity_worst,
        symmetry_worst=symmetry_worst,
        triangle_worst=triangle_worst,
        identity_tol=pass_tol,
        symmetry_tol=2.0 * oracle.err + pass_tol,
        triangle_tol=3.0 * oracle.err + pass_tol,
    )


def diameter_cutoff(L: float, diam: float, pass_tol: float = 1e-9) -> bool:
    """True iff a length-L curve survives the L <= 2*diam pruning bound."""
    if L <= 0 or diam <= 0:
        raise ValueError("L and diam must be positive")
    return L <= 2.0 * diam + pass_tol
