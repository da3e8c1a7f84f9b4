"""Post-processing: line reduction, hysteresis center lines, stiffness-map fitting, velocity metrics, schedule search."""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .controller import FitCoefficients
from .errors import DataError, DomainError, DyracError, FitError, OptimizationError
from .simulator import ScheduleEntry, simulate


def _as_points(line):
    pts = np.asarray(line, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("a polyline is a sequence of (x, y) points")
    if len(pts) < 2:
        raise DomainError("a polyline needs at least two points")
    if not np.all(np.isfinite(pts)):
        raise DomainError("polyline points must be finite")
    return pts


def point_segment_distance(p, a, b):
    """Distance from ``p`` to the segment ``a``-``b``."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    s = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.hypot(*(p - (a + s * ab))))


def douglas_peucker(line, tolerance):
    """Reduce a polyline, keeping every dropped point within ``tolerance`` of the result.

    Returns the kept points as an array; the first and last points always
    survive. A point is dropped only if its distance to the segment between
    the surrounding kept points is at most ``tolerance``.
    """
    if tolerance < 0:
        raise DomainError("tolerance must be non-negative")
    pts = _as_points(line)
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        a, b = pts[first], pts[last]
        dists = [point_segment_distance(pts[i], a, b) for i in range(first + 1, last)]
        i_max = int(np.argmax(dists))
        if dists[i_max] > tolerance:
            split = first + 1 + i_max
            keep[split] = True
            stack.append((first, split))
            stack.append((split, last))
    return pts[keep]


def hysteresis_centerline(loop, n_grid=200, max_reversal_fraction=0.05):
    """Center line of a closed up/down sweep.

    The loop is split at its minimum and maximum x into two branches, both
    are resampled on a common grid of ``n_grid + 1`` points spanning the
    overlapping x range, and the pointwise mean of y is returned.
    """
    pts = _as_points(loop)
    x, y = pts[:, 0], pts[:, 1]
    i_lo, i_hi = int(np.argmin(x)), int(np.argmax(x))
    a, b = sorted((i_lo, i_hi))
    inner = pts[a:b + 1]
    outer = np.concatenate([pts[b:], pts[:a + 1]])
    if len(inner) < 2 or len(outer) < 2:
        raise DataError("loop does not contain two branches")
    branches = []
    for br in (inner, outer):
        if br[0, 0] > br[-1, 0]:
            br = br[::-1]
        # a vertical run at an extreme x belongs to the other branch's endpoint
        while len(br) > 2 and br[0, 0] == br[1, 0]:
            br = br[1:]
        while len(br) > 2 and br[-1, 0] == br[-2, 0]:
            br = br[:-1]
        steps = np.diff(br[:, 0])
        reversals = np.count_nonzero(steps < 0)
        if reversals > max_reversal_fraction * len(steps):
            raise DataError(
                f"branch is not monotone in x ({reversals} reversals in {len(steps)} steps)"
            )
        # running maximum makes the branch usable by np.interp
        bx = np.maximum.accumulate(br[:, 0])
        branches.append((bx, br[:, 1]))
    lo = max(br[0][0] for br in branches)
    hi = min(br[0][-1] for br in branches)
    if not hi > lo:
        raise DataError("branches do not overlap in x")
    grid = np.linspace(lo, hi, n_grid + 1)
    ys = [np.interp(grid, bx, by) for bx, by in branches]
    return np.column_stack([grid, 0.5 * (ys[0] + ys[1])])


def loop_area(loop):
    """Absolute enclosed area of a closed polyline (shoelace formula)."""
    pts = _as_points(loop)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True)
class FitResult:
    coefficients: FitCoefficients
    residual: float


def fit_radius_stiffness(data, scale=1e-3):
    """Fit r = scale (p (ln k_e + q))**3 to ``(k_e, r)`` pairs.

    The cube root linearizes the model to (r/scale)**(1/3) = p ln k_e + p q,
    which is solved by ordinary least squares. ``residual`` is the RMS error
    in that transformed space.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise FitError("need at least three (k_e, r) pairs")
    k_e, r = arr[:, 0], arr[:, 1]
    if np.any(k_e <= 0) or np.any(r <= 0):
        raise FitError("stiffness and radius must be positive")
    A = np.column_stack([np.log(k_e), np.ones_like(k_e)])
    if np.linalg.matrix_rank(A) < 2:
        raise FitError("stiffness values must not all be equal")
    z = np.cbrt(r / scale)
    (slope, intercept), *_ = np.linalg.lstsq(A, z, rcond=None)
    if not slope > 0:
        raise FitError(f"fitted slope {slope:.4g} is not positive; the model would not be monotone")
    residual = float(np.sqrt(np.mean((A @ [slope, intercept] - z) ** 2)))
    return FitResult(FitCoefficients(p=float(slope), q=float(intercept / slope), scale=scale), residual)


def velocity_gain(trace, window=None):
    """Peak output speed over peak motor-1 speed inside ``window = (t0, t1)``."""
    t = trace["t"]
    if window is None:
        mask = np.ones_like(t, dtype=bool)
    else:
        t0, t1 = window
        if t0 > t1 or t1 < t[0] or t0 > t[-1]:
            raise DomainError(f"window {window} lies outside the trace")
        mask = (t >= t0) & (t <= t1)
    peak_in = float(np.max(np.abs(trace["phi1_dot"][mask])))
    if peak_in == 0.0:
        raise DataError("input peak velocity is zero; the gain is undefined")
    return float(np.max(np.abs(trace["eta_dot"][mask]))) / peak_in


def envelope_peaks(t, y):
    """Local maxima of |y| as arrays ``(t_peak, value)``."""
    a = np.abs(np.asarray(y, dtype=float))
    idx = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]))[0] + 1
    return np.asarray(t)[idx], a[idx]


def envelope_decay_rate(trace, t0, column="alpha", max_peaks=6, floor=1e-6):
    """Exponential decay rate [1/s] of the |column| envelope after ``t0``.

    Fits ln(peak) against time over up to ``max_peaks`` successive peaks of
    |column| that stay above ``floor`` times the first one.
    """
    t = trace["t"]
    mask = t >= t0
    tp, ap = envelope_peaks(t[mask], trace[column][mask])
    if len(ap) < 2:
        raise DataError("fewer than two envelope peaks after t0")
    keep = ap >= floor * ap[0]
    tp, ap = tp[keep][:max_peaks], ap[keep][:max_peaks]
    if len(ap) < 2:
        raise DataError("envelope decays below the noise floor within one peak")
    slope = np.polyfit(tp, np.log(ap), 1)[0]
    return float(-slope)


def oscillation_frequency(t, y):
    """Mean frequency from the upward zero crossings of ``y``."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
    if len(idx) < 2:
        raise DataError("need at least two upward zero crossings")
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return (len(tc) - 1) / (tc[-1] - tc[0])


@dataclass(frozen=True, order=True)
class ScheduleCandidate:
    """Hard-soft-hard stiffness schedule: start at ``r_high``, soften at ``t_soft``, stiffen at ``t_stiff``."""

    t_soft: float
    t_stiff: float
    r_low: float
    r_high: float

    def validate(self, scenario):
        p = scenario.design
        if not 0 <= self.t_soft < self.t_stiff <= scenario.duration:
            raise DomainError("need 0 <= t_soft < t_stiff <= duration")
        for r in (self.r_low, self.r_high):
            if not p.r_min <= r <= p.r_max:
                raise DomainError(f"radius {r!r} m outside the reachable band")

    def apply(self, scenario):
        """Scenario with this candidate's stiffness schedule; damping entries are kept."""
        self.validate(scenario)
        b_entries = {e.t: e.b_set for e in scenario.schedule if e.b_set is not None}
        r_at = {0.0: self.r_high}
        r_at[self.t_soft] = self.r_low
        r_at[self.t_stiff] = self.r_high
        times = sorted(set(r_at) | set(b_entries))
        entries = [ScheduleEntry(t, r_set=r_at.get(t), b_set=b_entries.get(t)) for t in times]
        return scenario.with_changes(schedule=tuple(entries))


def peak_output_velocity(scenario):
    return float(np.max(np.abs(simulate(scenario)["eta_dot"])))


def _evaluate(args):
    template, candidate = args
    try:
        return candidate, peak_output_velocity(candidate.apply(template)), None
    except DyracError as exc:
        return candidate, math.nan, str(exc)


def optimize_schedule(template, grid, workers=1):
    """Exhaustive search for the schedule maximizing peak |eta_dot|.

    Returns ``(best, report)`` where ``report`` lists ``(candidate, peak,
    error)`` for every grid entry in the order given. Ties go to the
    earliest ``t_soft``, then the lowest ``r_low``.
    """
    grid = list(grid)
    if not grid:
        raise OptimizationError("empty candidate grid")
    jobs = [(template, c) for c in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            report = list(pool.map(_evaluate, jobs))
    else:
        report = [_evaluate(job) for job in jobs]
    ok = [(c, peak) for c, peak, err in report if err is None]
    if not ok:
        raise OptimizationError("every candidate simulation failed")
    best = min(ok, key=lambda cp: (-cp[1], cp[0].t_soft, cp[0].r_low, cp[0].t_stiff, cp[0].r_high))
    return best[0], report
