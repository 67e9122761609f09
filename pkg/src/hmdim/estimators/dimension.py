"""Local dimension of an empirical boundary measure by per-point log-log slopes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hmdim._validation import InsufficientScalesError, InvalidInputError, check_is_fitted
from hmdim.estimators.base import BaseEstimator

FREE_T_GRID = tuple(np.arange(3.0, 10.01, 0.5))
CIRCLE_J_GRID = tuple(np.arange(2.0, 10.01, 0.5))
MIN_RADII = 10
MIN_SMALL_COUNT = 5
MIN_LARGE_COUNT = 30
ZERO_COUNT = 0.5
N_BATCHES = 20
MIN_POINTS = 1000


def free_radii(t_grid=FREE_T_GRID) -> np.ndarray:
    return np.exp(-np.asarray(t_grid, dtype=float))


def circle_radii(j_grid=CIRCLE_J_GRID) -> np.ndarray:
    return 2.0 ** -np.asarray(j_grid, dtype=float)


def _free_counts(codes: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Leave-one-out counts of the closed balls ``rho <= r``: cylinders of length ``ceil(-log r)``."""
    M, depth = codes.shape
    lengths = np.ceil(-np.log(radii) - 1e-9).astype(int)
    if lengths.max() > depth:
        raise InvalidInputError(f"radius {radii.min():.3g} needs depth {lengths.max()} > {depth}")
    out = np.empty((M, len(radii)))
    cache = {}
    for j, L in enumerate(lengths):
        if L not in cache:
            if L <= 0:
                cache[L] = np.full(M, M - 1.0)
            else:
                keys = np.ascontiguousarray(codes[:, :L]).view(np.dtype((np.void, L))).ravel()
                _, inv, cnt = np.unique(keys, return_inverse=True, return_counts=True)
                cache[L] = cnt[inv.ravel()] - 1.0
        out[:, j] = cache[L]
    return out


def _circle_counts(angles: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Leave-one-out counts of ``|sin(dtheta / 2)| <= r`` on the circle."""
    M = len(angles)
    order = np.argsort(angles, kind="stable")
    srt = angles[order]
    ext = np.concatenate([srt - 2 * math.pi, srt, srt + 2 * math.pi])
    out = np.empty((M, len(radii)))
    for j, r in enumerate(radii):
        if r >= 1.0:
            out[:, j] = M - 1.0
            continue
        half = 2.0 * math.asin(r)
        lo = np.searchsorted(ext, srt - half, side="left")
        hi = np.searchsorted(ext, srt + half, side="right")
        cnt = np.minimum(hi - lo, M) - 1.0
        col = np.empty(M)
        col[order] = cnt
        out[:, j] = col
    return out


def ball_counts(cloud, radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if cloud.kind == "free":
        return _free_counts(cloud.codes, radii)
    return _circle_counts(cloud.angles, radii)


@dataclass
class LocalDimReport:
    per_point_slopes: np.ndarray
    radii: np.ndarray
    pooled_slope: float
    r_squared: float
    h_over_l: float
    spread: float
    median: float = math.nan
    pooled_stderr: float = math.nan
    stat_stderr: float = math.nan
    shift_slope: float = math.nan
    batch_slopes: np.ndarray | None = None
    dropped_radii: np.ndarray | None = None
    mean_log_mass: np.ndarray | None = None
    log_mass: np.ndarray | None = None
    exact_ratios: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return len(self.per_point_slopes)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.per_point_slopes, q))

    def summary(self) -> dict:
        return {
            "pooled": self.pooled_slope,
            "pooled_stderr": self.pooled_stderr,
            "median": self.median,
            "iqr": self.spread,
            "r2": self.r_squared,
            "n_radii": int(len(self.radii)),
            "n_points": self.n_points,
        }


def _slopes(logm: np.ndarray, logr: np.ndarray):
    x = logr - logr.mean()
    sxx = float(x @ x)
    return (logm - logm.mean(axis=1, keepdims=True)) @ x / sxx


def _fit(counts: np.ndarray, radii: np.ndarray, M: int):
    nu_hat = np.maximum(counts, ZERO_COUNT) / (M - 1)
    logm = np.log(nu_hat)
    logr = np.log(radii)
    slopes = _slopes(logm, logr)
    mean_curve = logm.mean(axis=0)
    x = logr - logr.mean()
    pooled = float(mean_curve @ x / (x @ x))
    resid = mean_curve - mean_curve.mean() - pooled * x
    ss_tot = float(((mean_curve - mean_curve.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return slopes, pooled, r2, logm, mean_curve


def _valid_radii(counts: np.ndarray):
    med = np.median(counts, axis=0)
    return med >= MIN_SMALL_COUNT, med


def _shifted(radii: np.ndarray) -> np.ndarray:
    lr = np.log(radii)
    if len(lr) < 2:
        return radii
    step = float(np.median(np.abs(np.diff(lr))))
    return np.exp(lr - 0.5 * step)


def local_dimension_report(cloud, radii=None, nu_exact=None, h_over_l: float = math.nan,
                           n_batches: int = N_BATCHES, min_points: int = MIN_POINTS,
                           shift_check: bool = True) -> LocalDimReport:
    """Per-point OLS slopes of ``log nu_hat(B(xi_i, r))`` against ``log r``.

    ``nu_hat`` counts the other samples in the closed ball (leave-one-out),
    divided by ``M - 1``; empty balls are clipped to half a count. Radii whose
    median count is below 5 are dropped, and fewer than 10 survivors raise
    :class:`InsufficientScalesError`. The pooled slope is the mean of the
    per-point slopes (the OLS slope of the mean curve); its error combines
    batch means over index blocks with the change under a half-step shift of
    the grid.
    """
    M = len(cloud)
    if M < min_points:
        raise InvalidInputError(f"need at least {min_points} boundary samples, got {M}")
    if radii is None:
        radii = free_radii() if cloud.kind == "free" else circle_radii()
    radii = np.asarray(sorted(set(float(r) for r in np.atleast_1d(radii)), reverse=True))
    if np.any(radii <= 0):
        raise InvalidInputError("radii must be positive")

    counts = ball_counts(cloud, radii)
    keep, med = _valid_radii(counts)
    if keep.sum() < MIN_RADII:
        raise InsufficientScalesError(
            f"only {int(keep.sum())} radii have median ball count >= {MIN_SMALL_COUNT}; "
            f"need {MIN_RADII}")
    if med[keep][0] < MIN_LARGE_COUNT:
        raise InsufficientScalesError(
            f"largest ball has median count {med[keep][0]:.0f} < {MIN_LARGE_COUNT}")
    used = radii[keep]
    counts = counts[:, keep]
    slopes, pooled, r2, logm, mean_curve = _fit(counts, used, M)

    B = max(2, min(n_batches, M // 50))
    edges = np.linspace(0, M, B + 1).astype(int)
    batch = np.array([slopes[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    stat = float(batch.std(ddof=1) / math.sqrt(B))

    shift_slope = math.nan
    shift_err = 0.0
    if shift_check:
        sh = _shifted(used)
        shift_slope = float(_fit(ball_counts(cloud, sh), sh, M)[1])
        shift_err = abs(shift_slope - pooled)
    exact = None
    if nu_exact is not None and cloud.kind == "free":
        from hmdim.free_group import code_to_char
        from hmdim.oracle import cylinder_measure

        t = -math.log(used.min())
        L = math.ceil(t - 1e-9)
        exact = np.array([-math.log(cylinder_measure(
            nu_exact, "".join(code_to_char(int(c)) for c in row[:L]))) / t for row in cloud.codes])

    q1, q3 = np.quantile(slopes, [0.25, 0.75])
    return LocalDimReport(
        per_point_slopes=slopes, radii=used, pooled_slope=pooled, r_squared=r2,
        h_over_l=float(h_over_l), spread=float(q3 - q1), median=float(np.median(slopes)),
        pooled_stderr=math.hypot(stat, shift_err), stat_stderr=stat, shift_slope=shift_slope,
        batch_slopes=batch, dropped_radii=radii[~keep], mean_log_mass=mean_curve,
        log_mass=logm, exact_ratios=exact,
        info={"median_counts": med[keep].tolist(), "n_batches": B})


@dataclass(frozen=True)
class UpperBoundResult:
    passed: bool
    margin: float
    p95: float
    bound: float

    def __bool__(self):
        return self.passed


def upper_bound_check(report: LocalDimReport, h, l, h_err: float = 0.0,
                      l_err: float = 0.0) -> UpperBoundResult:
    """``p95(slopes) <= h/l + 3 (slope sd + propagated h, l error)``.

    The slope sd is the robust per-point scale ``IQR / 1.349``; ``h`` and
    ``l`` may be numbers or :class:`EstimateWithError`.
    """
    if hasattr(h, "stderr"):
        h, h_err = h.value, max(h_err, h.stderr)
    if hasattr(l, "stderr"):
        l, l_err = l.value, max(l_err, l.stderr)
    if not (h > 0 and l > 0):
        raise InvalidInputError("h and l must be positive")
    ratio = h / l
    prop = ratio * math.hypot(h_err / h, l_err / l)
    sd = report.spread / 1.349
    bound = ratio + 3.0 * (sd + prop)
    p95 = report.quantile(0.95)
    return UpperBoundResult(bool(p95 <= bound), float(bound - p95), p95, float(bound))


def corrupted(report: LocalDimReport, factor: float = 2.0) -> LocalDimReport:
    """Negative control: every slope scaled by ``factor``."""
    s = report.per_point_slopes * factor
    q1, q3 = np.quantile(s, [0.25, 0.75])
    return LocalDimReport(s, report.radii, report.pooled_slope * factor, report.r_squared,
                          report.h_over_l, float(q3 - q1), float(np.median(s)),
                          report.pooled_stderr * factor)


class LocalDimensionEstimator(BaseEstimator):
    """``fit(cloud)`` sets ``report_`` and ``dimension_`` (the pooled slope).

    ``transform(cloud)`` returns the per-point slopes as a column.
    """

    def __init__(self, radii=None, h_over_l=math.nan, n_batches=N_BATCHES):
        self.radii = radii
        self.h_over_l = h_over_l
        self.n_batches = n_batches

    def fit(self, cloud, y=None, nu_exact=None):
        self.report_ = local_dimension_report(cloud, self.radii, nu_exact, self.h_over_l,
                                              self.n_batches)
        self.dimension_ = self.report_.pooled_slope
        self.median_ = self.report_.median
        return self

    def transform(self, cloud):
        check_is_fitted(self, "report_")
        rep = local_dimension_report(cloud, self.report_.radii, None, self.h_over_l,
                                     self.n_batches, shift_check=False)
        return rep.per_point_slopes[:, None]

    def fit_transform(self, cloud, y=None, **kw):
        self.fit(cloud, **kw)
        return self.report_.per_point_slopes[:, None]
