"""Gromov-hyperbolic geometry on an abstract metric model.

Every routine here only needs a distance function and a base point, so the
same code serves the Cayley tree of a free group and the hyperbolic plane.
Boundary points never appear directly: callers pass Gromov products that a
concrete model computed for its finite-depth proxies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from hmdim._validation import InvalidInputError
from hmdim.rng import stream

CLAMP_TOL = 1e-9
DEFAULT_QUADRUPLE_CAP = 10**6
_DELTA_DOMAIN = 2


@dataclass(frozen=True)
class MetricModel:
    """A metric space given by its distance function and base point ``o``."""

    distance: Callable[[Any, Any], float]
    basepoint: Any
    name: str = "model"


@dataclass(frozen=True)
class ShadowSpec:
    base: Any
    center: Any
    thickness: float

    def __post_init__(self):
        if self.thickness < 0:
            raise InvalidInputError("shadow thickness must be nonnegative")


@dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    quadruple_count: int


def gromov_product(model: MetricModel, x, y, z=None) -> float:
    """Return ``(x|y)_z``; ``z`` defaults to the base point.

    Rounding below zero (at most ``CLAMP_TOL``) is clamped away.
    """
    if z is None:
        z = model.basepoint
    d = model.distance
    value = 0.5 * (d(z, x) + d(z, y) - d(x, y))
    if value < 0.0:
        if value < -CLAMP_TOL:
            raise InvalidInputError(
                f"negative Gromov product {value!r}; distance is not a metric")
        value = 0.0
    return value


def visual_quasimetric(product: float) -> float:
    """``exp(-(xi|eta))``: the boundary quasi-metric at a Gromov product."""
    if product < 0:
        raise InvalidInputError("Gromov product must be nonnegative")
    return math.exp(-product)


def shadow_contains(model: MetricModel, s: ShadowSpec, boundary_product: float,
                    center_distance: float | None = None) -> bool:
    """Membership of a boundary point in the shadow ``S_w(x, R)``.

    ``boundary_product`` is ``(xi|x)_w`` as supplied by the group model.
    """
    if center_distance is None:
        center_distance = model.distance(s.base, s.center)
    return boundary_product >= center_distance - s.thickness


def _four_point_defects(D: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # rows of idx are (x, y, z, w)
    x, y, z, w = idx.T
    p_xy = 0.5 * (D[w, x] + D[w, y] - D[x, y])
    p_xz = 0.5 * (D[w, x] + D[w, z] - D[x, z])
    p_zy = 0.5 * (D[w, z] + D[w, y] - D[z, y])
    return np.minimum(p_xz, p_zy) - p_xy


def estimate_delta(model: MetricModel, points: Sequence, w=None,
                   cap: int = DEFAULT_QUADRUPLE_CAP, seed: int = 0) -> DeltaEstimate:
    """Largest four-point defect ``min{(x|z)_w, (z|y)_w} - (x|y)_w`` found.

    When ``w`` is given it is the only base tested; otherwise every point of
    the set may serve as base. All ordered quadruples are enumerated when
    their number is at most ``cap``; beyond that ``cap`` quadruples are drawn
    from a fixed sub-stream of ``seed``.
    """
    pts = list(points)
    if len(pts) < 4:
        raise InvalidInputError("estimate_delta needs at least 4 points")
    if w is not None:
        pts = pts + [w]
    n = len(pts)
    D = np.empty((n, n))
    for i in range(n):
        D[i, i] = 0.0
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = model.distance(pts[i], pts[j])

    m = n - 1 if w is not None else n
    n_bases = 1 if w is not None else n
    total = m**3 * n_bases
    worst = 0.0
    if total <= cap:
        trip = np.array(list(itertools.product(range(m), repeat=3)), dtype=np.int64)
        bases = [n - 1] if w is not None else range(n)
        for b in bases:
            idx = np.column_stack([trip, np.full(len(trip), b)])
            worst = max(worst, float(_four_point_defects(D, idx).max()))
        count = total
    else:
        rng = stream(seed, _DELTA_DOMAIN, 0)
        idx = rng.integers(0, m, size=(cap, 4))
        if w is not None:
            idx[:, 3] = n - 1
        else:
            idx[:, 3] = rng.integers(0, n, size=cap)
        worst = max(worst, float(_four_point_defects(D, idx).max()))
        count = cap
    if worst < CLAMP_TOL:
        worst = 0.0
    return DeltaEstimate(delta=worst, quadruple_count=count)


@dataclass(frozen=True)
class SandwichReport:
    constant: float
    inner_constant: float
    outer_constant: float
    n_inside: int
    n_outside: int
    radius: float


def shadow_ball_sandwich_check(center_distance: float, R: float,
                               products_with_x: Sequence[float],
                               products_with_xi: Sequence[float]) -> SandwichReport:
    """Smallest ``C >= 1`` with ``B(xi, r/C) ⊂ S(x, R) ⊂ B(xi, C r)`` on samples.

    Here ``r = exp(-|x| + R)``. Sample ``eta`` is described by ``(eta|x)_o``
    and ``(xi|eta)_o``; the center ``xi`` itself must lie in ``S(x, R)``.
    Saturated products (``inf`` for ``eta = xi``) are allowed.
    """
    px = np.asarray(products_with_x, dtype=float)
    pxi = np.asarray(products_with_xi, dtype=float)
    if px.size == 0 or px.shape != pxi.shape:
        raise InvalidInputError("need a nonempty, aligned sample set")
    r = math.exp(-center_distance + R)
    rho = np.exp(-pxi)
    inside = px >= center_distance - R
    outer = 1.0
    if inside.any():
        outer = max(outer, float(rho[inside].max()) / r)
    inner = 1.0
    if (~inside).any():
        inner = max(inner, r / float(rho[~inside].min()))
    return SandwichReport(constant=max(inner, outer), inner_constant=inner,
                          outer_constant=outer, n_inside=int(inside.sum()),
                          n_outside=int((~inside).sum()), radius=r)


def quasi_triangle_constant(rho_xy, rho_xz, rho_zy) -> float:
    """Smallest ``C`` with ``rho(x,y) <= C (rho(x,z) + rho(z,y))`` on the triples."""
    num = np.asarray(rho_xy, dtype=float)
    den = np.asarray(rho_xz, dtype=float) + np.asarray(rho_zy, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                         np.where(num > 0, np.inf, 0.0))
    return float(ratio.max()) if ratio.size else 0.0


def gromov_sequence_violations(products: Sequence[float], delta: float) -> int:
    """Count drops larger than ``2*delta`` in a sequence of ``(x_n|x_m)_o``.

    ``products[i]`` is the product attached to the ``i``-th smallest value of
    ``min(n, m)``; convergence toward a boundary point makes it nondecreasing
    up to the slack.
    """
    p = np.asarray(products, dtype=float)
    if p.size < 2:
        return 0
    running = np.maximum.accumulate(p)
    return int(np.sum(p < running - 2.0 * delta - CLAMP_TOL))
