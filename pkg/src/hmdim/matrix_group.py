"""Integer unimodular matrices acting on the hyperbolic plane.

Points of the upper half-plane are Python ``complex`` numbers with positive
imaginary part; the base point is ``o = i``. The Cayley transform
``z -> (z - i)/(z + i)`` moves ``o`` to the centre of the disk, where the
boundary is the unit circle and parametrized by an angle in ``[0, 2*pi)``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hmdim._validation import InsufficientDepthError, InvalidInputError
from hmdim.free_group import ReducedWord, code_to_char, reduced_words
from hmdim.hyperbolic import MetricModel

O = 1j
D_MIN = 15.0
TWO_PI = 2.0 * math.pi
# above this size the Frobenius norm is handled in log space
_BIG = 10**300


class SL2Matrix(tuple):
    """``[[a, b], [c, d]]`` with integer entries and ``ad - bc = 1``."""

    __slots__ = ()

    def __new__(cls, a, b, c, d):
        vals = tuple(int(v) for v in (a, b, c, d))
        for v, orig in zip(vals, (a, b, c, d)):
            if v != orig:
                raise InvalidInputError(f"matrix entries must be integers, got {orig!r}")
        if vals[0] * vals[3] - vals[1] * vals[2] != 1:
            raise InvalidInputError(f"determinant of {list(vals)} is not 1")
        return tuple.__new__(cls, vals)

    a = property(lambda self: self[0])
    b = property(lambda self: self[1])
    c = property(lambda self: self[2])
    d = property(lambda self: self[3])

    @classmethod
    def identity(cls) -> "SL2Matrix":
        return tuple.__new__(cls, (1, 0, 0, 1))

    def inverse(self) -> "SL2Matrix":
        a, b, c, d = self
        return tuple.__new__(SL2Matrix, (d, -b, -c, a))

    def __matmul__(self, other):
        if isinstance(other, SL2Matrix):
            return mat_multiply(self, other)
        return NotImplemented

    def norm_sq(self) -> int:
        a, b, c, d = self
        return a * a + b * b + c * c + d * d

    def to_json(self) -> list[list[str]]:
        a, b, c, d = self
        return [[str(a), str(b)], [str(c), str(d)]]

    @classmethod
    def from_json(cls, rows) -> "SL2Matrix":
        if isinstance(rows, str):
            rows = json.loads(rows)
        try:
            (a, b), (c, d) = rows
            ints = [int(v) if isinstance(v, str) or isinstance(v, int) else None
                    for v in (a, b, c, d)]
        except (TypeError, ValueError):
            raise InvalidInputError(f"not a 2x2 integer matrix: {rows!r}") from None
        if any(v is None or isinstance(v, bool) for v in ints):
            raise InvalidInputError(f"matrix entries must be decimal integer strings: {rows!r}")
        return cls(*ints)

    def __repr__(self):
        a, b, c, d = self
        return f"SL2Matrix([[{a}, {b}], [{c}, {d}]])"


def mat_multiply(g: SL2Matrix, h: SL2Matrix) -> SL2Matrix:
    a, b, c, d = g
    e, f, p, q = h
    out = (a * e + b * p, a * f + b * q, c * e + d * p, c * f + d * q)
    if out[0] * out[3] - out[1] * out[2] != 1:
        raise ArithmeticError("unimodularity lost in product")
    return tuple.__new__(SL2Matrix, out)


def _check_point(z: complex) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise InvalidInputError(f"point {z!r} is not in the upper half-plane")
    return z


def moebius_apply(g: SL2Matrix, z: complex) -> complex:
    z = _check_point(z)
    a, b, c, d = (float(v) for v in g)
    w = (a * z + b) / (c * z + d)
    if not w.imag > 0:
        raise ArithmeticError("Moebius image left the half-plane (precision loss)")
    return w


def hyp_distance(z: complex, w: complex) -> float:
    """Hyperbolic distance in the upper half-plane (curvature -1)."""
    z, w = _check_point(z), _check_point(w)
    return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))


def _acosh_half_norm(n2: int) -> float:
    # d = arccosh(n2 / 2) for n2 = a^2+b^2+c^2+d^2 >= 2
    if n2 < _BIG:
        return math.acosh(n2 / 2.0)
    # arccosh(x) = log(2x) + log((1 + sqrt(1 - x^-2)) / 2); with x = n2/2 the
    # correction is log((1 + sqrt(1 - 4/n2^2)) / 2) ~ -1/n2^2, below 1e-600 here
    return math.log(n2)


def displacement(g: SL2Matrix) -> float:
    """``d(o, g o)``, exact up to float rounding even for huge entries."""
    return _acosh_half_norm(g.norm_sq())


def orbit_distance(g: SL2Matrix, h: SL2Matrix) -> float:
    """``d(g o, h o) = d(o, g^-1 h o)`` computed from integers."""
    return displacement(mat_multiply(g.inverse(), h))


def _as_point(p):
    return moebius_apply(p, O) if isinstance(p, SL2Matrix) else _check_point(p)


def h2_distance(p, q) -> float:
    """Distance between points given as half-plane points or orbit matrices."""
    if isinstance(p, SL2Matrix) and isinstance(q, SL2Matrix):
        return orbit_distance(p, q)
    return hyp_distance(_as_point(p), _as_point(q))


def metric_model() -> MetricModel:
    return MetricModel(distance=h2_distance, basepoint=SL2Matrix.identity(), name="h2")


def to_disk(z: complex) -> complex:
    z = _check_point(z)
    return (z - 1j) / (z + 1j)


def canonical_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True)
class CircleSample:
    """Boundary proxy on the unit circle with the depth of its source point."""

    angle: float
    depth: float

    def __post_init__(self):
        object.__setattr__(self, "angle", canonical_angle(self.angle))


def _scaled_floats(g: SL2Matrix) -> tuple[float, float, float, float]:
    # common power-of-two rescaling so products of entries stay finite
    shift = max(0, max(abs(v) for v in g).bit_length() - 500)
    if shift == 0:
        return tuple(float(v) for v in g)
    return tuple(float(v >> shift) for v in g)


def matrix_boundary_angle(a, b, c, d) -> float:
    """Angle of ``to_disk(g o)`` for ``g = [[a, b], [c, d]]`` (any common scale)."""
    # (g i - i)/(g i + i) = ((b + c) + i(a - d)) / ((b - c) + i(a + d))
    w = complex(b + c, a - d) / complex(b - c, a + d)
    return canonical_angle(cmath.phase(w))


def boundary_proxy(endpoint, d_min: float = D_MIN) -> CircleSample:
    """Radial projection of a deep trajectory point to the circle."""
    if isinstance(endpoint, SL2Matrix):
        depth = displacement(endpoint)
        angle_src = _scaled_floats(endpoint)
        if depth < d_min:
            raise InsufficientDepthError(f"endpoint depth {depth:.3f} < {d_min}")
        return CircleSample(matrix_boundary_angle(*angle_src), depth)
    z = _check_point(endpoint)
    depth = hyp_distance(O, z)
    if depth < d_min:
        raise InsufficientDepthError(f"endpoint depth {depth:.3f} < {d_min}")
    return CircleSample(cmath.phase(to_disk(z)), depth)


def circle_visual_quasimetric(xi, eta) -> float:
    """``sin(|angle difference| / 2)``, i.e. half the chord length."""
    t1 = xi.angle if isinstance(xi, CircleSample) else float(xi)
    t2 = eta.angle if isinstance(eta, CircleSample) else float(eta)
    return abs(math.sin(0.5 * (t1 - t2)))


def circle_gromov_product(xi, eta) -> float:
    rho = circle_visual_quasimetric(xi, eta)
    return math.inf if rho == 0.0 else -math.log(rho)


def boundary_interior_product(angle: float, z) -> float:
    """``(xi|z)_o`` for a boundary angle and an interior point.

    Uses the disk Busemann function ``log(|xi - w|^2 / (1 - |w|^2))``.
    """
    if isinstance(z, SL2Matrix):
        a, b, c, d = _scaled_floats(z)
        dist = displacement(z)
        w = complex(b + c, a - d) / complex(b - c, a + d)
        # 1 - |w|^2 = 4 / (|g|^2 + 2) by unimodularity
        log_one_minus = math.log(4) - math.log(z.norm_sq() + 2)
    else:
        z = _check_point(z)
        dist = hyp_distance(O, z)
        w = to_disk(z)
        log_one_minus = math.log(4.0 * z.imag / abs(z + 1j) ** 2)
    xi = cmath.exp(1j * angle)
    busemann = 2.0 * math.log(abs(xi - w)) - log_one_minus
    return max(0.0, 0.5 * (dist - busemann))


class SL2Group:
    """A subgroup of SL(2, Z) given by named generators ``a, b, ...``."""

    kind = "sl2z"

    def __init__(self, generators: Sequence[SL2Matrix]):
        if not generators:
            raise InvalidInputError("need at least one generator")
        self.generators = [g if isinstance(g, SL2Matrix) else SL2Matrix.from_json(g)
                           for g in generators]
        self.rank = len(self.generators)
        self._letters = {}
        for i, g in enumerate(self.generators):
            self._letters[code_to_char(2 * i)] = g
            self._letters[code_to_char(2 * i + 1)] = g.inverse()

    def __repr__(self):
        return f"SL2Group({[g.to_json() for g in self.generators]})"

    @property
    def identity(self) -> SL2Matrix:
        return SL2Matrix.identity()

    @property
    def letters(self) -> list[SL2Matrix]:
        return [self._letters[code_to_char(c)] for c in range(2 * self.rank)]

    def evaluate(self, word: str) -> SL2Matrix:
        g = SL2Matrix.identity()
        for ch in word:
            try:
                g = mat_multiply(g, self._letters[ch])
            except KeyError:
                raise InvalidInputError(f"letter {ch!r} has no generator") from None
        return g

    def element(self, spec) -> SL2Matrix:
        if isinstance(spec, SL2Matrix):
            return spec
        if isinstance(spec, str):
            return self.evaluate(ReducedWord.parse(spec))
        return SL2Matrix.from_json(spec)

    def word_of(self, g: SL2Matrix, max_length: int = 4) -> ReducedWord | None:
        """Shortest reduced word over the generators evaluating to ``g``."""
        for n in range(max_length + 1):
            for w in reduced_words(self.rank, n):
                if self.evaluate(w) == g:
                    return w
        return None

    def multiply(self, g, h) -> SL2Matrix:
        return mat_multiply(g, h)

    def inverse(self, g) -> SL2Matrix:
        return g.inverse()

    def length(self, g) -> float:
        return displacement(g)

    def format(self, g) -> list[list[str]]:
        return g.to_json()

    def metric_model(self) -> MetricModel:
        return metric_model()


SANOV = (SL2Matrix(1, 2, 0, 1), SL2Matrix(1, 0, 2, 1))


def first_relation(generators: Sequence[SL2Matrix], max_length: int = 12):
    """Search reduced words of length ``1..max_length`` for one equal to ``I``.

    Returns the first such word (canonical order) or ``None``. Depth-first with
    incremental products, so each word costs one integer 2x2 product.
    """
    rank = len(generators)
    mats = []
    for g in generators:
        mats.append(tuple(g))
        mats.append(tuple(g.inverse()))
    ident = (1, 0, 0, 1)

    def rec(prefix_codes, m):
        depth = len(prefix_codes)
        if depth and m == ident:
            return "".join(code_to_char(c) for c in prefix_codes)
        if depth == max_length:
            return None
        last = prefix_codes[-1] if prefix_codes else -1
        a, b, c, d = m
        for code in range(2 * rank):
            if last >= 0 and code == last ^ 1:
                continue
            e, f, p, q = mats[code]
            found = rec(prefix_codes + [code],
                        (a * e + b * p, a * f + b * q, c * e + d * p, c * f + d * q))
            if found is not None:
                return found
        return None

    return rec([], ident)


def float_letters(group: SL2Group) -> np.ndarray:
    """Letter matrices as a ``(2*rank, 2, 2)`` float array, indexed by letter code."""
    return np.array([[[g.a, g.b], [g.c, g.d]] for g in group.letters], dtype=float)
