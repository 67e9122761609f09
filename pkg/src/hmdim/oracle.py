"""Exact harmonic measure, entropy and drift for nearest-neighbour walks on F_k.

Letters are indexed by their code (``a=0, A=1, b=2, ...``) throughout, so
the inverse of letter ``x`` is ``x ^ 1``.

The boundary measure is Markov: ``nu([x1 .. xn]) = initial[x1] * prod
kernel[xi][xi+1]``. It is found by a damped fixed-point solve of the
stationarity equations on cylinders of length one and two, cross-checked
against the closed form built from first-passage probabilities, and then
verified on every cylinder of length up to three.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from hmdim._validation import (
    InsufficientDepthError,
    InvalidInputError,
    NumericError,
    OracleInconsistentError,
    UnsupportedModelError,
    check_is_fitted,
)
from hmdim.free_group import (
    BoundaryWord,
    char_to_code,
    code_to_char,
    reduced_words,
)

FP_TOL = 1e-14
FP_CAP = 10**6
DAMPING = 0.5
RESIDUAL_TOL = 1e-10
CLOSED_FORM_TOL = 1e-9
DRIFT_TOL = 1e-13
DRIFT_CAP = 20000


def _letter_probs(mu):
    """``(rank, p, p_id)`` with ``p`` indexed by letter code, before time change."""
    if mu.model.kind != "free":
        raise UnsupportedModelError("the exact oracle covers free-group measures only")
    if not mu.is_nearest_neighbor():
        raise UnsupportedModelError("the exact oracle needs a nearest-neighbour measure")
    rank = mu.model.rank
    p = np.zeros(2 * rank)
    p_id = 0.0
    for g, m in mu.atoms.items():
        if g == "":
            p_id = m
        else:
            p[char_to_code(g)] = m
    if p_id >= 1.0:
        raise InvalidInputError("measure is a point mass at the identity")
    return rank, p, p_id


def _inv(K):
    return np.arange(K) ^ 1


# -- first passage ---------------------------------------------------------------

@dataclass(frozen=True)
class FirstPassageVector:
    """``q[x]``: probability that the walk from ``e`` ever visits the letter ``x``."""

    q: np.ndarray
    residual: float
    iterations: int

    @property
    def rank(self) -> int:
        return len(self.q) // 2

    def __getitem__(self, letter):
        code = char_to_code(letter) if isinstance(letter, str) else int(letter)
        return float(self.q[code])

    def as_dict(self) -> dict:
        return {code_to_char(c): float(v) for c, v in enumerate(self.q)}


def solve_first_passage(mu, tol: float = FP_TOL, max_iter: int = FP_CAP) -> FirstPassageVector:
    """Minimal solution of ``q[s] = mu(s) + sum_{b != s} mu(b) q[b^-1] q[s]``.

    Monotone iteration from zero. A holding mass ``mu(e)`` only slows the
    walk down, so it is removed by renormalizing.
    """
    _, p, p_id = _letter_probs(mu)
    p = p / (1.0 - p_id)
    inv = _inv(len(p))
    q = np.zeros_like(p)
    for it in range(1, max_iter + 1):
        t = p * q[inv]
        new = p + (t.sum() - t) * q
        diff = float(np.abs(new - q).max())
        q = new
        if diff < tol:
            break
    else:
        raise NumericError(f"first-passage iteration did not converge in {max_iter} steps")
    t = p * q[inv]
    residual = float(np.abs(p + (t.sum() - t) * q - q).max())
    return FirstPassageVector(q=q, residual=residual, iterations=it)


def closed_form_markov(q: FirstPassageVector):
    """``(initial, kernel)`` from the first-passage vector.

    With ``z[x] = (1 - q[x^-1]) / (1 - q[x] q[x^-1])``, the probability of
    ending in the cone below a vertex entered by ``x``, one has
    ``nu([x1..xn]) = q[x1] .. q[xn] z[xn]``.
    """
    qv = q.q
    K = len(qv)
    inv = _inv(K)
    z = (1.0 - qv[inv]) / (1.0 - qv * qv[inv])
    initial = qv * z
    kernel = np.zeros((K, K))
    for x in range(K):
        if z[x] > 0:
            kernel[x] = qv * z / z[x]
        kernel[x, x ^ 1] = 0.0
        s = kernel[x].sum()
        if s > 0:
            kernel[x] /= s
    return initial, kernel


# -- boundary measure ----------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryMarkovMeasure:
    initial: np.ndarray
    kernel: np.ndarray
    residual: float = math.nan
    iterations: int = 0

    @property
    def rank(self) -> int:
        return len(self.initial) // 2

    @property
    def verified(self) -> bool:
        return self.residual <= RESIDUAL_TOL

    def initial_dict(self) -> dict:
        return {code_to_char(c): float(v) for c, v in enumerate(self.initial)}

    def kernel_dict(self) -> dict:
        K = len(self.initial)
        return {code_to_char(x): {code_to_char(y): float(self.kernel[x, y]) for y in range(K)}
                for x in range(K)}

    def cylinder(self, w: str) -> float:
        return cylinder_measure(self, w)


def cylinder_measure(nu: BoundaryMarkovMeasure, w: str) -> float:
    """``nu([w]) = initial[w1] * prod kernel[wi][wi+1]``."""
    if len(w) < 1:
        raise InvalidInputError("cylinder needs a word of length >= 1")
    codes = [char_to_code(ch) for ch in w]
    if max(codes) >= len(nu.initial):
        raise InvalidInputError(f"word {w!r} uses a generator beyond the rank")
    m = float(nu.initial[codes[0]])
    for x, y in zip(codes, codes[1:]):
        if y == x ^ 1:
            raise InvalidInputError(f"word {w!r} is not reduced")
        m *= float(nu.kernel[x, y])
    return m


def translated_cylinder_measure(nu: BoundaryMarkovMeasure, s: str, w: str) -> float:
    """``(s nu)([w]) = nu(s^-1 [w])`` for a single letter ``s``."""
    sinv = s.swapcase()
    if w[0] == s:
        if len(w) == 1:
            # s^-1 [s] is the complement of [s^-1]
            return 1.0 - cylinder_measure(nu, sinv)
        return cylinder_measure(nu, w[1:])
    return cylinder_measure(nu, sinv + w)


def stationarity_residual(mu, nu: BoundaryMarkovMeasure, max_length: int = 3) -> float:
    """``max |nu(C) - sum_g mu(g) (g nu)(C)|`` over cylinders of length ``<= max_length``."""
    atoms = [(str(g), p) for g, p in mu.atoms.items()]
    worst = 0.0
    for n in range(1, max_length + 1):
        for w in reduced_words(nu.rank, n):
            rhs = 0.0
            for g, p in atoms:
                rhs += p * (cylinder_measure(nu, w) if g == "" else
                            translated_cylinder_measure(nu, g, w))
            worst = max(worst, abs(cylinder_measure(nu, w) - rhs))
    return worst


def _check_non_elementary(rank: int, p: np.ndarray):
    used = {c >> 1 for c in np.flatnonzero(p > 0)}
    if rank < 2 or len(used) < 2:
        raise InvalidInputError(
            "the measure generates an elementary semigroup; no unique boundary measure")


def solve_stationary_markov(mu, q: FirstPassageVector | None = None,
                            tol: float = FP_TOL, max_iter: int = FP_CAP) -> BoundaryMarkovMeasure:
    """Markov measure solving ``nu = sum mu(g) g nu`` on cylinders of length 1 and 2.

    On the unknowns ``n1[x] = nu([x])`` and ``n2[x, y] = nu([xy])``:

    * ``s^-1 [s]`` is the complement of ``[s^-1]`` and ``s^-1 [x] = [s^-1 x]``
      otherwise;
    * ``s^-1 [s y] = [y]`` and ``s^-1 [x y] = [s^-1 x y]`` otherwise, whose
      mass under the Markov ansatz is ``n2[s^-1, x] n2[x, y] / n1[x]``.

    Damped iteration from the uniform measure. The result must agree with
    :func:`closed_form_markov` and satisfy stationarity on every length-3
    cylinder; otherwise :class:`OracleInconsistentError` is raised.
    """
    rank, p, p_id = _letter_probs(mu)
    _check_non_elementary(rank, p)
    p = p / (1.0 - p_id)
    K = len(p)
    inv = _inv(K)
    allowed = np.ones((K, K))
    allowed[np.arange(K), inv] = 0.0

    n1 = np.full(K, 1.0 / K)
    n2 = allowed * (n1[:, None] / (K - 1))
    for it in range(1, max_iter + 1):
        # A[x] = sum_{s != x} p[s] n2[s^-1, x]
        A = p[inv] @ n2
        new1 = p * (1.0 - n1[inv]) + A
        ratio = np.divide(A, n1, out=np.zeros(K), where=n1 > 0)
        new2 = allowed * (p[:, None] * n1[None, :] + ratio[:, None] * n2)
        diff = max(float(np.abs(new1 - n1).max()), float(np.abs(new2 - n2).max()))
        n1 = DAMPING * n1 + (1.0 - DAMPING) * new1
        n2 = DAMPING * n2 + (1.0 - DAMPING) * new2
        if diff < tol:
            break
    else:
        raise NumericError(f"stationarity iteration did not converge in {max_iter} steps")

    kernel = np.zeros((K, K))
    rows = n2.sum(axis=1)
    live = rows > 0
    kernel[live] = n2[live] / rows[live, None]
    initial = n1 / n1.sum()

    if q is None:
        q = solve_first_passage(mu)
    ci, ck = closed_form_markov(q)
    ck = np.where(live[:, None], ck, 0.0)
    kernel[~live] = ck[~live]
    gap = max(float(np.abs(ci - initial).max()), float(np.abs(ck - kernel)[live].max(initial=0.0)))
    if gap > CLOSED_FORM_TOL:
        raise OracleInconsistentError(
            f"fixed-point measure differs from the first-passage closed form by {gap:.3e}")

    nu = BoundaryMarkovMeasure(initial, kernel, iterations=it)
    residual = stationarity_residual(mu, nu, 3)
    if residual > RESIDUAL_TOL:
        raise OracleInconsistentError(f"stationarity residual {residual:.3e} > {RESIDUAL_TOL}")
    return BoundaryMarkovMeasure(initial, kernel, residual=residual, iterations=it)


def exact_local_dimension(nu: BoundaryMarkovMeasure, xi, t_max: float) -> float:
    """``log nu(B(xi, e^-t)) / (-t)``; the ball is the cylinder of length ``ceil(t)``."""
    if t_max <= 0:
        raise InvalidInputError("t_max must be positive")
    prefix = xi.prefix if isinstance(xi, BoundaryWord) else str(xi)
    n = math.ceil(t_max - 1e-12)
    if len(prefix) < n:
        raise InsufficientDepthError(f"depth {len(prefix)} < ceil(t) = {n}")
    m = cylinder_measure(nu, prefix[:n])
    if m <= 0:
        raise InvalidInputError("the point lies outside the support of the measure")
    return -math.log(m) / t_max


def markov_dimension(nu: BoundaryMarkovMeasure) -> float:
    """Per-letter entropy rate of the kernel, the exact dimension of ``nu`` on the tree."""
    K = len(nu.initial)
    # stationary law of the letter chain: left eigenvector for eigenvalue 1
    P = nu.kernel
    pi = np.full(K, 1.0 / K)
    for _ in range(100000):
        new = pi @ P
        if np.abs(new - pi).max() < 1e-15:
            pi = new
            break
        pi = 0.5 * (pi + new)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(-(pi[:, None] * P * logs).sum())


def furstenberg_entropy(mu, nu: BoundaryMarkovMeasure) -> float:
    """``h = sum_s mu(s) KL(s nu || nu)``, exact on cylinders of length two.

    For a letter ``s`` the derivative ``d(s nu)/d nu`` is constant on each
    length-2 cylinder, so the divergence is a finite sum.
    """
    if not nu.verified:
        raise InvalidInputError("the boundary measure has not passed the stationarity check")
    rank, p, p_id = _letter_probs(mu)
    two = list(reduced_words(rank, 2))
    h = 0.0
    for code in np.flatnonzero(p > 0):
        s = code_to_char(int(code))
        kl = 0.0
        for w in two:
            a = translated_cylinder_measure(nu, s, w)
            b = cylinder_measure(nu, w)
            if a > 0:
                kl += a * math.log(a / b)
        h += p[code] * kl
    return float(h)


def cocycle_drift(mu, nu: BoundaryMarkovMeasure) -> float:
    """``l = sum_s mu(s) (1 - 2 nu([s^-1]))`` from the Busemann cocycle on the tree."""
    _, p, _ = _letter_probs(mu)
    inv = _inv(len(p))
    return float((p * (1.0 - 2.0 * nu.initial[inv])).sum())


# -- drift ---------------------------------------------------------------------------

def exact_length_increments(mu, n_max: int | None = None, tol: float = DRIFT_TOL,
                            cap: int = DRIFT_CAP):
    """Exact ``d_n = L(mu^{*(n+1)}) - L(mu^{*n})`` from last-exit generating functions.

    With ``G_x`` the loops at a vertex that stay in the cone it was entered
    by ``x``, ``G`` the loops at ``e``, and ``B_x`` the paths ending in a
    word whose last letter is ``x``::

        G_x = 1 + z mu(e) G_x + z^2 sum_{s != x^-1} mu(s) mu(s^-1) G_s G_x
        G   = 1 + z mu(e) G   + z^2 sum_s mu(s) mu(s^-1) G_s G
        B_x = z mu(x) G_x (G + sum_{y != x^-1} B_y)

    Coefficients are filled degree by degree. Without ``n_max`` the sequence
    runs until consecutive increments agree to ``tol``.
    """
    _, p, p_id = _letter_probs(mu)
    K = len(p)
    inv = _inv(K)
    allowed = np.ones((K, K))
    allowed[np.arange(K), inv] = 0.0
    pp = p * p[inv]
    W = allowed * pp[None, :]
    step_gain = 1.0 - p_id - 2.0 * p[inv]

    N = (n_max if n_max is not None else cap) + 1
    Gx = np.zeros((K, N))
    G = np.zeros(N)
    S = np.zeros((K, N))
    Se = np.zeros(N)
    B = np.zeros((K, N))
    C = np.zeros((K, N))
    d = np.zeros(N)

    Gx[:, 0] = 1.0
    G[0] = 1.0
    S[:, 0] = W @ Gx[:, 0]
    Se[0] = pp @ Gx[:, 0]
    C[:, 0] = G[0]
    d[0] = 1.0 - p_id
    last = 0
    for n in range(1, N):
        gx = p_id * Gx[:, n - 1]
        g = p_id * G[n - 1]
        if n >= 2:
            gx = gx + (S[:, : n - 1] * Gx[:, n - 2:: -1]).sum(axis=1)
            g = g + float(Se[: n - 1] @ G[n - 2:: -1])
        Gx[:, n] = gx
        G[n] = g
        S[:, n] = W @ gx
        Se[n] = pp @ gx
        B[:, n] = p * (Gx[:, :n] * C[:, n - 1:: -1]).sum(axis=1)
        C[:, n] = G[n] + allowed @ B[:, n]
        d[n] = (1.0 - p_id) * G[n] + float(step_gain @ B[:, n])
        last = n
        if n_max is None and n >= 4:
            if abs(d[n] - d[n - 1]) < tol and abs(d[n] - d[n - 2]) < tol:
                break
    else:
        if n_max is None:
            raise NumericError(f"length increments did not settle within {cap} steps")
    return d[: last + 1]


def exact_mean_lengths(mu, n_max: int) -> np.ndarray:
    """``L(mu^{*n})`` for ``n = 0 .. n_max``."""
    d = exact_length_increments(mu, n_max=n_max)
    return np.concatenate([[0.0], np.cumsum(d[:-1])])


@dataclass(frozen=True)
class DriftResult:
    value: float
    lo: float
    hi: float
    exact_error: float
    steps: int
    mc_value: float = math.nan
    mc_stderr: float = math.nan
    cocycle: float = math.nan

    def as_list(self) -> list:
        return [self.value, self.lo, self.hi]


def exact_drift(mu, nu: BoundaryMarkovMeasure | None = None, mc_horizon: int = 10**4,
                mc_trajectories: int = 10**4, seed: int = 0, threads=None,
                z: float = 3.0) -> DriftResult:
    """Drift by two routes that must agree.

    (i) the limit of the exact increments of ``L(mu^{*n})``;
    (ii) Monte Carlo ``|w_n|/n`` with a ``z``-sigma CLT interval.
    The returned value is route (i) with the union interval. When ``nu`` is
    given, the cocycle formula must also match route (i).
    """
    d = exact_length_increments(mu)
    value = float(d[-1])
    err = max(abs(d[-1] - d[-2]), abs(d[-1] - d[-3]), 1e-15)
    lo, hi = value - err, value + err
    mc_value = mc_se = math.nan
    if mc_trajectories:
        from hmdim.estimators.drift import drift_mc

        est = drift_mc(mu.model, mu, mc_horizon, mc_trajectories, seed, threads=threads)
        mc_value, mc_se = est.value, est.stderr
        mlo, mhi = mc_value - z * mc_se, mc_value + z * mc_se
        if mhi < lo or mlo > hi:
            raise OracleInconsistentError(
                f"drift routes disagree: exact {value:.12f}, Monte Carlo "
                f"{mc_value:.6f} +/- {z * mc_se:.2e}")
        lo, hi = min(lo, mlo), max(hi, mhi)
    cocycle = math.nan
    if nu is not None:
        cocycle = cocycle_drift(mu, nu)
        if abs(cocycle - value) > 1e-9:
            raise OracleInconsistentError(
                f"cocycle drift {cocycle:.12f} differs from the exact sequence {value:.12f}")
    return DriftResult(value, lo, hi, err, len(d), mc_value, mc_se, cocycle)


# -- estimator-style front end -------------------------------------------------------

@dataclass
class OracleReport:
    q: FirstPassageVector
    nu: BoundaryMarkovMeasure
    entropy: float
    drift: DriftResult
    dimension: float = field(default=math.nan)

    def to_json(self) -> dict:
        return {
            "q": self.q.as_dict(),
            "initial": self.nu.initial_dict(),
            "kernel": self.nu.kernel_dict(),
            "drift": self.drift.as_list(),
            "entropy": self.entropy,
            "residual": self.nu.residual,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


try:
    from sklearn.base import BaseEstimator
except ImportError:  # pragma: no cover
    BaseEstimator = object


class HarmonicMeasureOracle(BaseEstimator):
    """Exact harmonic measure, entropy and drift of a nearest-neighbour measure.

    ``fit(mu)`` sets ``q_``, ``nu_``, ``entropy_``, ``drift_`` and
    ``dimension_`` (the exact dimension ``h/l``).
    """

    def __init__(self, mc_horizon=10**4, mc_trajectories=10**4, seed=0, threads=None):
        self.mc_horizon = mc_horizon
        self.mc_trajectories = mc_trajectories
        self.seed = seed
        self.threads = threads

    def fit(self, mu, y=None):
        self.q_ = solve_first_passage(mu)
        self.nu_ = solve_stationary_markov(mu, self.q_)
        self.entropy_ = furstenberg_entropy(mu, self.nu_)
        self.drift_ = exact_drift(mu, self.nu_, self.mc_horizon, self.mc_trajectories,
                                  self.seed, self.threads)
        self.dimension_ = self.entropy_ / self.drift_.value
        self.residual_ = self.nu_.residual
        return self

    def report(self) -> OracleReport:
        check_is_fitted(self, "nu_")
        return OracleReport(self.q_, self.nu_, self.entropy_, self.drift_, self.dimension_)

    def cylinder(self, w: str) -> float:
        check_is_fitted(self, "nu_")
        return cylinder_measure(self.nu_, w)
