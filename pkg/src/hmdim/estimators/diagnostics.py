"""Trajectory diagnostics on the free group: tracking, the good event, shadows,
continuity of the dimension, and stationarity of an empirical cloud."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from hmdim._kernels import FreeWalkBatch, codes_to_strings, map_units
from hmdim._validation import (
    InvalidInputError,
    UnsupportedModelError,
    check_int,
    check_positive,
    check_seed,
)
from hmdim.estimators.base import check_model
from hmdim.free_group import char_to_code, reduced_words

STEP_FACTOR = 10


def _require_free(mu):
    if mu.model.kind != "free":
        raise UnsupportedModelError("this diagnostic needs the free-group model")


def _margin(mu) -> int:
    from hmdim.estimators.boundary import _free_margin

    return _free_margin(mu)


def _common_prefix(a: np.ndarray, la: np.ndarray, b: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """Row-wise common prefix length of two letter-stack arrays."""
    width = min(a.shape[1], b.shape[1])
    neq = a[:, :width] != b[:, :width]
    first = np.where(neq.any(axis=1), neq.argmax(axis=1), width)
    return np.minimum(first, np.minimum(la, lb))


def _walk_and_limit(mu, n: int, K: int, seed: int, start: int, width: int, margin: int,
                    l: float, snapshots=()):
    """Walk to time ``n``, then continue until the length-``K`` prefix is final.

    Returns the stack and length at time ``n`` (plus at each snapshot time)
    and the limit prefix of length ``K``; rows that miss within the step
    budget are flagged.
    """
    batch = FreeWalkBatch(mu, seed, start, width, cap=max(64, n + 8))
    snaps = {}
    t = 0
    for s in sorted(set(snapshots) | {n}):
        batch.advance(s - t)
        t = s
        snaps[s] = (batch.stack.copy(), batch.length.copy())
    budget = n + math.ceil(STEP_FACTOR * (K + margin) / l) + 1
    done, _ = batch.run_until(K + margin, budget)
    limit = batch.stack[:, :K].copy()
    return snaps, limit, done


@dataclass(frozen=True)
class DiagnosticResult:
    value: float
    n_samples: int
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    warning: str | None = None

    def to_json(self) -> dict:
        out = {"value": self.value, "n_samples": self.n_samples}
        out.update(self.params)
        out.update(self.details)
        if self.warning:
            out["warning"] = self.warning
        return out


def tracking_distances(mu, l: float, n: int, M: int, seed: int, threads=None) -> np.ndarray:
    """``d(w_n, xi(floor(l n)))`` where ``xi(k)`` is the limit word's length-``k`` prefix."""
    _require_free(mu)
    K = int(math.floor(l * n))
    margin = _margin(mu)

    def unit(start, width):
        snaps, limit, done = _walk_and_limit(mu, n, K, seed, start, width, margin, l)
        stack, length = snaps[n]
        cp = _common_prefix(stack, length, limit, np.full(width, K))
        d = length + K - 2 * cp
        return np.where(done, d, -1)

    d = np.concatenate(map_units(unit, M, threads))
    if (d < 0).any():
        raise InvalidInputError(f"{int((d < 0).sum())} walks never fixed their limit prefix")
    return d


def tracking_diagnostic(model, mu, l: float, n: int, M: int, eps: float, seed: int = 0,
                        threads=None) -> DiagnosticResult:
    """Fraction of walks with ``d(w_n, xi(l n)) <= eps n``."""
    check_model(model, mu)
    n = check_int(n, "n", minimum=1)
    M = check_int(M, "M", minimum=1)
    eps = check_positive(eps, "eps")
    l = check_positive(l, "l")
    d = tracking_distances(mu, l, n, M, check_seed(seed), threads)
    frac = float(np.mean(d <= eps * n))
    return DiagnosticResult(frac, M, {"n": n, "eps": eps, "l": l},
                            {"mean_distance": float(d.mean()), "max_distance": int(d.max())})


def event_A_diagnostic(model, mu, h: float, l: float, eps: float, N, horizon: int = 12,
                       M: int = 10**4, seed: int = 0, tables=None, threads=None) -> DiagnosticResult:
    """``Pr(A_{eps,N})`` for each ``N`` in ``N``, using exact tables to ``horizon``.

    ``A_{eps,N}``: for every ``N <= m <= horizon``, ``mu^{*m}(w_m) <=
    exp(-m (h - eps))`` and ``d(w_m, xi(floor(l m))) <= eps m``.
    The result's ``value`` is the probability at the largest ``N``.
    """
    _require_free(mu)
    check_model(model, mu)
    Ns = sorted({check_int(x, "N", minimum=1) for x in np.atleast_1d(N)})
    horizon = check_int(horizon, "horizon", minimum=1)
    if Ns[-1] > horizon:
        raise InvalidInputError("N cannot exceed the horizon")
    if tables is None:
        from hmdim.estimators.entropy import build_tables

        tables = build_tables(mu, horizon)
    if len(tables) < horizon:
        raise InvalidInputError(f"tables reach n = {len(tables)}, horizon is {horizon}")
    M = check_int(M, "M", minimum=1)
    seed = check_seed(seed)
    K = int(math.floor(l * horizon))
    margin = _margin(mu)
    times = list(range(Ns[0], horizon + 1))

    def unit(start, width):
        snaps, limit, done = _walk_and_limit(mu, horizon, K, seed, start, width, margin, l,
                                             snapshots=times)
        ok_by_time = np.zeros((len(times), width), dtype=bool)
        for row, m in enumerate(times):
            stack, length = snaps[m]
            k = int(math.floor(l * m))
            cp = _common_prefix(stack, length, limit[:, :k], np.full(width, k))
            track = (length + k - 2 * cp) <= eps * m
            masses = tables[m - 1].masses
            logm = np.array([math.log(masses.get(w, 0.0) or 1e-300)
                             for w in codes_to_strings(stack, length)])
            ok_by_time[row] = track & (logm <= -m * (h - eps))
        return ok_by_time, done

    parts = map_units(unit, M, threads)
    ok = np.concatenate([p[0] for p in parts], axis=1)
    done = np.concatenate([p[1] for p in parts])
    if not done.all():
        raise InvalidInputError(f"{int((~done).sum())} walks never fixed their limit prefix")
    probs = {}
    for Nv in Ns:
        rows = [times.index(m) for m in range(Nv, horizon + 1)]
        probs[Nv] = float(ok[rows].all(axis=0).mean())
    seq = [probs[Nv] for Nv in Ns]
    monotone = all(b >= a for a, b in zip(seq, seq[1:]))
    return DiagnosticResult(
        probs[Ns[-1]], M, {"eps": eps, "horizon": horizon, "h": h, "l": l},
        {"by_N": {str(k): v for k, v in probs.items()}, "monotone": monotone,
         "passes": bool(monotone and probs[Ns[-1]] >= 1 - 2 * eps)})


def shadow_hit_diagnostic(model, mu, l: float, R: float, eps: float, n: int, M: int,
                          seed: int = 0, control: bool = False, threads=None) -> DiagnosticResult:
    """Among walks that track their limit at time ``n`` and whose limit lies in
    ``S(x, R)``, the fraction with ``d(w_n, x) <= 2 eps n + C``, ``C = R + 1``.

    Centers ``x`` have length ``floor(l n)``: the walk's own limit prefix with
    its last ``floor(R)`` letters replaced (so the limit stays in the shadow).
    With ``control=True`` the center instead starts with a letter the limit
    does not, and the shadow condition is not imposed.
    """
    _require_free(mu)
    check_model(model, mu)
    n = check_int(n, "n", minimum=1)
    R = check_positive(R, "R", strict=False)
    eps = check_positive(eps, "eps")
    seed = check_seed(seed)
    K = int(math.floor(l * n))
    j = min(int(math.floor(R)), K)
    C = R + 1.0
    margin = _margin(mu)
    rank = mu.model.rank
    warning = None
    if eps * n < 1:
        warning = "eps * n < 1: the tracking condition is nearly vacuous"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)

    def unit(start, width):
        snaps, limit, done = _walk_and_limit(mu, n, K, seed, start, width, margin, l)
        stack, length = snaps[n]
        kk = np.full(width, K)
        cp = _common_prefix(stack, length, limit, kk)
        tracks = (length + K - 2 * cp) <= eps * n
        x = limit.copy()
        if control:
            # first letter differs from the limit's: far off its geodesic
            x[:, 0] = (limit[:, 0] + 2) % (2 * rank)
            x[:, 1:] = _continue_reduced(x[:, 0], K - 1, rank)
            in_shadow = np.ones(width, dtype=bool)
        elif j > 0:
            x[:, K - j:] = _perturb_tail(limit, K, j, rank)
            xcp = _common_prefix(x, kk, limit, kk)
            in_shadow = xcp >= K - R - 1e-12
        else:
            in_shadow = np.ones(width, dtype=bool)
        cpx = _common_prefix(stack, length, x, kk)
        dist = length + K - 2 * cpx
        sel = done & tracks & in_shadow
        return sel, dist <= 2 * eps * n + C

    parts = map_units(unit, M, threads)
    sel = np.concatenate([p[0] for p in parts])
    hit = np.concatenate([p[1] for p in parts])
    cond = int(sel.sum())
    frac = float(hit[sel].mean()) if cond else math.nan
    return DiagnosticResult(frac, M, {"n": n, "R": R, "eps": eps, "l": l, "control": control},
                            {"conditioned": cond, "C": C}, warning)


def _continue_reduced(first: np.ndarray, length: int, rank: int) -> np.ndarray:
    """Deterministic reduced continuation: repeat the first letter."""
    return np.repeat(first[:, None], max(length, 0), axis=1)


def _perturb_tail(limit: np.ndarray, K: int, j: int, rank: int) -> np.ndarray:
    """Replace the last ``j`` letters by a reduced tail differing at its first letter."""
    width = limit.shape[0]
    out = np.empty((width, j), dtype=np.int8)
    prev = limit[:, K - j - 1] if K - j - 1 >= 0 else np.full(width, -2, dtype=np.int8)
    orig = limit[:, K - j]
    # pick the smallest letter that is neither the original nor the inverse of prev
    choice = np.full(width, -1, dtype=np.int8)
    for c in range(2 * rank):
        free = (choice < 0) & (c != orig) & (c != (prev ^ 1))
        choice[free] = c
    out[:, 0] = choice
    for t in range(1, j):
        out[:, t] = out[:, t - 1]
    return out


def stationarity_test(cloud, mu, model=None, z_max: float = 4.0,
                      low_power: int = 10**5) -> DiagnosticResult:
    """Empirical check of ``nu = sum mu(g) g nu`` on cylinders of length 1 and 2.

    For cylinder ``C`` each sample contributes ``1{xi in C} - sum_g mu(g)
    1{g xi in C}``; the statistic is the largest standardized mean.
    """
    if cloud.kind != "free":
        raise UnsupportedModelError("stationarity test needs a free-group cloud")
    check_model(model, mu)
    codes = cloud.codes
    M, depth = codes.shape
    max_g = max(len(g) for g in mu.atoms)
    if depth < 2 + max_g:
        raise InvalidInputError(f"cloud depth {depth} too shallow for translates by |g| = {max_g}")
    rank = mu.model.rank
    # first two letters of g xi for each atom g
    translates = []
    for g, p in mu.atoms.items():
        translates.append((p, _translate_head(codes, str(g))))
    z = {}
    for L in (1, 2):
        for w in reduced_words(rank, L):
            wc = [char_to_code(ch) for ch in w]
            ind = np.all(codes[:, :L] == wc, axis=1).astype(float)
            rhs = np.zeros(M)
            for p, head in translates:
                rhs += p * np.all(head[:, :L] == wc, axis=1)
            Z = ind - rhs
            sd = Z.std(ddof=1)
            z[w] = float(Z.mean() / (sd / math.sqrt(M))) if sd > 0 else 0.0
    worst = max(abs(v) for v in z.values())
    warning = f"only {M} samples; the test has low power" if M < low_power else None
    return DiagnosticResult(worst, M, {"z_max": z_max},
                            {"passes": bool(worst <= z_max), "z": z}, warning)


def _translate_head(codes: np.ndarray, g: str) -> np.ndarray:
    """First two letters of ``g xi`` for every row (``xi`` deeper than ``|g| + 2``)."""
    head = codes[:, : len(g) + 2].astype(np.int16)
    M = len(codes)
    # left-multiply letter by letter, last letter of g first
    rows = [head[i].tolist() for i in range(M)] if len(g) > 1 else None
    if rows is None:
        if not g:
            return head[:, :2]
        c = char_to_code(g)
        cancel = head[:, 0] == (c ^ 1)
        out = np.empty((M, 2), dtype=np.int16)
        out[cancel] = head[cancel, 1:3]
        out[~cancel, 0] = c
        out[~cancel, 1] = head[~cancel, 0]
        return out
    out = np.empty((M, 2), dtype=np.int16)
    gc = [char_to_code(ch) for ch in g]
    for i, r in enumerate(rows):
        for c in reversed(gc):
            if r and r[0] == c ^ 1:
                r.pop(0)
            else:
                r.insert(0, c)
        out[i] = r[:2]
    return out


@dataclass
class ContinuityRow:
    delta: float
    l1: float
    dim: float
    dim_err: float
    diff: float
    diff_err: float


def continuity_experiment(model, mu, deltas, atom=None, depth: int = 40, M: int = 10**5,
                          seed: int = 0, radii=None, threads=None, z: float = 2.0) -> dict:
    """Dimension estimates for ``mu_delta`` (mass ``delta`` moved onto ``atom``).

    All clouds use the same seed, so the differences to the unperturbed
    estimate have small paired errors (batch means of paired differences).
    ``monotone`` asserts the differences are nondecreasing in ``delta`` up to
    ``z`` combined errors.
    """
    from hmdim.estimators.boundary import sample_boundary_cloud
    from hmdim.estimators.dimension import local_dimension_report

    check_model(model, mu)
    if atom is None:
        atom = mu.elements[0]
    deltas = sorted(float(d) for d in deltas)
    base = local_dimension_report(sample_boundary_cloud(mu.model, mu, depth, M, seed, threads),
                                  radii)
    rows = []
    for d in deltas:
        m_d = mu.perturbed(atom, d) if d else mu
        l1 = float(sum(abs(m_d.atoms[g] - p) for g, p in mu.atoms.items()))
        rep = local_dimension_report(sample_boundary_cloud(m_d.model, m_d, depth, M, seed,
                                                           threads), radii)
        if len(rep.radii) != len(base.radii) or not np.allclose(rep.radii, base.radii):
            # compare on the common scales only
            common = np.intersect1d(rep.radii, base.radii)
            rep = local_dimension_report(sample_boundary_cloud(m_d.model, m_d, depth, M, seed,
                                                               threads), common)
            b = local_dimension_report(sample_boundary_cloud(mu.model, mu, depth, M, seed,
                                                             threads), common)
        else:
            b = base
        paired = rep.batch_slopes - b.batch_slopes
        diff_err = float(paired.std(ddof=1) / math.sqrt(len(paired))) if d else 0.0
        rows.append(ContinuityRow(d, l1, rep.pooled_slope, rep.pooled_stderr,
                                  abs(rep.pooled_slope - b.pooled_slope), diff_err))
    ordered = sorted(rows, key=lambda r: r.delta)
    monotone = all(a.diff <= b.diff + z * math.hypot(a.diff_err, b.diff_err)
                   for a, b in zip(ordered, ordered[1:]))
    return {"rows": rows, "base_dim": base.pooled_slope, "monotone": monotone}
