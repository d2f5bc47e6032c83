"""Rate-distortion optimization primitives.

Two convex programs over test channels:

* ``rd_function``: the rate-distortion function R(Q, D), solved by
  Blahut-Arimoto alternating minimization with bisection on the distortion
  multiplier.
* ``min_sum_rate``: the smallest total description rate of a two-layer
  refinement code whose first layer is capped at R1 and whose two
  reconstructions meet distortion targets D1 and D2.  Solved by dual ascent
  on the three constraint multipliers with inner exponentiated-gradient
  (mirror-descent) steps on each conditional row, followed by an
  exact-penalty polish and a feasibility repair, so the reported value is
  always attained by the returned feasible channel.

A brute-force simplex-grid oracle (``min_sum_rate_oracle``) validates the
solver on tiny instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, DimensionError
from .probcore import Distribution, DistortionMeasure, binary_entropy

_LOG_FLOOR = 1e-300


@dataclass
class RdSolution:
    value: float
    optimizer: np.ndarray
    status: str
    iterations: int
    gap: float


@dataclass
class SumRateSolution:
    value: float
    optimizer: np.ndarray
    status: str
    iterations: int
    gap: float


def _xlog2x(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, a * np.log2(np.maximum(a, _LOG_FLOOR)), 0.0)


def _mutual_information(px: np.ndarray, w: np.ndarray) -> float:
    """I(X; Y) in bits for source px and channel rows w."""
    m = px @ w
    joint = px[:, None] * w
    return float(_xlog2x(joint).sum() - _xlog2x(px).sum() - _xlog2x(m).sum())


def _normalize_rows(w: np.ndarray) -> np.ndarray:
    s = w.sum(axis=1, keepdims=True)
    return w / np.maximum(s, _LOG_FLOOR)


def _ba_fixed_multiplier(
    px: np.ndarray,
    dmat: np.ndarray,
    beta: float,
    w: np.ndarray,
    tol: float = 1e-14,
    max_iter: int = 5000,
) -> tuple[float, float, np.ndarray, int]:
    """Blahut-Arimoto at fixed distortion multiplier beta.

    Returns (rate, distortion, channel, iterations) at the curve point whose
    supporting line has slope -beta.  Convergence is tested on the channel
    iterate itself, which is cheaper than re-evaluating the objective.
    """
    gain = np.exp2(-beta * dmat)
    it = 0
    for it in range(1, max_iter + 1):
        m = px @ w
        new_w = _normalize_rows(gain * m[None, :])
        delta = float(np.abs(new_w - w).max())
        w = new_w
        if delta < tol:
            break
    rate = _mutual_information(px, w)
    dist = float((px[:, None] * w * dmat).sum())
    return rate, dist, w, it


def _rd_zero_distortion(px: np.ndarray, dmat: np.ndarray, tol: float, max_iter: int) -> RdSolution:
    # restrict the channel support to zero-distortion entries and minimize I
    allowed = (dmat <= 0).astype(np.float64)
    w = _normalize_rows(allowed.copy())
    rate = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        m = px @ w
        w = _normalize_rows(allowed * m[None, :])
        new_rate = _mutual_information(px, w)
        if abs(new_rate - rate) < tol:
            rate = new_rate
            break
        rate = new_rate
    return RdSolution(max(rate, 0.0), w, "converged", it, 0.0)


def rd_function(
    q: Distribution,
    d: DistortionMeasure,
    D: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> RdSolution:
    """Rate-distortion function R(Q, D) in bits.

    Blahut-Arimoto with bisection on the distortion multiplier.  The
    returned channel is feasible (average distortion within ``1e-9`` of D or
    smaller) and the value is the bisection point corrected along the
    supporting line, so it matches closed forms to solver precision.
    """
    if d.rows != q.alphabet_size:
        raise DimensionError("rd_function: source alphabet does not match distortion rows")
    if D < 0:
        raise ValueError("rd_function: distortion level must be nonnegative")
    px = q.probs
    dmat = d.matrix

    if D <= 1e-14:
        return _rd_zero_distortion(px, dmat, tol, max_iter)

    col_dist = px @ dmat
    d_max = float(col_dist.min())
    if D >= d_max - 1e-14:
        w = np.zeros_like(dmat)
        w[:, int(col_dist.argmin())] = 1.0
        return RdSolution(0.0, w, "boundary", 0, 0.0)

    w = _normalize_rows(np.ones_like(dmat))
    total_it = 0

    def ba(beta: float, warm: np.ndarray):
        nonlocal total_it
        # keep every output letter slightly warm so a collapsed marginal from
        # a previous multiplier cannot trap the iteration on a face
        warm = _normalize_rows(warm + 1e-4)
        rate, dist, out, it = _ba_fixed_multiplier(px, dmat, beta, warm)
        total_it += it
        return rate, dist, out

    beta_hi = 1.0
    rate_hi, dist_hi, w = ba(beta_hi, w)
    while dist_hi > D and beta_hi < 1e9:
        beta_hi *= 2.0
        rate_hi, dist_hi, w = ba(beta_hi, w)
    beta_lo = 0.0
    # invariant: `feas` holds an evaluated point with distortion <= D (up to
    # a grazing 1e-13) whose supporting-line correction gives the value
    feas = (beta_hi, rate_hi, dist_hi, w)

    for _ in range(100):
        if beta_hi - beta_lo < 1e-10 * max(beta_hi, 1.0):
            break
        beta = 0.5 * (beta_lo + beta_hi)
        rate, dist, w = ba(beta, w)
        if abs(dist - D) < 1e-13:
            feas = (beta, rate, dist, w)
            break
        if dist > D:
            beta_lo = beta
        else:
            beta_hi = beta
            feas = (beta, rate, dist, w)
        if total_it > max_iter:
            break

    beta, rate, dist, w = feas
    value = max(rate + beta * (dist - D), 0.0)
    status = "converged" if total_it <= max_iter else "boundary"
    return RdSolution(value, w, status, total_it, abs(dist - D))


def rd_binary_hamming(p: float, D: float) -> float:
    """Closed-form binary-source Hamming rate-distortion function.

    Degenerate sources (p of 0 or 1) need zero rate at any distortion level.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("rd_binary_hamming: source parameter must lie in [0, 1]")
    if D < 0:
        raise ValueError("rd_binary_hamming: distortion level must be nonnegative")
    if D >= min(p, 1.0 - p):
        return 0.0
    return max(binary_entropy(p) - binary_entropy(D), 0.0)


def binary_hamming_sum_rate(p: float, R1: float, D1: float, D2: float) -> float:
    """Closed-form two-layer minimum sum rate for a binary source, Hamming pair.

    Valid when the first-layer cap is loose enough to be feasible
    (R1 >= R(p, D1)); the refinement then costs exactly R(p, D2).
    """
    need = rd_binary_hamming(p, D1)
    if R1 < need - 1e-9:
        return math.inf
    return rd_binary_hamming(p, D2)


# ---------------------------------------------------------------------------
# two-layer sum-rate program
# ---------------------------------------------------------------------------


class _SumRateProblem:
    """Workspace for min I(X; Y1, Y2) under two distortion caps and a layer-1 rate cap."""

    def __init__(self, q: Distribution, d1: DistortionMeasure, d2: DistortionMeasure,
                 R1: float, D1: float, D2: float) -> None:
        if d1.rows != q.alphabet_size or d2.rows != q.alphabet_size:
            raise DimensionError("min_sum_rate: distortion rows must match the source alphabet")
        self.px = q.probs
        self.kx = q.alphabet_size
        self.ka = d1.cols
        self.kb = d2.cols
        self.cells = self.ka * self.kb
        # per-cell distortion tables, cell index = a * kb + b
        self.d1c = np.repeat(d1.matrix, self.kb, axis=1)
        self.d2c = np.tile(d2.matrix, (1, self.ka))
        self.R1 = R1
        self.D1 = D1
        self.D2 = D2

    def stats(self, w: np.ndarray):
        px = self.px
        m = px @ w
        joint = px[:, None] * w
        i_joint = float(_xlog2x(joint).sum() - _xlog2x(px).sum() - _xlog2x(m).sum())
        wa = w.reshape(self.kx, self.ka, self.kb).sum(axis=2)
        ma = px @ wa
        ja = px[:, None] * wa
        i1 = float(_xlog2x(ja).sum() - _xlog2x(px).sum() - _xlog2x(ma).sum())
        ed1 = float((px[:, None] * w * self.d1c).sum())
        ed2 = float((px[:, None] * w * self.d2c).sum())
        return i_joint, i1, ed1, ed2, m, wa, ma

    def violations(self, w: np.ndarray) -> np.ndarray:
        _, i1, ed1, ed2, *_ = self.stats(w)
        return np.array([ed1 - self.D1, ed2 - self.D2, i1 - self.R1])

    def lagrangian(self, w: np.ndarray, lam: np.ndarray) -> float:
        i_joint, i1, ed1, ed2, *_ = self.stats(w)
        return i_joint + lam[0] * ed1 + lam[1] * ed2 + lam[2] * i1

    def grad_scaled(self, w: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Gradient of the Lagrangian divided by the row weights px."""
        m = self.px @ w
        wa = w.reshape(self.kx, self.ka, self.kb).sum(axis=2)
        ma = self.px @ wa
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.log2(np.maximum(w, _LOG_FLOOR)) - np.log2(np.maximum(m, _LOG_FLOOR))[None, :]
            ga = np.log2(np.maximum(wa, _LOG_FLOOR)) - np.log2(np.maximum(ma, _LOG_FLOOR))[None, :]
        g = g + lam[2] * np.repeat(ga, self.kb, axis=1)
        g = g + lam[0] * self.d1c + lam[1] * self.d2c
        return g

    def fw_gap(self, w: np.ndarray, lam: np.ndarray) -> float:
        """Frank-Wolfe gap of the Lagrangian at w; certifies a dual lower bound."""
        g = self.grad_scaled(w, lam)
        per_row = (g * w).sum(axis=1) - g.min(axis=1)
        return float((self.px * per_row).sum())

    def mirror_steps(self, w: np.ndarray, lam: np.ndarray, steps: int,
                     eta0: float = 0.5) -> tuple[np.ndarray, int]:
        """Backtracking exponentiated-gradient descent on the Lagrangian."""
        f = self.lagrangian(w, lam)
        eta = eta0
        used = 0
        for _ in range(steps):
            g = self.grad_scaled(w, lam)
            g = g - g.min(axis=1, keepdims=True)
            accepted = False
            for _ in range(30):
                cand = _normalize_rows(w * np.exp2(-eta * g))
                f_cand = self.lagrangian(cand, lam)
                used += 1
                if f_cand <= f - 1e-15:
                    w, f = cand, f_cand
                    eta = min(eta * 1.6, 64.0)
                    accepted = True
                    break
                eta *= 0.5
                if eta < 1e-14:
                    break
            if not accepted:
                break
        return w, used


def _binary_hamming_markov_start(px: np.ndarray, D1: float, D2: float) -> np.ndarray | None:
    """Two-layer test channel achieving both layer rates for a binary source.

    Builds the chain Y1 -> Y2 -> X with independent flips: Y1 ~ Bern(pi1),
    Y2 = Y1 xor Bern(xi), X = Y2 xor Bern(D2).  Both (X, Y1) and (X, Y2) are
    then the one-shot optimal test channels at D1 and D2, so the start is
    feasible even when the layer-1 cap is tight.
    """
    p = float(px[1])
    if not (0.0 < D2 <= D1 < min(p, 1.0 - p)) or D2 >= 0.5:
        return None
    pi1 = (p - D1) / (1.0 - 2.0 * D1)
    xi = (D1 - D2) / (1.0 - 2.0 * D2)
    if not (0.0 < pi1 < 1.0 and 0.0 <= xi < 0.5):
        return None
    pa = np.array([1.0 - pi1, pi1])
    bsc = lambda e: np.array([[1.0 - e, e], [e, 1.0 - e]])
    joint = pa[:, None, None] * bsc(xi)[:, :, None] * bsc(D2)[None, :, :]  # (a, b, x)
    w = joint.transpose(2, 0, 1) / px[:, None, None]
    return w.reshape(2, 4)


def min_sum_rate(
    q: Distribution,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    R1: float,
    D1: float,
    D2: float,
    *,
    outer_iters: int = 220,
    inner_steps: int = 24,
    polish_steps: int = 900,
    max_iter: int = 100_000,
) -> SumRateSolution:
    """Minimum sum rate of a two-layer refinement code, in bits.

    Minimizes I(X; Y1, Y2) over joint test channels subject to
    E[d1(X, Y1)] <= D1, E[d2(X, Y2)] <= D2 and I(X; Y1) <= R1.  Returns an
    infeasible sentinel (value = inf) when the layer-1 cap is below the
    rate-distortion function at D1, since the constraint set is then empty.
    """
    if D1 < 0 or D2 < 0:
        raise ValueError("min_sum_rate: distortion levels must be nonnegative")
    if R1 < 0:
        raise ValueError("min_sum_rate: rate cap must be nonnegative")
    prob = _SumRateProblem(q, d1, d2, R1, D1, D2)
    px = prob.px

    rd1 = rd_function(q, d1, D1)
    if R1 < rd1.value - 1e-9:
        empty = np.zeros((prob.kx, prob.cells))
        return SumRateSolution(math.inf, empty, "infeasible", rd1.iterations, math.inf)

    # zero-rate fast path: one reconstruction pair satisfies both caps
    col1 = px @ d1.matrix
    col2 = px @ d2.matrix
    if col1.min() <= D1 + 1e-14 and col2.min() <= D2 + 1e-14:
        w = np.zeros((prob.kx, prob.cells))
        w[:, int(col1.argmin()) * prob.kb + int(col2.argmin())] = 1.0
        return SumRateSolution(0.0, w, "boundary", 0, 0.0)

    # feasible product reference: layer-1 RD channel times layer-2 RD channel
    rd2 = rd_function(q, d2, D2)
    w_feas = np.einsum("xa,xb->xab", rd1.optimizer, rd2.optimizer).reshape(prob.kx, prob.cells)
    w_feas = _normalize_rows(np.maximum(w_feas, 1e-30))

    feas_tol = 1e-9

    def repaired(w: np.ndarray) -> np.ndarray | None:
        v = prob.violations(w)
        if np.all(v <= feas_tol):
            return w
        lo, hi = 0.0, 1.0
        if not np.all(prob.violations(w_feas) <= feas_tol):
            return None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            cand = (1.0 - mid) * w + mid * w_feas
            if np.all(prob.violations(cand) <= feas_tol):
                hi = mid
            else:
                lo = mid
        return (1.0 - hi) * w + hi * w_feas

    w = _binary_hamming_markov_start(px, D1, D2) if (
        prob.kx == 2 and prob.ka == 2 and prob.kb == 2
        and np.array_equal(d1.matrix, DistortionMeasure.hamming(2).matrix)
        and np.array_equal(d2.matrix, DistortionMeasure.hamming(2).matrix)
        and q.full_support
    ) else None
    if w is None:
        w = w_feas.copy()
    w = _normalize_rows(np.maximum(w, 1e-12))

    best_value = math.inf
    best_w = w_feas
    for cand in (w_feas, w):
        r = repaired(cand)
        if r is not None:
            val = prob.stats(r)[0]
            if val < best_value:
                best_value, best_w = val, r

    lam = np.zeros(3)
    phi_best = -math.inf
    total = 0
    prev_phi = -math.inf
    stall = 0
    for t in range(1, outer_iters + 1):
        w, used = prob.mirror_steps(w, lam, inner_steps)
        total += used
        viol = prob.violations(w)
        phi = prob.lagrangian(w, lam) - prob.fw_gap(w, lam) - float(
            lam[0] * D1 + lam[1] * D2 + lam[2] * R1
        )
        phi_best = max(phi_best, phi)
        if t % 8 == 0:
            r = repaired(w)
            if r is not None:
                val = prob.stats(r)[0]
                if val < best_value:
                    best_value, best_w = val, r
        step = 2.0 / math.sqrt(t)
        lam = np.maximum(lam + step * viol, 0.0)
        if abs(phi - prev_phi) < 1e-9:
            stall += 1
            if stall > 20 and t > 60:
                break
        else:
            stall = 0
        prev_phi = phi
        if total > max_iter:
            break

    # exact-penalty polish from the dual iterate
    rho = float(max(10.0, 4.0 * lam.max() + 4.0))
    targets = np.array([D1, D2, R1])

    def f_pen(wc: np.ndarray) -> float:
        i_joint, i1, ed1, ed2, *_ = prob.stats(wc)
        v = np.maximum(np.array([ed1 - D1, ed2 - D2, i1 - R1]), 0.0)
        return i_joint + rho * float(v.sum())

    def grad_pen(wc: np.ndarray) -> np.ndarray:
        v = prob.violations(wc)
        lam_eff = rho * (v > 0).astype(np.float64)
        return prob.grad_scaled(wc, lam_eff)

    f = f_pen(w)
    eta = 0.25
    for _ in range(polish_steps):
        g = grad_pen(w)
        g = g - g.min(axis=1, keepdims=True)
        improved = False
        for _ in range(25):
            cand = _normalize_rows(w * np.exp2(-eta * g))
            fc = f_pen(cand)
            total += 1
            if fc < f - 1e-15:
                w, f = cand, fc
                eta = min(eta * 1.5, 32.0)
                improved = True
                break
            eta *= 0.5
            if eta < 1e-13:
                break
        if not improved:
            break
        if total % 40 == 0:
            r = repaired(w)
            if r is not None:
                val = prob.stats(r)[0]
                if val < best_value:
                    best_value, best_w = val, r
        if total > max_iter:
            break

    r = repaired(w)
    if r is not None:
        val = prob.stats(r)[0]
        if val < best_value:
            best_value, best_w = val, r

    gap = best_value - phi_best if math.isfinite(phi_best) else math.inf
    status = "converged" if gap <= 1e-5 or best_value <= 1e-9 else "boundary"
    return SumRateSolution(float(max(best_value, 0.0)), best_w, status, total, float(max(gap, 0.0)))


def _grid_rows(grid: int, cells: int) -> np.ndarray:
    rows: list[tuple[int, ...]] = []

    def rec(prefix: list[int], left: int, parts: int) -> None:
        if parts == 1:
            rows.append(tuple(prefix + [left]))
            return
        for v in range(left, -1, -1):
            prefix.append(v)
            rec(prefix, left - v, parts - 1)
            prefix.pop()

    rec([], grid, cells)
    return np.asarray(rows, dtype=np.float64) / grid


def min_sum_rate_oracle(
    q: Distribution,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    R1: float,
    D1: float,
    D2: float,
    grid: int = 20,
    *,
    max_points: float = 2e8,
    chunk: int = 128,
) -> float:
    """Brute-force upper bound on ``min_sum_rate`` over a simplex grid.

    Every conditional row is restricted to the grid with the given
    denominator; the minimum objective among feasible grid channels is
    returned (inf when none is feasible).  Only tiny alphabets are
    supported; a combinatorial guard refuses anything larger.
    """
    if q.alphabet_size > 3 or d1.cols > 3 or d2.cols > 3:
        raise CapExceededError("oracle only supports alphabet sizes up to 3")
    if grid > 24:
        raise CapExceededError("oracle only supports grid denominators up to 24")
    if d1.rows != q.alphabet_size or d2.rows != q.alphabet_size:
        raise DimensionError("min_sum_rate_oracle: distortion rows must match the source")
    kx, ka, kb = q.alphabet_size, d1.cols, d2.cols
    cells = ka * kb
    rows = _grid_rows(grid, cells)
    m_rows = rows.shape[0]
    if float(m_rows) ** kx > max_points:
        raise CapExceededError(
            f"{m_rows}^{kx} grid channels exceed the oracle cap of {max_points:g}"
        )
    px = q.probs
    d1c = np.repeat(d1.matrix, kb, axis=1)
    d2c = np.tile(d2.matrix, (1, ka))

    h_rows = -_xlog2x(rows).sum(axis=1)
    rows_a = rows.reshape(m_rows, ka, kb).sum(axis=2)
    h_rows_a = -_xlog2x(rows_a).sum(axis=1)
    ed1_rows = rows @ d1c.T  # (m, kx)
    ed2_rows = rows @ d2c.T
    skip_i1 = R1 >= math.log2(ka) - 1e-12

    best = math.inf
    if kx == 2:
        for start in range(0, m_rows, chunk):
            sl = slice(start, min(start + chunk, m_rows))
            r0 = rows[sl]
            ed1 = px[0] * ed1_rows[sl, 0][:, None] + px[1] * ed1_rows[:, 1][None, :]
            ed2 = px[0] * ed2_rows[sl, 0][:, None] + px[1] * ed2_rows[:, 1][None, :]
            mask = (ed1 <= D1 + 1e-12) & (ed2 <= D2 + 1e-12)
            if not mask.any():
                continue
            m = px[0] * r0[:, None, :] + px[1] * rows[None, :, :]
            hm = -_xlog2x(m).sum(axis=2)
            obj = hm - (px[0] * h_rows[sl][:, None] + px[1] * h_rows[None, :])
            if not skip_i1:
                ma = px[0] * rows_a[sl][:, None, :] + px[1] * rows_a[None, :, :]
                hma = -_xlog2x(ma).sum(axis=2)
                i1 = hma - (px[0] * h_rows_a[sl][:, None] + px[1] * h_rows_a[None, :])
                mask &= i1 <= R1 + 1e-12
            if mask.any():
                best = min(best, float(obj[mask].min()))
    else:
        idx = [range(m_rows)] * kx
        import itertools

        for combo in itertools.product(*idx):
            w = rows[list(combo)]
            ed1 = float((px[:, None] * w * d1c).sum())
            ed2 = float((px[:, None] * w * d2c).sum())
            if ed1 > D1 + 1e-12 or ed2 > D2 + 1e-12:
                continue
            wa = w.reshape(kx, ka, kb).sum(axis=2)
            if not skip_i1 and _mutual_information(px, wa) > R1 + 1e-12:
                continue
            best = min(best, _mutual_information(px, w))
    return best
