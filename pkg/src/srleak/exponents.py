"""Leakage exponents and region queries.

The asymptotic normalized-leakage floor of the two-layer encrypted coding
scheme is governed by maximizations over the divergence ball
{Q : D(Q || P) <= alpha}:

* layer 1: max over the ball of {R(Q, D1) - r1}^+,
* both layers, inner bound: max of
  {R(Q, D1) - r1}^+ + {R(Q, R1, D1, D2) - R(Q, D1) - r2}^+,
* both layers, outer bound: max of {R(Q, R1, D1, D2) - r1 - r2}^+.

Under the expected-distortion reliability criterion the ball degenerates to
the point {P} and the same three clamped expressions apply.

For binary sources under Hamming distortion every inner quantity has a
closed form, so ball extremizations reduce to exact one-dimensional searches
over the Bernoulli parameter interval cut out by the divergence constraint.
General alphabets fall back to multi-start ascent inside the ball plus a
deterministic simplex grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq

from .errors import RateConditionError
from .probcore import (
    Distribution,
    DistortionMeasure,
    binary_kl,
    kl_divergence,
)
from .rdsolver import min_sum_rate, rd_binary_hamming, rd_function

Criterion = Literal["jep", "expected"]
Method = Literal["auto", "closed_form", "solver"]

VERDICT_INSIDE = "inside_inner"
VERDICT_BETWEEN = "between"
VERDICT_OUTSIDE = "outside_outer"


@dataclass(frozen=True)
class SystemSpec:
    """Full description of a two-layer cipher-coding operating point."""

    source: Distribution
    d1: DistortionMeasure
    d2: DistortionMeasure
    D1: float
    D2: float
    R1: float
    R2: float
    r1: float
    r2: float
    alpha: float

    def __post_init__(self) -> None:
        if self.d1.rows != self.source.alphabet_size or self.d2.rows != self.source.alphabet_size:
            raise ValueError("distortion matrices must match the source alphabet")
        if not self.D2 < self.D1:
            raise ValueError("the refinement target D2 must be strictly below D1")
        if min(self.D2, self.R1, self.R2, self.r1, self.r2) < 0:
            raise ValueError("distortion levels and rates must be nonnegative")
        if self.alpha < 0:
            raise ValueError("the reliability exponent alpha must be nonnegative")
        if not self.source.full_support:
            raise ValueError("the source must have full support")

    @property
    def is_binary_hamming(self) -> bool:
        return (
            self.source.alphabet_size == 2
            and self.d1 == DistortionMeasure.hamming(2)
            and self.d2 == DistortionMeasure.hamming(2)
        )

    def with_alpha(self, alpha: float) -> "SystemSpec":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class RegionPoint:
    """A pair of normalized leakage budgets (bits per symbol)."""

    L1: float
    L2: float

    def __post_init__(self) -> None:
        if self.L1 < 0 or self.L2 < 0:
            raise ValueError("leakage budgets must be nonnegative")


@dataclass(frozen=True)
class RegionBoundary:
    lambda1: float
    lambda2_in: float
    lambda2_out: float
    matched: bool

    def __post_init__(self) -> None:
        if self.lambda2_out > self.lambda2_in + 1e-9:
            raise ValueError("outer-bound exponent cannot exceed the inner one")


@dataclass(frozen=True)
class BallOptimum:
    value: float
    argopt: Distribution


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


# ---------------------------------------------------------------------------
# divergence-ball extremization
# ---------------------------------------------------------------------------


def binary_ball_interval(p: float, alpha: float) -> tuple[float, float]:
    """The Bernoulli-parameter interval {q : D_b(q || p) <= alpha}."""
    if alpha <= 0.0:
        return p, p
    lo = 0.0 if alpha >= -math.log2(1.0 - p) else brentq(
        lambda q: binary_kl(q, p) - alpha, 0.0, p, xtol=1e-15
    )
    hi = 1.0 if alpha >= -math.log2(p) else brentq(
        lambda q: binary_kl(q, p) - alpha, p, 1.0, xtol=1e-15
    )
    return float(lo), float(hi)


def _golden_refine(f: Callable[[float], float], lo: float, hi: float, iters: int = 90):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a < 1e-15:
            break
    x = 0.5 * (a + b)
    return x, f(x)


def _ball_max_binary(
    p: Distribution,
    alpha: float,
    objective: Callable[[Distribution], float],
    grid_points: int,
    entropy_monotone: bool,
) -> BallOptimum:
    pb = float(p.probs[1])
    q_lo, q_hi = binary_ball_interval(pb, alpha)

    def f(qv: float) -> float:
        return objective(Distribution.bernoulli(qv))

    if q_hi - q_lo < 1e-15:
        return BallOptimum(f(pb), Distribution.bernoulli(pb))

    best_q, best_v = pb, -math.inf
    if not entropy_monotone:
        # dense scan plus local refinement for arbitrary objectives
        qs = np.linspace(q_lo, q_hi, grid_points)
        vals = [f(float(qv)) for qv in qs]
        k = int(np.argmax(vals))
        best_q, best_v = float(qs[k]), vals[k]
        a = float(qs[max(k - 1, 0)])
        b = float(qs[min(k + 1, grid_points - 1)])
        if b > a:
            xq, xv = _golden_refine(f, a, b)
            if xv > best_v:
                best_q, best_v = xq, xv
    # deterministic candidates: interval ends, the source itself, and the
    # entropy maximizer when the ball reaches it; for objectives monotone in
    # the binary entropy these four points contain every extremum, so the
    # scan above is skipped entirely
    for cand in (q_lo, q_hi, pb, min(max(0.5, q_lo), q_hi)):
        cv = f(cand)
        if cv > best_v:
            best_q, best_v = cand, cv
    return BallOptimum(best_v, Distribution.bernoulli(best_q))


def _project_to_ball(q: np.ndarray, p: Distribution, alpha: float) -> np.ndarray:
    """Pull q toward p along the mixture line until it enters the ball."""
    qd = Distribution(q / q.sum())
    if kl_divergence(qd, p) <= alpha:
        return qd.probs.copy()
    lo, hi = 0.0, 1.0  # weight on p
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        mix = (1.0 - mid) * qd.probs + mid * p.probs
        if kl_divergence(Distribution(mix), p) <= alpha:
            hi = mid
        else:
            lo = mid
    return (1.0 - hi) * qd.probs + hi * p.probs


def _simplex_grid(k: int, resolution: int):
    def rec(prefix, left, parts):
        if parts == 1:
            yield prefix + [left]
            return
        for v in range(left + 1):
            yield from rec(prefix + [v], left - v, parts - 1)

    for comp in rec([], resolution, k):
        yield np.asarray(comp, dtype=np.float64) / resolution


def _ball_max_general(
    p: Distribution,
    alpha: float,
    objective: Callable[[Distribution], float],
    *,
    starts: int,
    ascent_steps: int,
    grid_resolution: int,
    seed: int,
) -> BallOptimum:
    best_q = p.probs.copy()
    best_v = objective(p)
    k = p.alphabet_size

    candidates: list[np.ndarray] = []
    if k <= 3 and grid_resolution > 0:
        for g in _simplex_grid(k, grid_resolution):
            if np.all(g >= 0) and abs(g.sum() - 1.0) < 1e-9:
                gq = np.maximum(g, 1e-12)
                gq /= gq.sum()
                if kl_divergence(Distribution(gq), p) <= alpha:
                    candidates.append(gq)
    rng = np.random.default_rng(seed)
    for _ in range(starts):
        direction = rng.dirichlet(np.ones(k))
        candidates.append(_project_to_ball(0.5 * p.probs + 0.5 * direction, p, alpha))
    for i in range(k):
        vertex = np.full(k, 1e-9)
        vertex[i] = 1.0
        candidates.append(_project_to_ball(vertex / vertex.sum(), p, alpha))

    for q0 in candidates:
        v0 = objective(Distribution(q0))
        if v0 > best_v:
            best_q, best_v = q0, v0

    # finite-difference mirror ascent from the best candidate, projected back
    q = best_q.copy()
    step = 0.25
    for _ in range(ascent_steps):
        base = objective(Distribution(q))
        grad = np.zeros(k)
        eps = 1e-6
        for i in range(k):
            bump = q.copy()
            bump[i] += eps
            bump /= bump.sum()
            grad[i] = (objective(Distribution(_project_to_ball(bump, p, alpha))) - base) / eps
        cand = q * np.exp(step * (grad - grad.max()))
        cand = _project_to_ball(cand / cand.sum(), p, alpha)
        cv = objective(Distribution(cand))
        if cv > base + 1e-14:
            q = cand
            if cv > best_v:
                best_q, best_v = cand, cv
            step = min(step * 1.5, 4.0)
        else:
            step *= 0.5
            if step < 1e-10:
                break
    return BallOptimum(best_v, Distribution(best_q))


def kl_ball_maximize(
    p: Distribution,
    alpha: float,
    objective: Callable[[Distribution], float],
    *,
    grid_points: int = 801,
    starts: int = 24,
    ascent_steps: int = 60,
    grid_resolution: int = 60,
    seed: int = 0,
    entropy_monotone: bool = False,
) -> BallOptimum:
    """Maximize a scalar objective over {Q : D(Q || P) <= alpha}.

    Binary alphabets use an exact interval search (boundary roots by
    bisection, dense scan plus golden-section refinement).  Larger alphabets
    use multi-start projected ascent with a deterministic simplex grid
    fallback; the ``seed`` fully determines the randomized starts.  Setting
    ``entropy_monotone`` asserts that the objective's extrema over any
    Bernoulli-parameter interval sit at its ends or at the entropy
    maximizer, which skips the scan (binary alphabets only).
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if not p.full_support:
        raise ValueError("the ball center must have full support")
    if alpha == 0.0:
        return BallOptimum(objective(p), p)
    if p.alphabet_size == 2:
        return _ball_max_binary(p, alpha, objective, grid_points, entropy_monotone)
    return _ball_max_general(
        p, alpha, objective,
        starts=starts, ascent_steps=ascent_steps,
        grid_resolution=grid_resolution, seed=seed,
    )


def kl_ball_minimize(
    p: Distribution,
    alpha: float,
    objective: Callable[[Distribution], float],
    **kwargs,
) -> BallOptimum:
    """Minimize a scalar objective over the divergence ball (mirror of maximize)."""
    out = kl_ball_maximize(p, alpha, lambda q: -objective(q), **kwargs)
    return BallOptimum(-out.value, out.argopt)


# ---------------------------------------------------------------------------
# rate-function backends
# ---------------------------------------------------------------------------


class _RateBackend:
    """Evaluates R(Q, D) and the two-layer sum rate, closed form or solver."""

    def __init__(self, spec: SystemSpec, method: Method) -> None:
        if method == "auto":
            method = "closed_form" if spec.is_binary_hamming else "solver"
        if method == "closed_form" and not spec.is_binary_hamming:
            raise ValueError("closed-form backend requires a binary source with Hamming measures")
        self.method = method
        self.spec = spec
        self._rd_cache: dict[tuple[bytes, int], float] = {}
        self._sum_cache: dict[bytes, float] = {}

    def rd(self, q: Distribution, layer: int) -> float:
        D = self.spec.D1 if layer == 1 else self.spec.D2
        if self.method == "closed_form":
            return rd_binary_hamming(float(q.probs[1]), D)
        key = (q.probs.tobytes(), layer)
        if key not in self._rd_cache:
            d = self.spec.d1 if layer == 1 else self.spec.d2
            self._rd_cache[key] = rd_function(q, d, D).value
        return self._rd_cache[key]

    def sum_rate(self, q: Distribution) -> float:
        if self.method == "closed_form":
            # a Bernoulli source under Hamming measures is successively
            # refinable, so the two-layer optimum equals the one-shot rate
            # at the finer target whenever the layer-1 cap is feasible
            need = rd_binary_hamming(float(q.probs[1]), self.spec.D1)
            if self.spec.R1 < need - 1e-12:
                return math.inf
            return rd_binary_hamming(float(q.probs[1]), self.spec.D2)
        key = q.probs.tobytes()
        if key not in self._sum_cache:
            sol = min_sum_rate(
                q, self.spec.d1, self.spec.d2, self.spec.R1, self.spec.D1, self.spec.D2
            )
            self._sum_cache[key] = sol.value
        return self._sum_cache[key]


def rate_distortion_value(spec: SystemSpec, q: Distribution, layer: int, method: Method = "auto") -> float:
    """R(Q, D_layer) for a candidate source law, using the spec's measures."""
    return _RateBackend(spec, method).rd(q, layer)


def sum_rate_value(spec: SystemSpec, q: Distribution, method: Method = "auto") -> float:
    """Two-layer minimum sum rate for a candidate source law under the spec."""
    return _RateBackend(spec, method).sum_rate(q)


def _ball_kwargs(method: Method) -> dict:
    # closed-form rate objectives are monotone in the binary entropy, so the
    # four-candidate fast path is exact; the solver backend pays milliseconds
    # per evaluation and gets a coarse scan instead
    if method == "solver":
        return {"grid_points": 41, "starts": 6, "ascent_steps": 12, "grid_resolution": 12}
    return {"entropy_monotone": True}


def max_rd_over_ball(spec: SystemSpec, method: Method = "auto") -> float:
    """Largest layer-1 rate-distortion value over the divergence ball."""
    backend = _RateBackend(spec, method)
    return kl_ball_maximize(
        spec.source, spec.alpha, lambda q: backend.rd(q, 1), **_ball_kwargs(backend.method)
    ).value


def _require_layer1_rate(spec: SystemSpec, backend: _RateBackend) -> None:
    ball_max = kl_ball_maximize(
        spec.source, spec.alpha, lambda q: backend.rd(q, 1), **_ball_kwargs(backend.method)
    ).value
    if not spec.R1 > ball_max - 1e-12:
        raise RateConditionError(
            f"layer-1 rate {spec.R1} must strictly exceed the ball maximum "
            f"of the rate-distortion function ({ball_max:.6f})"
        )


def leakage_exponent_m1(spec: SystemSpec, method: Method = "auto") -> float:
    """Normalized maximal-leakage exponent of the first message."""
    backend = _RateBackend(spec, method)
    obj = lambda q: _pos(backend.rd(q, 1) - spec.r1)
    return kl_ball_maximize(spec.source, spec.alpha, obj, **_ball_kwargs(backend.method)).value


def leakage_exponent_joint(spec: SystemSpec, method: Method = "auto") -> float:
    """Inner-bound exponent for the leakage of both messages together."""
    backend = _RateBackend(spec, method)
    _require_layer1_rate(spec, backend)

    def obj(q: Distribution) -> float:
        rd1 = backend.rd(q, 1)
        return _pos(rd1 - spec.r1) + _pos(backend.sum_rate(q) - rd1 - spec.r2)

    return kl_ball_maximize(spec.source, spec.alpha, obj, **_ball_kwargs(backend.method)).value


def leakage_exponent_joint_outer(spec: SystemSpec, method: Method = "auto") -> float:
    """Outer-bound exponent for the leakage of both messages together."""
    backend = _RateBackend(spec, method)
    _require_layer1_rate(spec, backend)
    obj = lambda q: _pos(backend.sum_rate(q) - spec.r1 - spec.r2)
    return kl_ball_maximize(spec.source, spec.alpha, obj, **_ball_kwargs(backend.method)).value


def expected_distortion_exponents(
    spec: SystemSpec, method: Method = "auto"
) -> tuple[float, float, float]:
    """The three leakage exponents under the expected-distortion criterion.

    These are the same clamped expressions evaluated at the source itself
    (no divergence ball).  Requires the strict rate margins of the
    expected-distortion regime.
    """
    backend = _RateBackend(spec, method)
    rd1 = backend.rd(spec.source, 1)
    if not spec.R1 > rd1 - 1e-12:
        raise RateConditionError(
            f"layer-1 rate {spec.R1} must strictly exceed R(P, D1) = {rd1:.6f}"
        )
    total = backend.sum_rate(spec.source)
    if not spec.R1 + spec.R2 > total - 1e-12:
        raise RateConditionError(
            f"sum rate {spec.R1 + spec.R2} must strictly exceed the two-layer minimum {total:.6f}"
        )
    omega1 = _pos(rd1 - spec.r1)
    omega2 = omega1 + _pos(total - rd1 - spec.r2)
    omega2_out = _pos(total - spec.r1 - spec.r2)
    return omega1, omega2, omega2_out


def divergence_ball_cap(p: Distribution) -> float:
    """An alpha beyond which the divergence ball is the whole simplex."""
    return float(math.log2(1.0 / float(p.probs.min())) + 1e-9)


def leakage_plateau_thresholds(
    spec: SystemSpec,
    method: Method = "auto",
    *,
    scan_points: int = 200,
    tol: float = 1e-8,
    value_eps: float = 5e-13,
) -> tuple[float, float]:
    """Smallest alphas beyond which the two leakage exponents stop growing.

    Detected by a log-spaced scan of the monotone exponent curves followed by
    bisection on the predicate "curve within ``value_eps`` of its terminal
    value".  The exponent curves are flat (quadratic) at the plateau onset,
    so the alpha resolution is roughly the square root of ``value_eps``.
    For a binary source under Hamming measures the threshold equals the
    divergence from the entropy maximizer, D_b(0.5 || p), whenever the curve
    is not flat everywhere.
    """
    cap = divergence_ball_cap(spec.source)
    out = []
    for fn in (leakage_exponent_m1, leakage_exponent_joint):
        f = lambda a: fn(spec.with_alpha(a), method)
        plateau = f(cap)
        eps = value_eps * max(1.0, abs(plateau))
        if f(0.0) >= plateau - eps:
            out.append(0.0)
            continue
        alphas = np.logspace(math.log10(1e-6), math.log10(cap), scan_points)
        hit = cap
        lo = 0.0
        for a in alphas:
            if f(float(a)) >= plateau - eps:
                hit = float(a)
                break
            lo = float(a)
        hi = hit
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) >= plateau - eps:
                hi = mid
            else:
                lo = mid
        out.append(hi)
    return out[0], out[1]


def binary_plateau_alpha(p: float) -> float:
    """Closed-form plateau threshold for a Bernoulli(p) source, Hamming pair."""
    return binary_kl(0.5, p)


def region_boundary(spec: SystemSpec, criterion: Criterion, method: Method = "auto") -> RegionBoundary:
    """The two-threshold boundary of the achievable leakage region."""
    if criterion == "jep":
        l1 = leakage_exponent_m1(spec, method)
        l2_in = leakage_exponent_joint(spec, method)
        l2_out = leakage_exponent_joint_outer(spec, method)
    elif criterion == "expected":
        l1, l2_in, l2_out = expected_distortion_exponents(spec, method)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return RegionBoundary(l1, l2_in, l2_out, matched=abs(l2_in - l2_out) <= 1e-9)


def region_check(
    spec: SystemSpec, point: RegionPoint, criterion: Criterion, method: Method = "auto"
) -> str:
    """Classify a leakage pair against the inner and outer region bounds."""
    b = region_boundary(spec, criterion, method)
    eps = 1e-12
    if point.L1 >= b.lambda1 - eps and point.L2 >= b.lambda2_in - eps:
        return VERDICT_INSIDE
    if point.L1 >= b.lambda1 - eps and point.L2 >= b.lambda2_out - eps:
        return VERDICT_BETWEEN
    return VERDICT_OUTSIDE


def partial_secrecy_holds(spec: SystemSpec, criterion: Criterion, method: Method = "auto") -> bool:
    """True when the key rates are small enough that inner and outer bounds match.

    Under the joint-excess-distortion criterion this requires, for every Q in
    the divergence ball, r1 <= R(Q, D1) and r2 <= R(Q, R1, D1, D2) - R(Q, D1);
    the expected-distortion criterion checks the same conditions at P alone.
    """
    backend = _RateBackend(spec, method)
    if criterion == "expected":
        rd1 = backend.rd(spec.source, 1)
        diff = backend.sum_rate(spec.source) - rd1
        return spec.r1 <= rd1 + 1e-12 and spec.r2 <= diff + 1e-12
    if criterion != "jep":
        raise ValueError(f"unknown criterion {criterion!r}")
    kw = _ball_kwargs(backend.method)
    min_rd1 = kl_ball_minimize(spec.source, spec.alpha, lambda q: backend.rd(q, 1), **kw).value
    min_diff = kl_ball_minimize(
        spec.source, spec.alpha, lambda q: backend.sum_rate(q) - backend.rd(q, 1), **kw
    ).value
    return spec.r1 <= min_rd1 + 1e-12 and spec.r2 <= min_diff + 1e-12


def key_rate_thresholds(spec: SystemSpec, method: Method = "auto") -> tuple[float, float]:
    """Largest key rates for which the inner and outer regions coincide."""
    backend = _RateBackend(spec, method)
    kw = _ball_kwargs(backend.method)
    t1 = kl_ball_minimize(spec.source, spec.alpha, lambda q: backend.rd(q, 1), **kw).value
    t2 = kl_ball_minimize(
        spec.source, spec.alpha, lambda q: backend.sum_rate(q) - backend.rd(q, 1), **kw
    ).value
    return t1, t2
