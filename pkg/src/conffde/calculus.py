"""Conformable derivative and integral operators of order alpha in (0, 1].

The derivative of order alpha at t > 0 is the limit of
(f(t + eps * t^(1-alpha)) - f(t)) / eps as eps -> 0, which for
differentiable f reduces to t^(1-alpha) * f'(t).  The matching integral
weights the integrand by x^(alpha-1).  Both are provided numerically,
together with a verifier for the calculus identities (linearity, product,
quotient, chain rule, integration by parts, and the fundamental theorem
in both directions).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .errors import ConvergenceError, DomainError, QuadratureError
from .expr import Binary, Constant, Expr, Unary, Variable, evaluate, parse

_MACH_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class AlphaOrder:
    """Fractional order alpha, restricted to (0, 1]."""

    alpha: float

    def __post_init__(self):
        a = self.alpha
        if not isinstance(a, (int, float)) or isinstance(a, bool):
            raise ValueError(f"alpha must be a real number, got {a!r}")
        if not math.isfinite(a) or not (0.0 < a <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {a!r}")
        object.__setattr__(self, "alpha", float(a))

    def __float__(self) -> float:
        return self.alpha


def as_alpha(a: Union[AlphaOrder, float]) -> AlphaOrder:
    return a if isinstance(a, AlphaOrder) else AlphaOrder(a)


@dataclass(frozen=True)
class RealFunction:
    """A scalar function of t, evaluable on the open interval (lo, hi)."""

    fn: Callable[[float], float]
    lo: float = 0.0
    hi: float = math.inf

    def __call__(self, t: float) -> float:
        if not (self.lo < t < self.hi):
            raise DomainError(f"t={t!r} outside function domain ({self.lo}, {self.hi})")
        return self.fn(t)


def as_function(f, lo: float = 0.0, hi: float = math.inf) -> RealFunction:
    """Coerce an Expr, expression string, or callable into a RealFunction."""
    if isinstance(f, RealFunction):
        return f
    if isinstance(f, (Constant, Variable, Unary, Binary)):
        e = f
        return RealFunction(lambda t: evaluate(e, t), lo, hi)
    if isinstance(f, str):
        e = parse(f)
        return RealFunction(lambda t: evaluate(e, t), lo, hi)
    if callable(f):
        return RealFunction(f, lo, hi)
    raise TypeError(f"cannot interpret {type(f).__name__} as a function of t")


# ---------------------------------------------------------------------------
# derivatives


_EPS_LADDER = tuple(10.0 ** -k for k in range(2, 8))  # 1e-2 .. 1e-7


def t_alpha_limit(f, alpha, t: float, *, tol: float = 1e-6) -> float:
    """Order-alpha derivative straight from the limit definition.

    Walks the difference quotient down a geometric eps ladder and applies
    one Richardson pass (the quotient error is linear in eps).  Raises
    ConvergenceError when the extrapolants do not stabilize to tol.
    """
    a = as_alpha(alpha).alpha
    fn = as_function(f)
    if t <= 0.0:
        raise DomainError(f"conformable derivative requires t > 0, got {t}")
    w = t ** (1.0 - a)
    f0 = fn(t)
    quotients = [(fn(t + eps * w) - f0) / eps for eps in _EPS_LADDER]
    extrap = [(10.0 * q1 - q0) / 9.0 for q0, q1 in zip(quotients, quotients[1:])]
    diffs = [abs(x - y) for x, y in zip(extrap, extrap[1:])]
    best = min(range(len(diffs)), key=diffs.__getitem__)
    value = extrap[best + 1]
    if diffs[best] > tol * (1.0 + abs(value)):
        raise ConvergenceError(
            f"difference ladder did not stabilize (best gap {diffs[best]:.3e})"
        )
    return value


def _step_for(fn: RealFunction, t: float, step: Optional[float]) -> float:
    h = 1e-4 * max(1.0, abs(t)) if step is None else float(step)
    h = min(h, 0.25 * t)
    if math.isfinite(fn.lo):
        h = min(h, 0.45 * (t - fn.lo))
    if math.isfinite(fn.hi):
        h = min(h, 0.45 * (fn.hi - t))
    if h <= 0.0:
        raise DomainError(f"no room for a difference stencil around t={t}")
    return h


def _nested(fn: RealFunction, a: float, t: float, level: int, steps: Sequence[float]) -> float:
    if level == 0:
        return fn(t)
    h = steps[level - 1]
    d1 = (_nested(fn, a, t + h, level - 1, steps) - _nested(fn, a, t - h, level - 1, steps)) / (2.0 * h)
    d2 = (_nested(fn, a, t + 0.5 * h, level - 1, steps) - _nested(fn, a, t - 0.5 * h, level - 1, steps)) / h
    return t ** (1.0 - a) * (4.0 * d2 - d1) / 3.0


def t_alpha_reduction(f, alpha, t: float, *, step: Optional[float] = None) -> float:
    """Order-alpha derivative via t^(1-alpha) * f'(t).

    f' comes from central differences at steps h and h/2 combined by
    Richardson extrapolation, with h = 1e-4 * max(1, |t|) by default.
    """
    a = as_alpha(alpha).alpha
    fn = as_function(f)
    if t <= 0.0:
        raise DomainError(f"conformable derivative requires t > 0, got {t}")
    h = _step_for(fn, t, step)
    return _nested(fn, a, t, 1, (h,))


def _noise_ladder(noise: float, base_h: float, wide: float, n: int) -> list[float]:
    # Per-level steps balancing the noise carried up from the level below
    # (sigma/h) against O(h^4) truncation of the Richardson pair.
    steps = [base_h]
    sigma = noise / base_h + (base_h / wide) ** 4 / 30.0
    for _ in range(1, n):
        h = min(sigma ** 0.2 * wide, 0.1 * wide)
        steps.append(h)
        sigma = sigma / h + (h / wide) ** 4 / 30.0
    return steps


def _predicted_noise(noise: float, steps: Sequence[float], wide: float) -> float:
    sigma = noise
    for h in steps:
        sigma = sigma / h + (h / wide) ** 4 / 30.0
    return sigma


def iterated_t_alpha(
    f,
    alpha,
    n: int,
    t: float,
    *,
    tol: float = 1e-5,
    noise: Optional[float] = None,
) -> float:
    """n-fold composition of the order-alpha derivative at t.

    Each level applies t^(1-alpha) * d/dt to the level below on a local
    stencil; the step ladder widens per level to keep amplified rounding
    noise under control.  `noise` is the assumed relative evaluation error
    of f (machine epsilon by default; pass a larger value for functions
    that are themselves numerical, e.g. dense solver output).  Raises
    ConvergenceError when the predicted noise after n levels exceeds tol.
    """
    a = as_alpha(alpha).alpha
    fn = as_function(f)
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if t <= 0.0:
        raise DomainError(f"conformable derivative requires t > 0, got {t}")
    sigma0 = _MACH_EPS if noise is None else max(float(noise), _MACH_EPS)
    wide = math.sqrt(max(1.0, abs(t)))
    if noise is None:
        base_h = 1e-4 * max(1.0, abs(t))  # matches t_alpha_reduction for n = 1
    else:
        base_h = min(sigma0 ** 0.2 * wide, 0.1 * wide)
    steps = _noise_ladder(sigma0, base_h, wide, n)

    room_left = t - fn.lo
    room_right = (fn.hi - t) if math.isfinite(fn.hi) else math.inf
    room = 0.9 * min(room_left, room_right)
    if room <= 0.0:
        raise DomainError(f"t={t} leaves no room inside the function domain")
    reach = sum(steps)
    if reach > room:
        steps = [h * room / reach for h in steps]
    predicted = _predicted_noise(sigma0, steps, wide)
    if predicted > tol:
        raise ConvergenceError(
            f"nested stencils lose too many digits: predicted noise "
            f"{predicted:.2e} exceeds tolerance {tol:.2e} for n={n}"
        )
    return _nested(fn, a, t, n, steps)


# ---------------------------------------------------------------------------
# integral


# Gauss 7 / Kronrod 15 pair on [-1, 1]; Gauss nodes sit at the odd Kronrod
# indices plus the center.
_GK_NODES = (
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
)
_GK_WEIGHTS = (
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
)
_G_WEIGHTS = (
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
)


def _gk15(g: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    c = 0.5 * (a + b)
    half = 0.5 * (b - a)
    f_center = g(c)
    resk = _GK_WEIGHTS[7] * f_center
    resg = _G_WEIGHTS[3] * f_center
    for i, x in enumerate(_GK_NODES):
        fa = g(c - half * x)
        fb = g(c + half * x)
        resk += _GK_WEIGHTS[i] * (fa + fb)
        if i % 2 == 1:
            resg += _G_WEIGHTS[i // 2] * (fa + fb)
    if not (math.isfinite(resk) and math.isfinite(resg)):
        raise DomainError("non-finite integrand encountered")
    return resk * half, abs((resk - resg) * half)


def _adaptive_gk(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    rtol: float,
    atol: float,
    max_intervals: int,
) -> float:
    value, err = _gk15(g, lo, hi)
    total, total_err = value, err
    heap = [(-err, lo, hi, value)]
    count = 1
    while total_err > max(atol, rtol * abs(total)):
        if count >= max_intervals:
            raise QuadratureError(
                f"tolerance not met with {count} subintervals "
                f"(error estimate {total_err:.3e})"
            )
        neg_err, a, b, v = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        v1, e1 = _gk15(g, a, mid)
        v2, e2 = _gk15(g, mid, b)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err  # neg_err == -old error
        total_err = max(total_err, 0.0)
        heapq.heappush(heap, (-e1, a, mid, v1))
        heapq.heappush(heap, (-e2, mid, b, v2))
        count += 1
    return total


def weighted_integral(
    f,
    alpha,
    a: float,
    b: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-10,
    max_intervals: int = 2000,
) -> float:
    """Signed integral of x^(alpha-1) * f(x) from a to b.

    Substituting u = x^alpha turns the integrand into f(u^(1/alpha))/alpha,
    which removes the x = 0 endpoint weight singularity; the transformed
    integral is evaluated by globally adaptive Gauss-Kronrod bisection.
    """
    al = as_alpha(alpha).alpha
    fn = as_function(f)
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    if a < 0.0:
        raise DomainError(f"integration limits must be non-negative, got {a}")
    lo, hi = a ** al, b ** al
    inv = 1.0 / al

    def g(u: float) -> float:
        return fn(u ** inv) / al

    return sign * _adaptive_gk(g, lo, hi, rtol, atol, max_intervals)


def i_alpha(
    f,
    alpha,
    a: float,
    t: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-10,
    max_intervals: int = 2000,
) -> float:
    """Conformable integral of order alpha: int_a^t x^(alpha-1) f(x) dx."""
    if a < 0.0 or t < a:
        raise DomainError(f"integration requires 0 <= a <= t, got a={a}, t={t}")
    return weighted_integral(f, alpha, a, t, rtol=rtol, atol=atol, max_intervals=max_intervals)


# ---------------------------------------------------------------------------
# identity verification


IDENTITY_KINDS = (
    "linearity",
    "product",
    "quotient",
    "chain",
    "parts",
    "ftc-forward",
    "ftc-backward",
)


@dataclass(frozen=True)
class IdentitySample:
    t: float
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float


@dataclass(frozen=True)
class IdentityReport:
    kind: str
    samples: tuple[IdentitySample, ...]
    tol: float
    max_rel_residual: float
    passed: bool


def _make_sample(t: float, lhs: float, rhs: float) -> IdentitySample:
    abs_r = abs(lhs - rhs)
    if math.isfinite(abs_r):
        rel_r = abs_r / (1.0 + max(abs(lhs), abs(rhs)))
    else:
        rel_r = math.inf  # never hide a NaN: non-finite residuals fail
    return IdentitySample(t, lhs, rhs, abs_r, rel_r)


def verify_identity(
    kind: str,
    f,
    g=None,
    alpha=0.5,
    samples: Sequence[float] = (),
    *,
    tol: float = 1e-6,
    coeffs: tuple[float, float] = (2.0, -3.0),
    lower: float = 0.5,
) -> IdentityReport:
    """Check one calculus identity numerically at the given sample points.

    `coeffs` are the (a, b) weights for the linearity identity; `lower` is
    the lower integration limit for the fundamental-theorem checks.  For
    `parts`, consecutive sample points delimit the integration intervals.
    """
    if kind not in IDENTITY_KINDS:
        raise ValueError(f"unknown identity kind {kind!r}")
    al = as_alpha(alpha)
    a = al.alpha
    fn = as_function(f)
    needs_g = kind in ("linearity", "product", "quotient", "chain", "parts")
    if needs_g and g is None:
        raise ValueError(f"identity {kind!r} needs a second function g")
    gn = as_function(g) if g is not None else None
    pts = [float(t) for t in samples]
    if not pts:
        raise ValueError("at least one sample point is required")
    for t in pts:
        if t <= 0.0:
            raise DomainError(f"sample points must be positive, got {t}")

    rows: list[IdentitySample] = []

    if kind == "linearity":
        ca, cb = coeffs
        combo = as_function(lambda t: ca * fn(t) + cb * gn(t))
        for t in pts:
            lhs = t_alpha_reduction(combo, al, t)
            rhs = ca * t_alpha_reduction(fn, al, t) + cb * t_alpha_reduction(gn, al, t)
            rows.append(_make_sample(t, lhs, rhs))
    elif kind == "product":
        prod = as_function(lambda t: fn(t) * gn(t))
        for t in pts:
            lhs = t_alpha_reduction(prod, al, t)
            rhs = t_alpha_reduction(fn, al, t) * gn(t) + fn(t) * t_alpha_reduction(gn, al, t)
            rows.append(_make_sample(t, lhs, rhs))
    elif kind == "quotient":
        quot = as_function(lambda t: fn(t) / gn(t))
        for t in pts:
            gt = gn(t)
            if gt == 0.0:
                raise DomainError(f"quotient identity requires g(t) != 0 at t={t}")
            lhs = t_alpha_reduction(quot, al, t)
            rhs = (t_alpha_reduction(fn, al, t) * gt - fn(t) * t_alpha_reduction(gn, al, t)) / gt**2
            rows.append(_make_sample(t, lhs, rhs))
    elif kind == "chain":
        comp = as_function(lambda t: fn(gn(t)))
        for t in pts:
            gt = gn(t)
            if gt <= 0.0:
                raise DomainError(f"chain identity requires g(t) > 0 at t={t}")
            lhs = t_alpha_reduction(comp, al, t)
            rhs = t_alpha_reduction(fn, al, gt) * t_alpha_reduction(gn, al, t) * gt ** (a - 1.0)
            rows.append(_make_sample(t, lhs, rhs))
    elif kind == "parts":
        if len(pts) < 2:
            raise ValueError("parts identity needs at least two sample points")
        ends = sorted(pts)
        f_dg = as_function(lambda t: fn(t) * t_alpha_reduction(gn, al, t))
        g_df = as_function(lambda t: gn(t) * t_alpha_reduction(fn, al, t))
        for left, right in zip(ends, ends[1:]):
            lhs = weighted_integral(f_dg, al, left, right)
            boundary = fn(right) * gn(right) - fn(left) * gn(left)
            rhs = boundary - weighted_integral(g_df, al, left, right)
            rows.append(_make_sample(0.5 * (left + right), lhs, rhs))
    elif kind == "ftc-forward":
        # d/dt of the running integral, with the increments evaluated as
        # short integrals so adaptive-subdivision jitter cannot pollute the
        # difference quotient.
        for t in pts:
            if t <= lower:
                raise DomainError(f"sample t={t} must exceed the lower limit {lower}")
            h = min(1e-4 * max(1.0, abs(t)), 0.25 * (t - lower))
            d1 = weighted_integral(fn, al, t - h, t + h) / (2.0 * h)
            d2 = weighted_integral(fn, al, t - 0.5 * h, t + 0.5 * h) / h
            lhs = t ** (1.0 - a) * (4.0 * d2 - d1) / 3.0
            rhs = fn(t)
            rows.append(_make_sample(t, lhs, rhs))
    else:  # ftc-backward
        deriv = as_function(lambda t: t_alpha_reduction(fn, al, t))
        f_lower = fn(lower)
        for t in pts:
            if t <= lower:
                raise DomainError(f"sample t={t} must exceed the lower limit {lower}")
            lhs = weighted_integral(deriv, al, lower, t)
            rhs = fn(t) - f_lower
            rows.append(_make_sample(t, lhs, rhs))

    max_rel = max(r.rel_residual for r in rows)
    passed = math.isfinite(max_rel) and max_rel <= tol
    return IdentityReport(kind, tuple(rows), tol, max_rel, passed)
