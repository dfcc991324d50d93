"""Sequential linear conformable FDEs and their initial value problems.

An order-n problem  nT y + p_{n-1} (n-1)T y + ... + p_0 y = q(t)  is reduced
to a first-order system through x_k = (k-1)T y, giving the companion form
T X = A(t) X + q(t) e_n.  Integration runs in the substituted variable
s = t^alpha / alpha, in which the conformable derivative is exactly d/ds,
using an embedded Dormand-Prince 4(5) pair with adaptive steps and cubic
Hermite dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calculus import AlphaOrder, as_alpha
from .errors import ConvergenceError, DomainError, StepUnderflowError
from .expr import Expr, as_expr, evaluate, is_zero


@dataclass(frozen=True)
class SequentialFde:
    """Order-n sequential problem with coefficients p[0..n-1] and forcing q.

    p[0] multiplies y itself, p[n-1] multiplies the (n-1)-fold derivative.
    The domain (a, b) must satisfy 0 < a < b so the weight t^(alpha-1) stays
    continuous on it.
    """

    alpha: AlphaOrder
    p: tuple[Expr, ...]
    q: Expr
    domain: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        object.__setattr__(self, "p", tuple(as_expr(c) for c in self.p))
        object.__setattr__(self, "q", as_expr(self.q))
        a, b = self.domain
        object.__setattr__(self, "domain", (float(a), float(b)))
        if len(self.p) < 1:
            raise ValueError("at least one coefficient p_0 is required")
        if not (0.0 < self.domain[0] < self.domain[1]):
            raise ValueError(f"domain must satisfy 0 < a < b, got {self.domain}")

    @property
    def order(self) -> int:
        return len(self.p)

    @property
    def is_homogeneous(self) -> bool:
        return is_zero(self.q)

    def contains(self, t: float) -> bool:
        a, b = self.domain
        return a < t < b


@dataclass(frozen=True)
class InitialCondition:
    """Values of y, T y, ..., (n-1)T y at t0."""

    t0: float
    gamma: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if len(self.gamma) < 1:
            raise ValueError("initial data must contain at least one value")


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 1_000_000
    first_step: Optional[float] = None
    max_step: Optional[float] = None
    min_step: Optional[float] = None
    variable: str = "s"  # "s": integrate in s = t^alpha/alpha; "t": direct

    def __post_init__(self):
        if self.variable not in ("s", "t"):
            raise ValueError(f"variable must be 's' or 't', got {self.variable!r}")


def companion_system(fde: SequentialFde, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Companion matrix A(t) and forcing vector b(t) with T X = A X + b.

    A carries ones on the superdiagonal and -p_0 ... -p_{n-1} in the last
    row; b is q(t) times the last basis vector.
    """
    a, b_dom = fde.domain
    if not (a < t < b_dom):
        raise DomainError(f"t={t} outside problem domain ({a}, {b_dom})")
    n = fde.order
    mat = np.zeros((n, n))
    for k in range(n - 1):
        mat[k, k + 1] = 1.0
    for j in range(n):
        mat[n - 1, j] = -evaluate(fde.p[j], t)
    vec = np.zeros(n)
    vec[n - 1] = evaluate(fde.q, t)
    return mat, vec


# ---------------------------------------------------------------------------
# Dormand-Prince 4(5) with FSAL


_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_E = _DP_B5 - _DP_B4


def _integrate(rhs, x0: float, x_end: float, y0: np.ndarray, opts: SolverOptions):
    """Adaptive forward integration from x0 to x_end > x0.

    Returns node positions, states, and right-hand-side slopes at the nodes.
    """
    span = x_end - x0
    h = opts.first_step if opts.first_step is not None else 1e-3 * span
    h_max = opts.max_step if opts.max_step is not None else span / 10.0
    h_min = opts.min_step if opts.min_step is not None else 16.0 * 2.22e-16 * max(
        1.0, abs(x0), abs(x_end)
    )
    h = min(h, h_max)
    n = y0.size
    stages = np.empty((7, n))

    xs = [x0]
    ys = [y0.copy()]
    k1 = np.asarray(rhs(x0, y0), dtype=float)
    fs = [k1.copy()]

    x, y = x0, y0.copy()
    steps = 0
    while x < x_end:
        h = min(h, h_max, x_end - x)
        stages[0] = k1
        for i in range(1, 7):
            yi = y + h * (np.asarray(_DP_A[i]) @ stages[:i])
            stages[i] = rhs(x + _DP_C[i] * h, yi)
        y_new = y + h * (_DP_B5 @ stages)
        err_vec = h * (_DP_E @ stages)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))

        if err <= 1.0:
            x = x + h
            y = y_new
            k1 = stages[6].copy()  # FSAL: last stage sits at (x + h, y_new)
            xs.append(x)
            ys.append(y.copy())
            fs.append(k1.copy())
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= factor
        else:
            h *= min(1.0, max(0.2, 0.9 * err ** -0.2))
            if h < h_min:
                raise StepUnderflowError(
                    f"step size {h:.3e} fell below the minimum {h_min:.3e} at x={x!r}"
                )
        steps += 1
        if steps > opts.max_steps:
            raise ConvergenceError(f"integration exceeded {opts.max_steps} steps")

    return np.array(xs), np.array(ys), np.array(fs)


# ---------------------------------------------------------------------------
# trajectories


def _hermite(theta, y0, y1, m0, m1, h):
    t2 = theta * theta
    t3 = t2 * theta
    return (
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (h * (t3 - 2.0 * t2 + theta))
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (h * (t3 - t2))
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution of an IVP on a grid, with cubic Hermite dense output.

    `states[i]` holds the full vector [y, T y, ..., (n-1)T y] at grid[i];
    `slopes` are the exact right-hand-side values d(state)/d(axis) used by
    the interpolant.  `axis` is the integration-variable grid (s or t).
    """

    fde: SequentialFde
    var: str
    axis: np.ndarray
    grid: np.ndarray
    states: np.ndarray
    slopes: np.ndarray

    @property
    def order(self) -> int:
        return self.states.shape[1]

    @property
    def t_lo(self) -> float:
        return float(self.grid[0])

    @property
    def t_hi(self) -> float:
        return float(self.grid[-1])

    def covers(self, t: float) -> bool:
        slack = self._slack()
        return self.grid[0] - slack <= t <= self.grid[-1] + slack

    def _slack(self) -> float:
        return 1e-12 * max(1.0, abs(self.grid[0]), abs(self.grid[-1]))

    def _to_axis(self, t: float) -> float:
        if self.var == "t":
            return t
        al = self.fde.alpha.alpha
        return t ** al / al

    def state_at(self, t: float) -> np.ndarray:
        """Full state vector at t from the dense output (exact at nodes)."""
        if not self.covers(t):
            raise DomainError(
                f"t={t} outside trajectory range [{self.t_lo}, {self.t_hi}]"
            )
        if self.grid.size == 1:
            return self.states[0].copy()
        x = self._to_axis(min(max(t, self.grid[0]), self.grid[-1]))
        i = int(np.searchsorted(self.axis, x, side="right")) - 1
        i = min(max(i, 0), self.axis.size - 2)
        x0, x1 = self.axis[i], self.axis[i + 1]
        h = x1 - x0
        theta = (x - x0) / h
        return _hermite(theta, self.states[i], self.states[i + 1], self.slopes[i], self.slopes[i + 1], h)

    def value(self, t: float) -> float:
        """The solution component y at t."""
        return float(self.state_at(t)[0])

    def values(self, ts: Sequence[float]) -> np.ndarray:
        return np.array([self.value(t) for t in ts])


def _make_rhs(fde: SequentialFde, variable: str):
    al = fde.alpha.alpha
    if variable == "s":
        inv = 1.0 / al

        def rhs(s, x_vec):
            t = (al * s) ** inv
            mat, vec = companion_system(fde, t)
            return mat @ x_vec + vec

        return rhs

    def rhs_t(t, x_vec):
        mat, vec = companion_system(fde, t)
        return t ** (al - 1.0) * (mat @ x_vec + vec)

    return rhs_t


def solve_ivp(
    fde: SequentialFde,
    ic: InitialCondition,
    t_end: float,
    opts: Optional[SolverOptions] = None,
) -> Trajectory:
    """Integrate the IVP from ic.t0 to t_end (backward runs are allowed).

    Backward integration reuses the forward stepper on the negated axis.
    The returned grid is always increasing.
    """
    opts = opts or SolverOptions()
    if len(ic.gamma) != fde.order:
        raise ValueError(
            f"initial data carries {len(ic.gamma)} values for an order-{fde.order} problem"
        )
    if not fde.contains(ic.t0):
        raise DomainError(f"t0={ic.t0} outside problem domain {fde.domain}")
    if not fde.contains(t_end):
        raise DomainError(f"t_end={t_end} outside problem domain {fde.domain}")

    al = fde.alpha.alpha
    var = opts.variable
    to_axis = (lambda t: t ** al / al) if var == "s" else (lambda t: t)
    x0 = to_axis(ic.t0)
    x1 = to_axis(t_end)
    y0 = np.array(ic.gamma, dtype=float)
    rhs = _make_rhs(fde, var)

    if x1 == x0:
        f0 = np.asarray(rhs(x0, y0), dtype=float)
        return Trajectory(
            fde, var, np.array([x0]), np.array([ic.t0]), y0.reshape(1, -1), f0.reshape(1, -1)
        )

    if x1 > x0:
        xs, ys, fs = _integrate(rhs, x0, x1, y0, opts)
    else:
        def negated(xx, x_vec):
            return -rhs(-xx, x_vec)

        xs, ys, fs = _integrate(negated, -x0, -x1, y0, opts)
        xs = (-xs)[::-1].copy()
        ys = ys[::-1].copy()
        fs = (-fs)[::-1].copy()

    if var == "s":
        t_grid = (al * xs) ** (1.0 / al)
        # pin the anchored endpoints against roundoff in the s <-> t maps
        if x1 > x0:
            t_grid[0], t_grid[-1] = ic.t0, t_end
        else:
            t_grid[0], t_grid[-1] = t_end, ic.t0
    else:
        t_grid = xs
    return Trajectory(fde, var, xs, t_grid, ys, fs)


def solve_span(
    fde: SequentialFde,
    ic: InitialCondition,
    span: tuple[float, float],
    opts: Optional[SolverOptions] = None,
) -> Trajectory:
    """Solve across a span that contains t0, merging backward and forward legs."""
    lo, hi = float(span[0]), float(span[1])
    if not lo < hi:
        raise ValueError(f"span must be an increasing pair, got {span}")
    if not (lo <= ic.t0 <= hi):
        raise ValueError(f"t0={ic.t0} must lie inside the span {span}")
    if ic.t0 == lo:
        return solve_ivp(fde, ic, hi, opts)
    if ic.t0 == hi:
        return solve_ivp(fde, ic, lo, opts)
    back = solve_ivp(fde, ic, lo, opts)
    fwd = solve_ivp(fde, ic, hi, opts)
    axis = np.concatenate([back.axis[:-1], fwd.axis])
    grid = np.concatenate([back.grid[:-1], fwd.grid])
    states = np.concatenate([back.states[:-1], fwd.states])
    slopes = np.concatenate([back.slopes[:-1], fwd.slopes])
    return Trajectory(fde, back.var, axis, grid, states, slopes)


def solve_first_order_closed_form(
    p,
    q,
    alpha,
    ic: tuple[float, float],
    t: float,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> float:
    """Integrating-factor solution of T y + p(t) y = q(t), y(t0) = y0.

    y(t) = exp(-mu(t)) * (y0 + int_t0^t exp(mu(x)) x^(alpha-1) q(x) dx)
    with mu(t) = int_t0^t x^(alpha-1) p(x) dx; all integrals by adaptive
    quadrature, independent of the Runge-Kutta path.
    """
    from .calculus import as_function, weighted_integral

    al = as_alpha(alpha)
    t0, y0 = float(ic[0]), float(ic[1])
    pf = as_function(p)
    qf = as_function(q)
    try:
        forcing_is_zero = is_zero(as_expr(q))
    except TypeError:
        forcing_is_zero = False  # opaque callable: integrate it

    def mu(x: float) -> float:
        return weighted_integral(pf, al, t0, x, rtol=rtol, atol=atol)

    if forcing_is_zero or t == t0:
        forced = 0.0
    else:
        integrand = as_function(lambda x: math.exp(mu(x)) * qf(x))
        forced = weighted_integral(integrand, al, t0, t, rtol=rtol, atol=atol)
    return math.exp(-mu(t)) * (y0 + forced)
