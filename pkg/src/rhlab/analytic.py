"""Analytic search-cost model for Robin Hood hash tables with random probing.

Two regimes are modeled: a table filled once by insertions only, and a table
kept at constant load by an endless insert/delete churn (deletions by
marking).  For both, the distribution of the successful search cost is
computed exactly-to-truncation from a nonlinear double-tail recurrence, and
bounded from above by the solution of the matching differential equation
(the "majorant").  The module also carries the numeric kernels those bounds
need: a principal-branch Lambert W (including a log-domain solver that never
forms overflowing arguments), adaptive Simpson quadrature, and a fixed-step
RK4 integrator used to check the recurrence-vs-ODE comparison lemma.

All functions are pure; everything is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "ModelKind",
    "LoadFactor",
    "TailSequence",
    "Moments",
    "LemmaCheckResult",
    "ConvergenceError",
    "QuadratureError",
    "InadmissibleFunctionError",
    "rh_tails",
    "mean_search_cost",
    "distribution",
    "variance_search_cost",
    "ode_majorant",
    "lambert_w",
    "solve_w_log",
    "variance_upper_bound",
    "tail_upper_bound",
    "logistic_limit_density",
    "adaptive_simpson",
    "comparison_lemma_check",
]

ArrayLike = Union[float, np.ndarray]


class ConvergenceError(ArithmeticError):
    """An iterative kernel failed to converge within its iteration cap."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature could not meet the requested tolerance."""


class InadmissibleFunctionError(ValueError):
    """The step function handed to the comparison lemma left its domain."""


class ModelKind(Enum):
    """Which table regime the recurrence, mean, and bounds describe."""

    INSERT_ONLY = "insert-only"
    STEADY_STATE = "steady-state"


@dataclass(frozen=True)
class LoadFactor:
    """Load factor alpha in [0, 1) with its blow-up parameter beta = 1/(1-alpha).

    beta is cached on construction; pass it explicitly (or use ``from_beta``)
    only when a specific rounding of beta must be preserved.
    """

    alpha: float
    beta: Optional[float] = None

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if math.isnan(a) or not 0.0 <= a < 1.0:
            raise ValueError(f"load factor must satisfy 0 <= alpha < 1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 / (1.0 - a))
        else:
            b = float(self.beta)
            # Checked as alpha vs 1 - 1/beta: the direct beta comparison is
            # ill-conditioned near alpha = 1 (the subtraction noise blows up
            # by a factor beta).
            if not math.isfinite(b) or abs((1.0 - 1.0 / b) - a) > 1e-12:
                raise ValueError(f"beta={self.beta!r} inconsistent with alpha={a!r}")
            object.__setattr__(self, "beta", b)

    @classmethod
    def from_beta(cls, beta: float) -> "LoadFactor":
        b = float(beta)
        if math.isnan(b) or b < 1.0:
            raise ValueError(f"beta must be >= 1, got {beta!r}")
        return cls(1.0 - 1.0 / b, b)


def as_load_factor(alpha: Union[float, LoadFactor]) -> LoadFactor:
    if isinstance(alpha, LoadFactor):
        return alpha
    return LoadFactor(float(alpha))


@dataclass(frozen=True)
class TailSequence:
    """Truncated double tails of the search-cost distribution.

    ``values[i-1]`` is the tail-of-tails at age i of the alpha-scaled age
    probabilities; the sequence is strictly decreasing, positive, and cut at
    the first value below ``epsilon``.  ``remainder_bound`` bounds the sum of
    everything dropped by the cut (the post-cut terms decay faster than a
    geometric with ratio 1/2, hence the bound 2*epsilon).
    """

    alpha: LoadFactor
    model: ModelKind
    values: np.ndarray
    epsilon: float
    remainder_bound: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.size:
            if not np.all(v > 0.0):
                raise ValueError("double tails must be positive")
            if not np.all(np.diff(v) < 0.0):
                raise ValueError("double tails must be strictly decreasing")
            if not v[-1] < self.epsilon:
                raise ValueError("last double tail must fall below epsilon")
            if v.size >= 2 and v[-2] < self.epsilon:
                raise ValueError("only the last double tail may fall below epsilon")

    def __len__(self) -> int:
        return int(self.values.size)

    def single_tails(self) -> np.ndarray:
        """Consecutive differences; entry i-1 is alpha times Pr{cost >= i}."""
        if not self.values.size:
            return np.empty(0)
        return self.values - np.append(self.values[1:], 0.0)

    def survival(self) -> np.ndarray:
        """Pr{cost >= i} for i = 1..K (the single tails rescaled by alpha)."""
        if self.alpha.alpha == 0.0 or not self.values.size:
            return np.array([1.0])
        return self.single_tails() / self.alpha.alpha


@dataclass(frozen=True)
class Moments:
    """Mean and variance of the search cost, in probes and probes squared."""

    mean: float
    variance: float
    truncation_error: float

    def __post_init__(self) -> None:
        if self.mean < 1.0:
            raise ValueError("mean search cost is at least one probe")
        if self.variance < 0.0 or self.truncation_error < 0.0:
            raise ValueError("variance and truncation error must be nonnegative")


def _step_insert_only(q: float) -> float:
    # expm1 keeps the small-q regime (q - 1 + exp(-q) ~ q^2/2) from cancelling.
    return q + math.expm1(-q)


def _step_steady_state(q: float) -> float:
    return q * q / (1.0 + q)


def _steady_state_tail_values(start: float, epsilon: float, cap: int) -> list:
    """Steady-state recurrence with a compensated large-value regime.

    Written as q -> q - q/(1+q), tracking the bits the subtraction drops in
    a running compensation term.  Without this the rounding of ~beta-sized
    iterates random-walks across the many near-unit steps and can poke the
    sequence above its majorant by more than the documented 1e-9 slack.
    """
    values = [start]
    x = start
    comp = 0.0
    while x >= epsilon:
        t = x + comp
        if t >= 1.0:
            delta = t / (1.0 + t)
            y = x - delta
            comp += (x - y) - delta  # exact: |delta| < 1 <= x
            x = y + comp
            comp += y - x
        else:
            x = t * t / (1.0 + t)
            comp = 0.0
        values.append(x)
        if len(values) > cap:
            raise ConvergenceError("tail recurrence failed to reach epsilon (defect)")
    return values


def rh_tails(
    alpha: Union[float, LoadFactor],
    model: ModelKind,
    epsilon: float = 1e-12,
) -> TailSequence:
    """Iterate the Robin Hood double-tail recurrence down to ``epsilon``.

    Insert-only: successive values follow q -> q - 1 + exp(-q) from ln(beta).
    Steady-state churn: q -> q^2/(1+q) from beta - 1.  Iteration stops with
    the first value below epsilon (which is kept), and the dropped remainder
    is bounded by 2*epsilon.  alpha = 0 yields the degenerate empty sequence.
    """
    lf = as_load_factor(alpha)
    if not 0.0 < float(epsilon) < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    epsilon = float(epsilon)
    if lf.alpha == 0.0:
        return TailSequence(lf, model, np.empty(0), epsilon, 0.0)

    if model is ModelKind.INSERT_ONLY:
        q = -math.log1p(-lf.alpha)  # ln(beta), evaluated without forming beta
    elif model is ModelKind.STEADY_STATE:
        q = lf.beta - 1.0
        if q == 0.0:  # alpha below the resolution of beta: degenerate
            return TailSequence(lf, model, np.empty(0), epsilon, 0.0)
    else:
        raise TypeError(f"unknown model {model!r}")

    cap = int(q) + 10_000  # each step drops q by < 1, then collapses quadratically
    if cap > 50_000_000:
        raise ValueError(f"load factor too close to 1 to enumerate tails (beta={lf.beta:g})")
    if model is ModelKind.STEADY_STATE:
        values = _steady_state_tail_values(q, epsilon, cap)
    else:
        values = [q]
        while q >= epsilon:
            q = _step_insert_only(q)
            values.append(q)
            if len(values) > cap:
                raise ConvergenceError("tail recurrence failed to reach epsilon (defect)")
    return TailSequence(lf, model, np.asarray(values), epsilon, 2.0 * epsilon)


def mean_search_cost(alpha: Union[float, LoadFactor], model: ModelKind) -> float:
    """Expected probes of a successful search: ln(beta)/alpha, or beta under churn."""
    lf = as_load_factor(alpha)
    if model is ModelKind.STEADY_STATE:
        return lf.beta
    a = lf.alpha
    if a < 1e-4:
        # Mercator series for ln(1/(1-a))/a; the direct quotient is 0/0 at a = 0.
        return 1.0 + a * (1.0 / 2.0 + a * (1.0 / 3.0 + a * (1.0 / 4.0 + a * (1.0 / 5.0 + a / 6.0))))
    return -math.log1p(-a) / a


def distribution(tails: TailSequence) -> np.ndarray:
    """Age probabilities p_i from second differences of the double tails.

    Values beyond the truncation point are treated as zero, so the result
    sums to 1 up to the truncation remainder.
    """
    if tails.alpha.alpha == 0.0 or not len(tails):
        return np.array([1.0])
    ext = np.concatenate([tails.values, [0.0, 0.0]])
    return (ext[:-2] - 2.0 * ext[1:-1] + ext[2:]) / tails.alpha.alpha


def variance_search_cost(
    alpha: Union[float, LoadFactor],
    model: ModelKind,
    epsilon: float = 1e-12,
) -> Moments:
    """Search-cost moments from the truncated double-tail sum.

    variance = (2/alpha) * sum(double tails) - mean - mean^2, clamped at 0
    when the truncation remainder dominates; the clamp is covered by the
    reported ``truncation_error`` of (2/alpha) * remainder_bound.
    """
    lf = as_load_factor(alpha)
    mean = mean_search_cost(lf, model)
    if lf.alpha == 0.0:
        return Moments(mean=mean, variance=0.0, truncation_error=0.0)
    tails = rh_tails(lf, model, epsilon)
    total = float(np.sum(tails.values))
    variance = (2.0 / lf.alpha) * total - mean - mean * mean
    truncation = (2.0 / lf.alpha) * tails.remainder_bound
    return Moments(mean=mean, variance=max(variance, 0.0), truncation_error=truncation)


def ode_majorant(
    x: ArrayLike,
    alpha: Union[float, LoadFactor],
    model: ModelKind,
) -> ArrayLike:
    """Continuous upper envelope of the double tails at real age x >= 1.

    Insert-only: ln(1 + (beta-1) * exp(1-x)), an overflow-free rewriting of
    ln(beta - 1 + exp(x-1)) - x + 1.  Steady-state: the Lambert W form
    W((beta-1) * exp(beta-x)), solved entirely in the log domain so that
    beta in the hundreds and beyond never overflows.
    """
    lf = as_load_factor(alpha)
    if lf.alpha == 0.0:
        raise ValueError("majorant requires 0 < alpha < 1")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 1.0):
        raise ValueError("majorant is defined for x >= 1")
    if model is ModelKind.INSERT_ONLY:
        res = np.log1p((lf.beta - 1.0) * np.exp(1.0 - xs))
    elif lf.beta == 1.0:  # alpha below the resolution of beta: zero envelope
        res = np.zeros_like(xs)
    else:
        res = solve_w_log(math.log(lf.beta - 1.0) + lf.beta - xs)
    if np.ndim(x) == 0:
        return float(res)
    return np.asarray(res)


_W_MAX_ITER = 100


def lambert_w(y: ArrayLike) -> ArrayLike:
    """Principal-branch Lambert W on [0, inf): the w >= 0 with w * exp(w) = y.

    Newton iteration on w*exp(w) - y from the starting point w0 = ln(1+y),
    which lies above the root for every y >= 0 and makes the iteration
    monotone.  Converges to |w*exp(w) - y| <= 1e-13 * max(1, y).
    """
    ys = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(ys)) or np.any(ys < 0.0):
        raise ValueError("lambert_w is restricted to finite y >= 0")
    w = np.log1p(ys)
    tol = 1e-13 * np.maximum(1.0, ys)
    for _ in range(_W_MAX_ITER):
        ew = np.exp(w)
        resid = w * ew - ys
        if np.all(np.abs(resid) <= tol):
            break
        w = w - resid / (ew * (1.0 + w))
    else:
        raise ConvergenceError("Lambert W Newton iteration did not converge (defect)")
    if np.ndim(y) == 0:
        return float(w)
    return w


def solve_w_log(L: ArrayLike) -> ArrayLike:
    """Solve w + ln(w) = L for w > 0 (Lambert W of exp(L), in the log domain).

    Start from w0 = L when L >= 1 and w0 = exp(L-1) below; Newton steps
    w -= (w + ln w - L) * w / (w + 1).  For L < -700 the solution equals
    exp(L) to full precision (it may underflow to 0, the correct limit).
    """
    Ls = np.asarray(L, dtype=float)
    if np.any(np.isnan(Ls)) or np.any(np.isposinf(Ls)):
        raise ValueError("solve_w_log needs L finite (or -inf)")
    # Clamp the exp arguments: np.where evaluates both branches, and the
    # unused one must neither overflow nor hit exp of a huge number.
    w = np.where(Ls >= 1.0, Ls, np.exp(np.clip(Ls, -744.0, 1.0) - 1.0))
    tiny = Ls < -700.0
    if np.any(tiny):
        w = np.where(tiny, np.exp(np.clip(Ls, -746.0, 0.0)), w)
    active = ~tiny
    tol = 1e-13 * np.maximum(1.0, np.abs(Ls))

    def _residual(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(active, w + np.log(np.where(active, w, 1.0)) - Ls, 0.0)

    for _ in range(_W_MAX_ITER):
        resid = _residual(w)
        if np.all(np.abs(resid) <= tol):
            break
        w = w - np.where(active, resid * w / (w + 1.0), 0.0)
    else:
        raise ConvergenceError("log-domain Lambert solve did not converge (defect)")
    # Two polish sweeps push the root to the evaluation noise floor (about
    # one ulp of L); the coarse loop alone can stop ~1e-13*|L| away.
    for _ in range(2):
        w = w - np.where(active, _residual(w) * w / (w + 1.0), 0.0)
    if np.ndim(L) == 0:
        return float(w)
    return w


def _sum_majorant_integrand(u: float) -> float:
    # Integrand of the insert-only majorant area after substituting u for the
    # majorant value: u / (1 - exp(-u)), extended by its limit 1 at u = 0.
    if u == 0.0:
        return 1.0
    return u / -math.expm1(-u)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float,
    max_depth: int = 60,
) -> float:
    """Adaptive Simpson quadrature of f over [a, b] to absolute tolerance.

    Classic interval-halving with the |S_fine - S_coarse| <= 15*tol stopping
    rule and Richardson correction.  Raises QuadratureError, reporting the
    interval tolerance actually achieved, if the depth cap is hit.
    """
    if not abs_tol > 0.0:
        raise ValueError("abs_tol must be positive")
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_recurse(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth)


def _simpson_recurse(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"quadrature stalled on [{a:g}, {b:g}]: achieved {abs(delta) / 15.0:.3e}, wanted {tol:.3e}"
        )
    return _simpson_recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) + _simpson_recurse(
        f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1
    )


def variance_upper_bound(alpha: Union[float, LoadFactor], model: ModelKind) -> float:
    """Euler-Maclaurin upper bound on the search-cost variance.

    The bound is (2/alpha) * integral(majorant, 1, inf) + 1/3 - mean^2; the
    1/3 collects the order-two Euler-Maclaurin boundary terms, which evaluate
    through majorant(1) = alpha * mean and majorant'(1) = -alpha.

    Insert-only: substituting u for the majorant value turns the integral
    into the finite smooth integral of u/(1 - exp(-u)) over [0, ln beta],
    done by adaptive Simpson at 1e-10 absolute tolerance.  Steady-state: the
    same substitution gives (beta-1) + (beta-1)^2/2 in closed form and the
    whole bound collapses to exactly beta + 1/3.
    """
    lf = as_load_factor(alpha)
    if lf.alpha == 0.0:
        raise ValueError("variance bound requires 0 < alpha < 1")
    if model is ModelKind.STEADY_STATE:
        return lf.beta + 1.0 / 3.0
    upper = -math.log1p(-lf.alpha)  # ln(beta)
    integral = adaptive_simpson(_sum_majorant_integrand, 0.0, upper, 1e-10)
    mu = mean_search_cost(lf, ModelKind.INSERT_ONLY)
    return (2.0 / lf.alpha) * integral + 1.0 / 3.0 - mu * mu


def tail_upper_bound(i: ArrayLike, alpha: Union[float, LoadFactor]) -> ArrayLike:
    """Insert-only bound on Pr{search cost >= i}: beta / (beta - 1 + e^(i-1)).

    Accepts real-valued i >= 1 (the bound extends off the integers); for very
    large i the denominator overflows cleanly to +inf and the bound to 0.
    """
    lf = as_load_factor(alpha)
    if lf.alpha == 0.0:
        raise ValueError("tail bound requires 0 < alpha < 1")
    xs = np.asarray(i, dtype=float)
    if np.any(xs < 1.0):
        raise ValueError("tail bound is defined for i >= 1")
    with np.errstate(over="ignore"):
        res = lf.beta / (lf.beta - 1.0 + np.exp(xs - 1.0))
    if np.ndim(i) == 0:
        return float(res)
    return res


def logistic_limit_density(x: ArrayLike) -> ArrayLike:
    """Density of the standard logistic law, the full-table limit of the
    mean-centered search-cost shape.  Evaluated through exp(-|x|) so both
    tails underflow symmetrically instead of overflowing."""
    t = np.exp(-np.abs(np.asarray(x, dtype=float)))
    res = t / (1.0 + t) ** 2
    if np.ndim(x) == 0:
        return float(res)
    return res


@dataclass(frozen=True)
class LemmaCheckResult:
    """Outcome of a recurrence-vs-ODE comparison run.

    ``recurrence[i]`` and ``ode[i]`` hold the i+1st recurrence iterate and
    the RK4 solution at the same integer abscissa; ``first_violation`` is the
    1-based index of the first point where the ODE dips below the recurrence
    by more than the slack, or None.
    """

    holds: bool
    first_violation: Optional[int]
    recurrence: np.ndarray
    ode: np.ndarray

    def __bool__(self) -> bool:
        return self.holds


_RK4_STEP = 1.0 / 1024.0
_LEMMA_SLACK = 1e-9


def comparison_lemma_check(
    f: Callable[[float], float],
    a1: float,
    n: int,
) -> LemmaCheckResult:
    """Check that the ODE solution dominates the recurrence it shadows.

    For a decreasing nonpositive step function f with f(0) = 0, iterates
    a_{i+1} = a_i + f(a_i) and integrates A' = f(A) from A(1) = a1 with
    classical fixed-step RK4 at step 1/1024, then verifies
    A(i) >= a_i - 1e-9 for i = 1..n.
    """
    a1 = float(a1)
    if not a1 > 0.0:
        raise ValueError("a1 must be positive")
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if abs(f(0.0)) > 1e-12:
        raise InadmissibleFunctionError("f(0) must be 0")

    seq = np.empty(n)
    seq[0] = a1
    value = a1
    for i in range(1, n):
        value = value + f(value)
        if not 0.0 <= value <= a1:
            raise InadmissibleFunctionError(
                f"recurrence left [0, a1] at index {i + 1} (value {value!r}); f is not admissible"
            )
        seq[i] = value

    ode = np.empty(n)
    ode[0] = a1
    h = _RK4_STEP
    sixth = h / 6.0
    y = a1
    steps_per_unit = round(1.0 / h)
    for i in range(1, n):
        for _ in range(steps_per_unit):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y += sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ode[i] = y

    below = np.nonzero(ode - seq < -_LEMMA_SLACK)[0]
    if below.size:
        return LemmaCheckResult(False, int(below[0]) + 1, seq, ode)
    return LemmaCheckResult(True, None, seq, ode)
