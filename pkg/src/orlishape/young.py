"""Young-function algebra: evaluation, growth indices, conjugation, trace compatibility.

A Young function ``G`` is a convex, strictly increasing function on
``[0, oo)`` with ``G(0) = 0``, superlinear at infinity and sublinear at
zero.  The concrete families shipped here are

* ``pow(p)``              -> ``t**p / p``                    (p > 1)
* ``powlog(p, a, b)``     -> ``t**p * (a*|log t| + b)``      (p > 1, a, b > 0)
* ``powdivlog(p, a, b)``  -> ``t**p / (a*log(t + e) + b)``   (p > 1, a, b > 0)
* ``compose(G1, G2)``     -> ``G1(G2(t))``
* ``lincomb(c1, G1, ...)``-> ``c1*G1(t) + c2*G2(t) + ...``   (c_i >= 0)
* ``max(G1, G2, ...)``    -> pointwise maximum

Every instance is validated at construction on a fixed log-spaced grid:
monotonicity, approximate convexity, sub/superlinear trend at the grid
extremes and finite growth indices with lower index above one.  Instances
are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentIntegralError, ExpressionError, YoungFunctionError

__all__ = [
    "YoungFunction",
    "Power",
    "PowerLog",
    "PowerDivLog",
    "Compose",
    "LinComb",
    "MaxOf",
    "GrowthIndices",
    "ConjugatePair",
    "SobolevConjugate",
    "growth_indices",
    "conjugate",
    "sobolev_conjugate_inverse",
    "check_trace_compatibility",
    "parse_young",
]

# Validation grid shared by all families: 600 log-spaced points over 12 decades.
_GRID = np.geomspace(1e-6, 1e6, 600)

# Relative slack for the chord convexity check.  The power-log family with
# a/b above p(p-1)/(2p-1) has a shallow concave dent below t = 1 (worst
# midpoint violation about 1.4% for p=2, a=b=1); genuinely concave inputs
# violate chords by an order of magnitude more.
_CONVEXITY_SLACK = 2e-2


@dataclass(frozen=True)
class GrowthIndices:
    """Numeric lower/upper bounds of ``t*G'(t)/G(t)`` plus doubling verdict."""

    g_minus: float
    g_plus: float
    doubling: bool


class YoungFunction:
    """Base class; subclasses provide ``_eval`` and ``_deriv`` on positive arrays."""

    def __init__(self):
        self._indices = self._estimate_indices()
        self._validate()

    # -- family hooks -----------------------------------------------------

    def _eval(self, t):
        raise NotImplementedError

    def _deriv(self, t):
        raise NotImplementedError

    def to_expr(self):
        """Serialize to the expression grammar accepted by :func:`parse_young`."""
        raise NotImplementedError

    # -- evaluation -------------------------------------------------------

    def eval(self, t):
        """Evaluate ``G(t)`` for ``t >= 0`` (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise YoungFunctionError("Young functions are defined for t >= 0 only")
        out = np.zeros_like(t_arr)
        pos = t_arr > 0
        if np.any(pos):
            out[pos] = self._eval(t_arr[pos])
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(out)
        return out

    __call__ = eval

    def derivative(self, t):
        """Evaluate ``g(t) = G'(t)`` with ``g(0) = 0`` (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise YoungFunctionError("derivative is defined for t >= 0 only")
        out = np.zeros_like(t_arr)
        pos = t_arr > 0
        if np.any(pos):
            out[pos] = self._deriv(t_arr[pos])
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(out)
        return out

    def inverse(self, s):
        """Inverse of the monotone ``eval`` by bisection, 1e-12 relative."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < 0):
            raise YoungFunctionError("inverse is defined for s >= 0 only")
        out = np.zeros_like(s_arr)
        pos = s_arr > 0
        if np.any(pos):
            out[pos] = self._inverse_pos(s_arr[pos])
        if np.isscalar(s) or np.asarray(s).ndim == 0:
            return float(out[0]) if out.shape else float(out)
        return out

    def _inverse_pos(self, s):
        lo = np.full_like(s, 1e-300)
        hi = np.ones_like(s)
        for _ in range(2100):
            mask = self.eval(hi) < s
            if not np.any(mask):
                break
            hi[mask] *= 2.0
        else:
            raise YoungFunctionError("inverse bracket search failed")
        for _ in range(110):
            mid = 0.5 * (lo + hi)
            below = self.eval(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all((hi - lo) <= 1e-13 * hi):
                break
        return 0.5 * (lo + hi)

    # -- growth indices ---------------------------------------------------

    @property
    def g_minus(self):
        return self._indices.g_minus

    @property
    def g_plus(self):
        return self._indices.g_plus

    @property
    def doubling(self):
        return self._indices.doubling

    def _index_ratio(self, t):
        t = np.asarray(t, dtype=float)
        return t * self._deriv(t) / self._eval(t)

    def _estimate_indices(self):
        ratio = self._index_ratio(_GRID)
        if not np.all(np.isfinite(ratio)):
            raise YoungFunctionError("growth ratio t*g(t)/G(t) is not finite on the grid")
        # Diverging ratio toward the top of the grid means the doubling
        # condition fails; report an infinite upper index.
        top = ratio[-150:]
        growing = top[-1] > 1.10 * top[0] and np.all(np.diff(top[-50:]) > 0)
        if growing:
            return GrowthIndices(float(self._refine(ratio, np.argmin(ratio), minimize=True)),
                                 math.inf, False)
        g_minus = self._refine(ratio, int(np.argmin(ratio)), minimize=True)
        g_plus = self._refine(ratio, int(np.argmax(ratio)), minimize=False)
        return GrowthIndices(float(g_minus), float(g_plus), True)

    def _refine(self, ratio, idx, minimize):
        # Local zoom around the grid extremum until the value is stable to 1e-3.
        best = ratio[idx]
        lo = _GRID[max(idx - 1, 0)]
        hi = _GRID[min(idx + 1, len(_GRID) - 1)]
        for _ in range(4):
            sub = np.geomspace(lo, hi, 65)
            vals = self._index_ratio(sub)
            j = int(np.argmin(vals) if minimize else np.argmax(vals))
            if abs(vals[j] - best) <= 1e-3 * max(1.0, abs(best)):
                best = vals[j]
                break
            best = vals[j]
            lo = sub[max(j - 1, 0)]
            hi = sub[min(j + 1, 64)]
        return best

    # -- construction-time validation --------------------------------------

    def _validate(self):
        vals = self.eval(_GRID)
        if not np.all(np.isfinite(vals)):
            raise YoungFunctionError("non-finite values on the validation grid")
        if not np.all(np.diff(vals) > 0):
            raise YoungFunctionError("not strictly increasing on the validation grid")
        if self.derivative(0.0) != 0.0:
            raise YoungFunctionError("g(0) must vanish")
        if np.any(self.derivative(_GRID) < 0):
            raise YoungFunctionError("derivative must be nonnegative")
        ratio = vals / _GRID
        if not (ratio[0] < ratio[2] and ratio[-3] < ratio[-1]):
            raise YoungFunctionError("G(t)/t must trend to 0 at 0 and to infinity at infinity")
        # Chord convexity at half-decade span with a documented slack.
        a = _GRID[:-50]
        b = _GRID[50:]
        mid = 0.5 * (a + b)
        lhs = self.eval(mid)
        rhs = 0.5 * (vals[:-50] + vals[50:])
        if np.any(lhs > rhs * (1.0 + _CONVEXITY_SLACK) + 1e-300):
            raise YoungFunctionError("convexity violated beyond tolerance on the grid")
        if not self._indices.g_minus > 1.0:
            raise YoungFunctionError(
                f"lower growth index must exceed 1, got {self._indices.g_minus:.6g}")

    # -- misc ---------------------------------------------------------------

    def __repr__(self):
        return f"{type(self).__name__}[{self.to_expr()}]"


class Power(YoungFunction):
    """``G(t) = t**p / p`` for ``p > 1``."""

    def __init__(self, p):
        if not p > 1:
            raise YoungFunctionError("pow requires exponent p > 1")
        self.p = float(p)
        super().__init__()

    def _eval(self, t):
        return t ** self.p / self.p

    def _deriv(self, t):
        return t ** (self.p - 1.0)

    def to_expr(self):
        return f"pow({self.p:.17g})"


class PowerLog(YoungFunction):
    """``G(t) = t**p * (a*|log t| + b)`` for ``p > 1`` and ``a, b > 0``.

    The derivative jumps upward at ``t = 1``; the right branch value is used
    there, matching the right-continuity convention for ``g``.
    """

    def __init__(self, p, a, b):
        if not (p > 1 and a > 0 and b > 0):
            raise YoungFunctionError("powlog requires p > 1 and a, b > 0")
        self.p, self.a, self.b = float(p), float(a), float(b)
        super().__init__()

    def _eval(self, t):
        return t ** self.p * (self.a * np.abs(np.log(t)) + self.b)

    def _deriv(self, t):
        p, a, b = self.p, self.a, self.b
        log_t = np.log(t)
        lower = t ** (p - 1.0) * (p * b - p * a * log_t - a)
        upper = t ** (p - 1.0) * (p * b + p * a * log_t + a)
        return np.where(t >= 1.0, upper, lower)

    def to_expr(self):
        return f"powlog({self.p:.17g},{self.a:.17g},{self.b:.17g})"


class PowerDivLog(YoungFunction):
    """``G(t) = t**p / (a*log(t + e) + b)`` for ``p > 1`` and ``a, b > 0``."""

    def __init__(self, p, a, b):
        if not (p > 1 and a > 0 and b > 0):
            raise YoungFunctionError("powdivlog requires p > 1 and a, b > 0")
        self.p, self.a, self.b = float(p), float(a), float(b)
        super().__init__()

    def _eval(self, t):
        return t ** self.p / (self.a * np.log(t + math.e) + self.b)

    def _deriv(self, t):
        p, a, b = self.p, self.a, self.b
        den = a * np.log(t + math.e) + b
        return t ** (p - 1.0) * (p * den - a * t / (t + math.e)) / den ** 2

    def to_expr(self):
        return f"powdivlog({self.p:.17g},{self.a:.17g},{self.b:.17g})"


class Compose(YoungFunction):
    """``G(t) = G1(G2(t))`` for Young functions ``G1``, ``G2``."""

    def __init__(self, outer, inner):
        self.outer = outer
        self.inner = inner
        super().__init__()

    def _eval(self, t):
        return self.outer._eval(self.inner._eval(t))

    def _deriv(self, t):
        return self.outer._deriv(self.inner._eval(t)) * self.inner._deriv(t)

    def to_expr(self):
        return f"compose({self.outer.to_expr()},{self.inner.to_expr()})"


class LinComb(YoungFunction):
    """Nonnegative linear combination of Young functions."""

    def __init__(self, coeffs, parts):
        coeffs = tuple(float(c) for c in coeffs)
        if len(coeffs) != len(parts) or not parts:
            raise YoungFunctionError("lincomb needs matching coefficients and parts")
        if any(c < 0 for c in coeffs) or not any(c > 0 for c in coeffs):
            raise YoungFunctionError("lincomb coefficients must be nonnegative, not all zero")
        self.coeffs = coeffs
        self.parts = tuple(parts)
        super().__init__()

    def _eval(self, t):
        return sum(c * part._eval(t) for c, part in zip(self.coeffs, self.parts))

    def _deriv(self, t):
        return sum(c * part._deriv(t) for c, part in zip(self.coeffs, self.parts))

    def to_expr(self):
        inner = ",".join(f"{c:.17g},{p.to_expr()}" for c, p in zip(self.coeffs, self.parts))
        return f"lincomb({inner})"


class MaxOf(YoungFunction):
    """Pointwise maximum of a finite family of Young functions."""

    def __init__(self, parts):
        if len(parts) < 1:
            raise YoungFunctionError("max needs at least one part")
        self.parts = tuple(parts)
        super().__init__()

    def _eval(self, t):
        return np.max(np.stack([p._eval(t) for p in self.parts]), axis=0)

    def _deriv(self, t):
        vals = np.stack([p._eval(t) for p in self.parts])
        ders = np.stack([p._deriv(t) for p in self.parts])
        top = np.max(vals, axis=0)
        # On ties take the largest branch slope (right-continuity at crossings).
        active = vals >= top * (1.0 - 1e-12)
        return np.max(np.where(active, ders, -np.inf), axis=0)

    def to_expr(self):
        return "max(" + ",".join(p.to_expr() for p in self.parts) + ")"


# -- derived operations ------------------------------------------------------


def growth_indices(G):
    """Return the cached :class:`GrowthIndices` of ``G``."""
    return G._indices


class ConjugatePair:
    """A Young function together with an evaluator of its Legendre conjugate.

    ``dual_eval(t)`` computes ``sup_{s >= 0} (s*t - G(s))`` by inverting the
    monotone derivative and polishing with a golden-section pass (the polish
    covers families whose derivative has small non-monotone dents).
    """

    _PHI = (math.sqrt(5.0) - 1.0) / 2.0

    def __init__(self, primal):
        self.primal = primal

    def dual_eval(self, t):
        t = float(t)
        if t < 0:
            raise YoungFunctionError("conjugate argument must be nonnegative")
        if t == 0.0:
            return 0.0
        s_star = self._derivative_root(t)
        lo, hi = s_star / 4.0, s_star * 4.0
        s_best = self._golden(lambda s: s * t - self.primal.eval(s), lo, hi)
        return max(s_star * t - self.primal.eval(s_star),
                   s_best * t - self.primal.eval(s_best), 0.0)

    __call__ = dual_eval

    def _derivative_root(self, t):
        g = self.primal.derivative
        hi = 1.0
        for _ in range(2100):
            if g(hi) >= t:
                break
            hi *= 2.0
        else:
            raise YoungFunctionError("derivative never reaches the conjugate argument")
        lo = 0.0
        for _ in range(110):
            mid = 0.5 * (lo + hi)
            if g(mid) < t:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _golden(self, f, lo, hi):
        c = hi - self._PHI * (hi - lo)
        d = lo + self._PHI * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(90):
            if fc > fd:
                hi, d, fd = d, c, fc
                c = hi - self._PHI * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + self._PHI * (hi - lo)
                fd = f(d)
        return 0.5 * (lo + hi)


def conjugate(G):
    """Conjugate pair of ``G``; requires lower growth index above one."""
    if not G.g_minus > 1.0:
        raise YoungFunctionError("conjugation requires lower growth index > 1")
    return ConjugatePair(G)


class SobolevConjugate:
    """Evaluator of the inverse growth-conjugate ``t -> int_0^t G^{-1}(s) s^(-1-1/N) ds``.

    The integral is accumulated decade by decade (Gauss-Legendre in log s,
    which makes the integrand smooth).  A geometric-ratio test on the
    per-decade contributions detects a divergent lower end and raises
    :class:`DivergentIntegralError`.
    """

    _NODES, _WEIGHTS = np.polynomial.legendre.leggauss(24)

    def __init__(self, base, N):
        if N < 2:
            raise YoungFunctionError("dimension parameter N must be >= 2")
        self.base = base
        self.N = int(N)

    def _piece(self, lo, hi):
        # integral over [lo, hi] of G^{-1}(s) * s^(-1-1/N) ds in log variable
        x0, x1 = math.log(lo), math.log(hi)
        x = 0.5 * (x1 - x0) * self._NODES + 0.5 * (x1 + x0)
        s = np.exp(x)
        vals = self.base.inverse(s) * s ** (-1.0 / self.N)
        return 0.5 * (x1 - x0) * float(np.dot(self._WEIGHTS, vals))

    def inverse_eval(self, t):
        t = float(t)
        if t < 0:
            raise YoungFunctionError("argument must be nonnegative")
        if t == 0.0:
            return 0.0
        total = 0.0
        hi = t
        pieces = []
        for j in range(400):
            lo = hi / 10.0
            v = self._piece(lo, hi)
            pieces.append(v)
            total += v
            if v <= 1e-12 * max(total, 1e-300):
                return total
            if j >= 8:
                r = pieces[-1] / pieces[-2]
                if r >= 0.995:
                    raise DivergentIntegralError(
                        "lower integral does not converge (per-decade ratio "
                        f"{r:.4f} at s ~ {hi:.3e})")
                r_prev = pieces[-2] / pieces[-3]
                if 0.5 < r < 0.995 and abs(r - r_prev) < 0.005:
                    return total + v * r / (1.0 - r)
            hi = lo
        return total

    __call__ = inverse_eval


def sobolev_conjugate_inverse(G, N, t):
    """Value of the inverse growth conjugate at ``t`` (see :class:`SobolevConjugate`)."""
    return SobolevConjugate(G, N).inverse_eval(t)


def _tail_conjugate_inverse(G, N, decades):
    """Cumulative tail integrals ``int_1^{10^k}`` for k = 1..decades.

    Starting the integral at 1 sidesteps lower-end divergence, which does not
    affect growth comparisons at large argument.
    """
    sc = SobolevConjugate(G, N)
    vals = np.empty(decades)
    total = 0.0
    for k in range(decades):
        total += sc._piece(10.0 ** k, 10.0 ** (k + 1))
        vals[k] = total
    return vals


def check_trace_compatibility(G, H, N, tol=1e-3, slope_tol=1e-2):
    """Decide whether ``H`` grows slowly enough for the compact trace pairing with ``G``.

    Compares the tail-regularized inverse growth conjugate of ``G`` against
    ``H^{-1}(t^{(N-1)/N})`` on a log grid of 25 decades.  The verdict is
    ``"compatible"`` when the ratio decays monotonically over the final three
    decades and either drops below ``tol`` (relative to its peak) or shows a
    consistent negative log-log slope beyond ``slope_tol`` per decade;
    ``"incompatible"`` on the mirrored growing behaviour; ``"inconclusive"``
    otherwise (oscillation, or a decay/growth too slow to call).
    """
    decades = 26
    f_tail = _tail_conjugate_inverse(G, N, decades)
    ks = np.arange(2, decades + 1)
    t_vals = 10.0 ** ks
    h_inv = np.array([H.inverse(tv ** ((N - 1.0) / N)) for tv in t_vals])
    ratio = f_tail[ks - 1] / h_inv
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        return "inconclusive"
    tail_window = ratio[-7:]
    slopes = np.diff(np.log10(tail_window))
    decreasing = np.all(slopes < 0)
    increasing = np.all(slopes > 0)
    small = ratio[-1] < tol * max(1.0, float(np.max(ratio)))
    if decreasing and (small or np.all(slopes <= -slope_tol)):
        return "compatible"
    if increasing and ratio[-1] > ratio[0] and (np.all(slopes >= slope_tol)
                                                or ratio[-1] > 1e3 * ratio[0]):
        return "incompatible"
    return "inconclusive"


# -- expression grammar -------------------------------------------------------


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "(),":
            tokens.append(ch)
            i += 1
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            j = i
            while j < len(text) and text[j] not in "(),":
                j += 1
            tokens.append(text[i:j].strip())
            i = j
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ExpressionError(f"expected {expected!r}, got {tok!r}")
        self.pos += 1
        return tok

    def parse_number(self):
        tok = self.take()
        try:
            return float(tok)
        except ValueError as exc:
            raise ExpressionError(f"expected a number, got {tok!r}") from exc

    def parse_expr(self):
        name = self.take()
        self.take("(")
        try:
            if name == "pow":
                node = Power(self.parse_number())
            elif name == "powlog":
                p = self.parse_number()
                self.take(",")
                a = self.parse_number()
                self.take(",")
                b = self.parse_number()
                node = PowerLog(p, a, b)
            elif name == "powdivlog":
                p = self.parse_number()
                self.take(",")
                a = self.parse_number()
                self.take(",")
                b = self.parse_number()
                node = PowerDivLog(p, a, b)
            elif name == "compose":
                outer = self.parse_expr()
                self.take(",")
                inner = self.parse_expr()
                node = Compose(outer, inner)
            elif name == "max":
                parts = [self.parse_expr()]
                while self.peek() == ",":
                    self.take(",")
                    parts.append(self.parse_expr())
                node = MaxOf(parts)
            elif name == "lincomb":
                coeffs = [self.parse_number()]
                self.take(",")
                parts = [self.parse_expr()]
                while self.peek() == ",":
                    self.take(",")
                    coeffs.append(self.parse_number())
                    self.take(",")
                    parts.append(self.parse_expr())
                node = LinComb(coeffs, parts)
            else:
                raise ExpressionError(f"unknown family {name!r}")
        except YoungFunctionError as exc:
            raise ExpressionError(str(exc)) from exc
        self.take(")")
        return node


def parse_young(text):
    """Parse an expression like ``pow(2)`` or ``max(pow(2),powlog(3,1,2))``."""
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    if parser.peek() is not None:
        raise ExpressionError(f"trailing input after expression: {parser.peek()!r}")
    return node
