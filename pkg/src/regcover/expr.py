"""Expression trees over arithmetic, real powers, log and exp.

Values and first derivatives are computed by forward-mode differentiation
of the tree.  Scalar evaluation is strict: leaving the domain raises
:class:`DomainError` instead of returning NaN.  Grid code uses the
vectorized entry points (``eval_many`` / ``grad_many``) which mark bad
points in a validity mask instead of raising.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonFiniteFiber, ScanTooCoarse

log = logging.getLogger(__name__)


def _col(point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if p.ndim != 1:
        raise ValueError("point must be a flat real vector")
    return p.reshape(-1, 1)


class Expr:
    """Base node.  Subclasses implement ``_ev`` (values on a (nvars, m)
    sample matrix) and ``_ev_grad`` (values plus per-variable gradients).

    Out-of-domain samples come back as NaN in the vectorized path; the
    scalar wrappers turn them into :class:`DomainError`.
    """

    def eval(self, point) -> float:
        x = _col(point)
        if x.shape[0] < self.nvars:
            raise ValueError(f"point has {x.shape[0]} coordinates, expression uses {self.nvars}")
        with np.errstate(all="ignore"):
            v = float(self._ev(x)[0])
        if not math.isfinite(v):
            self._raise_domain(x)
            raise DomainError(f"non-finite value {v!r} at {np.ravel(point)!r}")
        return v

    def eval_grad(self, point) -> tuple[float, np.ndarray]:
        x = _col(point)
        if x.shape[0] < self.nvars:
            raise ValueError(f"point has {x.shape[0]} coordinates, expression uses {self.nvars}")
        with np.errstate(all="ignore"):
            v, g = self._ev_grad(x)
        val = float(v[0])
        grad = g[:, 0].copy()
        if not (math.isfinite(val) and np.all(np.isfinite(grad))):
            self._raise_domain(x)
            raise DomainError(f"non-finite value or gradient at {np.ravel(point)!r}")
        return val, grad

    def eval_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate on an (m, n) sample array.  Returns (values, valid)."""
        X = np.asarray(points, dtype=float).T
        with np.errstate(all="ignore"):
            v = self._ev(X)
        valid = np.isfinite(v)
        return v, valid

    def grad_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values and gradients on an (m, n) sample array.

        Returns (values (m,), grads (m, n), valid (m,)).
        """
        X = np.asarray(points, dtype=float).T
        with np.errstate(all="ignore"):
            v, g = self._ev_grad(X)
        valid = np.isfinite(v) & np.all(np.isfinite(g), axis=0)
        return v, g.T, valid

    # -- structure ---------------------------------------------------------

    @property
    def nvars(self) -> int:
        return self._nvars()

    def _nvars(self) -> int:
        raise NotImplementedError

    def _ev(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _ev_grad(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _raise_domain(self, X: np.ndarray) -> None:
        """Walk the tree at a single bad point and raise a precise error."""

    def to_text(self) -> str:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_text()})"

    # -- sugar --------------------------------------------------------------

    def __add__(self, other):
        return Sum(self, _as_expr(other))

    def __radd__(self, other):
        return Sum(_as_expr(other), self)

    def __sub__(self, other):
        return Sum(self, Neg(_as_expr(other)))

    def __rsub__(self, other):
        return Sum(_as_expr(other), Neg(self))

    def __mul__(self, other):
        return Product(self, _as_expr(other))

    def __rmul__(self, other):
        return Product(_as_expr(other), self)

    def __truediv__(self, other):
        return Quotient(self, _as_expr(other))

    def __rtruediv__(self, other):
        return Quotient(_as_expr(other), self)

    def __pow__(self, r):
        if isinstance(r, Expr):
            if isinstance(r, Const):
                return Power(self, r.value)
            return Exp(Product(r, Log(self)))
        return Power(self, float(r))

    def __neg__(self):
        return Neg(self)


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def _nvars(self):
        return 0

    def _ev(self, X):
        return np.full(X.shape[1], self.value)

    def _ev_grad(self, X):
        return np.full(X.shape[1], self.value), np.zeros_like(X)

    def to_text(self):
        return repr(self.value)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    index: int

    def _nvars(self):
        return self.index + 1

    def _ev(self, X):
        return X[self.index].copy()

    def _ev_grad(self, X):
        g = np.zeros_like(X)
        g[self.index] = 1.0
        return X[self.index].copy(), g

    def to_text(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True, repr=False)
class Sum(Expr):
    left: Expr
    right: Expr

    def _nvars(self):
        return max(self.left._nvars(), self.right._nvars())

    def _ev(self, X):
        return self.left._ev(X) + self.right._ev(X)

    def _ev_grad(self, X):
        lv, lg = self.left._ev_grad(X)
        rv, rg = self.right._ev_grad(X)
        return lv + rv, lg + rg

    def _raise_domain(self, X):
        self.left._raise_domain(X)
        self.right._raise_domain(X)

    def to_text(self):
        r = self.right
        if isinstance(r, Neg):
            return f"({self.left.to_text()} - {r.arg.to_text()})"
        return f"({self.left.to_text()} + {r.to_text()})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def _nvars(self):
        return self.arg._nvars()

    def _ev(self, X):
        return -self.arg._ev(X)

    def _ev_grad(self, X):
        v, g = self.arg._ev_grad(X)
        return -v, -g

    def _raise_domain(self, X):
        self.arg._raise_domain(X)

    def to_text(self):
        return f"(-{self.arg.to_text()})"


@dataclass(frozen=True, repr=False)
class Product(Expr):
    left: Expr
    right: Expr

    def _nvars(self):
        return max(self.left._nvars(), self.right._nvars())

    def _ev(self, X):
        return self.left._ev(X) * self.right._ev(X)

    def _ev_grad(self, X):
        lv, lg = self.left._ev_grad(X)
        rv, rg = self.right._ev_grad(X)
        return lv * rv, lg * rv + rg * lv

    def _raise_domain(self, X):
        self.left._raise_domain(X)
        self.right._raise_domain(X)

    def to_text(self):
        return f"({self.left.to_text()} * {self.right.to_text()})"


@dataclass(frozen=True, repr=False)
class Quotient(Expr):
    num: Expr
    den: Expr

    def _nvars(self):
        return max(self.num._nvars(), self.den._nvars())

    def _ev(self, X):
        nv = self.num._ev(X)
        dv = self.den._ev(X)
        out = nv / dv
        return np.where(dv == 0.0, np.nan, out)

    def _ev_grad(self, X):
        nv, ng = self.num._ev_grad(X)
        dv, dg = self.den._ev_grad(X)
        bad = dv == 0.0
        v = np.where(bad, np.nan, nv / dv)
        g = np.where(bad, np.nan, (ng * dv - dg * nv) / (dv * dv))
        return v, g

    def _raise_domain(self, X):
        self.num._raise_domain(X)
        self.den._raise_domain(X)
        with np.errstate(all="ignore"):
            dv = float(self.den._ev(X)[0])
        if dv == 0.0:
            raise DomainError(f"division by zero in {self.to_text()}")

    def to_text(self):
        return f"({self.num.to_text()} / {self.den.to_text()})"


@dataclass(frozen=True, repr=False)
class Power(Expr):
    """base ** exponent with a machine-float exponent.

    Integer exponents apply for every base; non-integer exponents require a
    strictly positive base (x^r = exp(r ln x)).
    """

    base: Expr
    exponent: float

    def _is_int(self):
        return float(self.exponent).is_integer()

    def _nvars(self):
        return self.base._nvars()

    def _ev(self, X):
        b = self.base._ev(X)
        r = self.exponent
        v = np.power(b, r)
        if self._is_int():
            if r < 0:
                v = np.where(b == 0.0, np.nan, v)
        else:
            v = np.where(b > 0.0, v, np.nan)
        return v

    def _ev_grad(self, X):
        b, bg = self.base._ev_grad(X)
        r = self.exponent
        v = np.power(b, r)
        d = r * np.power(b, r - 1.0)
        if self._is_int():
            bad = (b == 0.0) & (r < 0)
            if r - 1.0 < 0:
                d = np.where(b == 0.0, np.nan if r != 0 else 0.0, d)
            if r == 0:
                d = np.zeros_like(b)
        else:
            bad = ~(b > 0.0)
            d = np.where(bad, np.nan, d)
        v = np.where(bad, np.nan, v) if np.ndim(bad) else v
        return v, d * bg

    def _raise_domain(self, X):
        self.base._raise_domain(X)
        with np.errstate(all="ignore"):
            b = float(self.base._ev(X)[0])
        if self._is_int():
            if b == 0.0 and self.exponent < 0:
                raise DomainError(f"zero base with negative exponent in {self.to_text()}")
        elif not b > 0.0:
            raise DomainError(
                f"non-integer power of non-positive base {b!r} in {self.to_text()}"
            )

    def to_text(self):
        return f"({self.base.to_text()} ^ {self.exponent!r})"


@dataclass(frozen=True, repr=False)
class Log(Expr):
    arg: Expr

    def _nvars(self):
        return self.arg._nvars()

    def _ev(self, X):
        a = self.arg._ev(X)
        return np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan)

    def _ev_grad(self, X):
        a, g = self.arg._ev_grad(X)
        ok = a > 0.0
        safe = np.where(ok, a, 1.0)
        return np.where(ok, np.log(safe), np.nan), np.where(ok, g / safe, np.nan)

    def _raise_domain(self, X):
        self.arg._raise_domain(X)
        with np.errstate(all="ignore"):
            a = float(self.arg._ev(X)[0])
        if not a > 0.0:
            raise DomainError(f"log of non-positive value {a!r}")

    def to_text(self):
        return f"log({self.arg.to_text()})"


@dataclass(frozen=True, repr=False)
class Exp(Expr):
    arg: Expr

    def _nvars(self):
        return self.arg._nvars()

    def _ev(self, X):
        return np.exp(self.arg._ev(X))

    def _ev_grad(self, X):
        a, g = self.arg._ev_grad(X)
        v = np.exp(a)
        return v, v * g

    def _raise_domain(self, X):
        self.arg._raise_domain(X)

    def to_text(self):
        return f"exp({self.arg.to_text()})"


def var(i: int) -> Expr:
    return Var(i)


def const(c: float) -> Expr:
    return Const(float(c))


# ---------------------------------------------------------------------------
# Parser: + - * / ^ log exp, variables x1..xn, parentheses, float literals.
# '^' binds a constant exponent to a Power node; a non-constant exponent
# desugars to exp(e * log(base)).
# ---------------------------------------------------------------------------


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[str] = []
        i, n = 0, len(text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
            elif c in "+-*/^()":
                self.toks.append(c)
                i += 1
            elif c.isdigit() or c == ".":
                j = i
                while j < n and (text[j].isdigit() or text[j] in ".eE" or
                                 (text[j] in "+-" and text[j - 1] in "eE")):
                    j += 1
                self.toks.append(text[i:j])
                i = j
            elif c.isalpha():
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.toks.append(text[i:j])
                i = j
            else:
                raise ValueError(f"unexpected character {c!r} in expression")
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise ValueError("unexpected end of expression")
        self.pos += 1
        return t


def parse_expr(text: str) -> Expr:
    """Parse an expression literal.

    Grammar: ``+ - * / ^``, ``log(e)``, ``exp(e)``, variables ``x1..xn``,
    float literals, parentheses.  ``^`` is right-associative.
    """
    tk = _Tokens(text)
    e = _parse_sum(tk)
    if tk.peek() is not None:
        raise ValueError(f"trailing input at token {tk.peek()!r}")
    return e


def _parse_sum(tk):
    e = _parse_term(tk)
    while tk.peek() in ("+", "-"):
        op = tk.next()
        rhs = _parse_term(tk)
        e = Sum(e, rhs if op == "+" else Neg(rhs))
    return e


def _parse_term(tk):
    e = _parse_unary(tk)
    while tk.peek() in ("*", "/"):
        op = tk.next()
        rhs = _parse_unary(tk)
        e = Product(e, rhs) if op == "*" else Quotient(e, rhs)
    return e


def _parse_unary(tk):
    neg = False
    while tk.peek() == "-":
        tk.next()
        neg = not neg
    e = _parse_power(tk)
    return Neg(e) if neg else e


def _parse_power(tk):
    base = _parse_atom(tk)
    if tk.peek() == "^":
        tk.next()
        exponent = _parse_unary(tk)
        folded = _fold_const(exponent)
        if folded is not None:
            return Power(base, folded)
        return Exp(Product(exponent, Log(base)))
    return base


def _fold_const(e: Expr) -> float | None:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Neg):
        inner = _fold_const(e.arg)
        return None if inner is None else -inner
    return None


def _parse_atom(tk):
    t = tk.next()
    if t == "(":
        e = _parse_sum(tk)
        if tk.next() != ")":
            raise ValueError("missing closing parenthesis")
        return e
    if t in ("log", "exp"):
        if tk.next() != "(":
            raise ValueError(f"{t} must be followed by '('")
        e = _parse_sum(tk)
        if tk.next() != ")":
            raise ValueError("missing closing parenthesis")
        return Log(e) if t == "log" else Exp(e)
    if t.startswith("x") and t[1:].isdigit():
        idx = int(t[1:])
        if idx < 1:
            raise ValueError("variables are numbered from x1")
        return Var(idx - 1)
    try:
        return Const(float(t))
    except ValueError:
        raise ValueError(f"unknown token {t!r}") from None


# ---------------------------------------------------------------------------
# Line restrictions and 1-D root isolation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnaryRestriction:
    """h(t) = expr(anchor + t * direction)."""

    expr: Expr
    anchor: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))

    def point(self, t: float) -> np.ndarray:
        return self.anchor + t * self.direction

    def value(self, t: float) -> float:
        return self.expr.eval(self.point(t))

    def derivative(self, t: float) -> float:
        _, g = self.expr.eval_grad(self.point(t))
        return float(g @ self.direction)

    def eval_many(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ts = np.asarray(ts, dtype=float)
        pts = self.anchor[None, :] + ts[:, None] * self.direction[None, :]
        return self.expr.eval_many(pts)


def isolate_roots(h: UnaryRestriction, interval: tuple[float, float], tol: float,
                  density: int = 1024, max_density: int = 1 << 16) -> list[float]:
    """All roots of h on the open interval, sorted.

    Sign-change brackets from a uniform scan are refined by safeguarded
    Newton/bisection.  The scan is repeated at twice the density; if the
    root count disagrees the density doubles, up to ``max_density``, after
    which :class:`ScanTooCoarse` is raised.  Roots closer than ``tol`` are
    merged.  A restriction that vanishes on ≥90% of the scan raises
    :class:`NonFiniteFiber`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t_lo, t_hi = float(interval[0]), float(interval[1])
    if not t_hi > t_lo:
        return []
    roots = _scan_and_refine(h, t_lo, t_hi, density, tol)
    while True:
        roots2 = _scan_and_refine(h, t_lo, t_hi, 2 * density, tol)
        if len(roots) == len(roots2) and all(
                abs(a - b) <= max(tol, 1e-9 * (t_hi - t_lo)) for a, b in zip(roots, roots2)):
            return roots2
        density *= 2
        if 2 * density > max_density:
            raise ScanTooCoarse(
                f"root count unstable at density {density} on ({t_lo}, {t_hi})")
        roots = roots2


def _scan_and_refine(h, t_lo, t_hi, density, tol):
    ts = np.linspace(t_lo, t_hi, density + 1)
    vals, valid = h.eval_many(ts)
    span = t_hi - t_lo
    scale = np.nanmax(np.abs(np.where(valid, vals, np.nan))) if valid.any() else 0.0
    if not np.isfinite(scale):
        scale = 0.0
    near_zero = valid & (np.abs(vals) <= 1e-12 * (1.0 + scale))
    if valid.sum() > 0 and near_zero.sum() >= 0.9 * valid.sum():
        raise NonFiniteFiber("restriction vanishes along the scan")

    roots = []
    # sign-change brackets between consecutive valid samples; exact zeros at
    # samples count as roots (tangential roots between samples are missed by
    # design; the callers that care detect them through count changes)
    for i in range(density):
        if not (valid[i] and valid[i + 1]):
            continue
        a, b, fa, fb = ts[i], ts[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(a))
            continue
        if fa * fb < 0.0:
            roots.append(_refine_root(h, a, b, fa, fb))
    if valid[-1] and vals[-1] == 0.0:
        roots.append(float(ts[-1]))
    roots.sort()
    return _merge_roots(roots, max(tol, 1e-9 * span))


def _refine_root(h, a, b, fa, fb, iters=80):
    """Newton inside a sign-change bracket, falling back to bisection."""
    t = 0.5 * (a + b)
    for _ in range(iters):
        try:
            ft = h.value(t)
        except DomainError:
            ft = math.nan
        if math.isnan(ft):
            t = 0.5 * (a + b)
            continue
        if ft == 0.0:
            return t
        if fa * ft < 0.0:
            b = t
        else:
            a, fa = t, ft
        if b - a <= 1e-14 * (1.0 + abs(t)):
            break
        step_ok = False
        try:
            dt = h.derivative(t)
            if dt != 0.0 and math.isfinite(dt):
                tn = t - ft / dt
                if a < tn < b:
                    t = tn
                    step_ok = True
        except DomainError:
            pass
        if not step_ok:
            t = 0.5 * (a + b)
    return 0.5 * (a + b)


def _merge_roots(roots, merge_tol):
    if not roots:
        return []
    merged = [[roots[0]]]
    for r in roots[1:]:
        if r - merged[-1][-1] <= merge_tol:
            merged[-1].append(r)
        else:
            merged.append([r])
    out = []
    for cluster in merged:
        if len(cluster) > 1:
            log.debug("merged %d near-coincident roots near t=%g", len(cluster), cluster[0])
        out.append(float(np.mean(cluster)))
    return out
