import math

import numpy as np
import pytest

from regcover.errors import DomainError, ScanTooCoarse
from regcover.expr import (
    Const, Exp, Log, Power, UnaryRestriction, Var, const, isolate_roots,
    parse_expr, var,
)


def test_eval_circle_point():
    e = var(0) ** 2 + var(1) ** 2 - 1
    assert e.eval([1.0, 0.0]) == 0.0


def test_eval_real_power():
    e = Power(var(0), 1.5)
    assert e.eval([0.01]) == pytest.approx(0.001, abs=1e-15)


def test_log_domain_error():
    with pytest.raises(DomainError):
        Log(var(0)).eval([-1.0])


def test_division_by_zero():
    with pytest.raises(DomainError):
        (const(1) / var(0)).eval([0.0])


def test_power_domain():
    with pytest.raises(DomainError):
        Power(var(0), 0.5).eval([-4.0])
    # integer exponents work for every base
    assert Power(var(0), 3.0).eval([-2.0]) == -8.0


def test_grad_real_power():
    v, g = Power(var(0), 1.5).eval_grad([0.04])
    assert v == pytest.approx(0.008, abs=1e-15)
    assert g[0] == pytest.approx(0.3, abs=1e-12)


def test_grad_product_rule():
    v, g = (var(0) * var(1)).eval_grad([2.0, 3.0])
    assert v == 6.0
    assert np.allclose(g, [3.0, 2.0])


def test_grad_log():
    v, g = Log(var(0)).eval_grad([0.01])
    assert v == pytest.approx(math.log(0.01), abs=1e-9)
    assert g[0] == pytest.approx(100.0, abs=1e-9)


def test_parse_roundtrip():
    e = parse_expr("x1^2 + x2^2 - 1")
    assert e.eval([0.6, 0.8]) == pytest.approx(0.0, abs=1e-12)
    assert parse_expr("exp(log(x1))").eval([2.5]) == pytest.approx(2.5)
    assert parse_expr("-x1 * 2 + 3 / x2").eval([1.0, 3.0]) == pytest.approx(-1.0)
    # non-constant exponent desugars through exp/log
    e = parse_expr("x1 ^ x2")
    assert e.eval([2.0, 3.0]) == pytest.approx(8.0, rel=1e-12)
    with pytest.raises(DomainError):
        e.eval([-2.0, 3.0])


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_expr("x1 +")
    with pytest.raises(ValueError):
        parse_expr("y1 + 2")
    with pytest.raises(ValueError):
        parse_expr("x1 $ 2")


def _random_expr(rng, depth, nvars):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.4:
            return Const(float(rng.uniform(-2, 2))), lambda x: True
        i = int(rng.integers(nvars))
        return Var(i), lambda x: True
    kind = rng.choice(["sum", "prod", "quot", "pow", "log", "exp", "neg"])
    a, oka = _random_expr(rng, depth - 1, nvars)
    if kind == "sum":
        b, okb = _random_expr(rng, depth - 1, nvars)
        return a + b, lambda x: oka(x) and okb(x)
    if kind == "prod":
        b, okb = _random_expr(rng, depth - 1, nvars)
        return a * b, lambda x: oka(x) and okb(x)
    if kind == "quot":
        b, okb = _random_expr(rng, depth - 1, nvars)
        return a / b, lambda x: oka(x) and okb(x)
    if kind == "pow":
        r = float(rng.uniform(-2.5, 2.5))
        return Power(a, r), oka
    if kind == "log":
        return Log(a), oka
    if kind == "exp":
        return Exp(a), oka
    return -a, oka


def test_derivative_matches_central_differences():
    """Forward-mode gradient vs central differences, 1000 random trees."""
    rng = np.random.default_rng(0)
    nvars = 3
    checked = 0
    attempts = 0
    while checked < 1000 and attempts < 20000:
        attempts += 1
        e, _ = _random_expr(rng, int(rng.integers(1, 7)), nvars)
        x = rng.uniform(0.2, 1.8, size=nvars)
        try:
            v, g = e.eval_grad(x)
        except DomainError:
            continue
        if abs(v) > 1e8 or np.max(np.abs(g)) > 1e8:
            continue  # ill-conditioned for finite differences
        ok = True
        fd = np.zeros(nvars)
        for i in range(nvars):
            h = 1e-6 * (1.0 + abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            try:
                fd[i] = (e.eval(xp) - e.eval(xm)) / (2 * h)
            except DomainError:
                ok = False
                break
        if not ok:
            continue
        scale = max(1.0, np.max(np.abs(g)))
        assert np.max(np.abs(fd - g)) / scale <= 1e-5, e.to_text()
        checked += 1
    assert checked == 1000


def test_isolate_roots_circle_line():
    h = UnaryRestriction(parse_expr("x1^2 - 1"), np.array([0.0]), np.array([1.0]))
    roots = isolate_roots(h, (-2.0, 2.0), 1e-10)
    assert np.allclose(roots, [-1.0, 1.0], atol=1e-10)


def test_isolate_roots_empty_by_interval():
    e = parse_expr("(1 + x1 * 0)^2 + x1^2 - 1")  # (1)^2 + t^2 - 1 = t^2
    h = UnaryRestriction(e, np.array([0.0]), np.array([1.0]))
    assert isolate_roots(h, (0.1, 2.0), 1e-10) == []


def test_isolate_roots_negative_discriminant():
    e = parse_expr("1.09 * x1^2 + 1.2 * x1 + 3")  # 4(0.3)^2*4... disc < 0
    h = UnaryRestriction(e, np.array([0.0]), np.array([1.0]))
    assert isolate_roots(h, (-10.0, 10.0), 1e-10) == []


def test_isolate_roots_random_cubics():
    rng = np.random.default_rng(1)
    x = var(0)
    for _ in range(60):
        r = np.sort(rng.uniform(-4.0, 4.0, size=3))
        if np.min(np.diff(r)) < 1e-3:
            continue
        e = (x - r[0]) * (x - r[1]) * (x - r[2])
        h = UnaryRestriction(e, np.array([0.0]), np.array([1.0]))
        roots = isolate_roots(h, (-5.0, 5.0), 1e-10)
        assert len(roots) == 3
        assert np.max(np.abs(np.array(roots) - r)) <= 1e-10


def test_isolate_roots_deterministic():
    e = parse_expr("x1^3 - 2*x1 + 0.3")
    h = UnaryRestriction(e, np.array([0.0]), np.array([1.0]))
    a = isolate_roots(h, (-3.0, 3.0), 1e-10)
    b = isolate_roots(h, (-3.0, 3.0), 1e-10)
    assert a == b  # bit-identical


def test_scan_too_coarse():
    # root count cannot stabilize under the tiny density ceiling
    e = parse_expr("x1^2 - 1") * parse_expr("x1^2 - 0.9999")
    h = UnaryRestriction(e, np.array([0.0]), np.array([1.0]))
    with pytest.raises(ScanTooCoarse):
        isolate_roots(h, (-2.0, 2.0), 1e-10, density=2, max_density=4)


def test_unary_restriction_anchor():
    e = parse_expr("x1 + x2")
    h = UnaryRestriction(e, np.array([1.0, 2.0]), np.array([1.0, 0.0]))
    assert h.value(0.0) == e.eval([1.0, 2.0])
    assert h.derivative(0.5) == pytest.approx(1.0)


def test_eval_many_masks_domain():
    e = parse_expr("log(x1)")
    vals, valid = e.eval_many(np.array([[1.0], [-1.0], [math.e]]))
    assert valid.tolist() == [True, False, True]
    assert vals[0] == 0.0
    assert vals[2] == pytest.approx(1.0)
