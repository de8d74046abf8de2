"""Taylor arithmetic against hand derivatives and the finite-difference oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csym_rd import calc
from csym_rd.calc import CallableField, Const, Var, cos, exp, fd_check, log, sin, sqrt, taylor_eval
from csym_rd.errors import DomainError, UnsupportedOrder

t, x, u, v = Var("t"), Var("x"), Var("u"), Var("v")


def test_square_of_u():
    tv = taylor_eval(u ** 2, (0.0, 0.0, 3.0, 1.0))
    assert tv.val == 9.0
    assert tv.d("u") == 6.0
    assert tv.d("u", "u") == 2.0


def test_exp_2x():
    tv = taylor_eval(exp(2 * x), (0.0, 0.0, 1.0, 1.0))
    assert (tv.val, tv.d("x"), tv.d("x", "x")) == (1.0, 2.0, 4.0)


def test_monomial_v4_u2():
    tv = taylor_eval(v ** 4 * u ** 2, (0.0, 0.0, 1.0, 1.0))
    assert tv.val == 1.0
    assert tv.d("u") == 2.0 and tv.d("v") == 4.0
    assert tv.d("u", "u") == 2.0 and tv.d("u", "v") == 8.0 and tv.d("v", "v") == 12.0


def test_hessian_symmetric_and_order_flags():
    f = sin(t * x) * u ** 1.5 + v * exp(x * u)
    tv = taylor_eval(f, (0.3, -0.2, 1.4, 0.8))
    H = tv.hessian
    assert np.array_equal(H, np.swapaxes(H, -1, -2))
    t1 = taylor_eval(f, (0.3, -0.2, 1.4, 0.8), order=1)
    assert t1.hess is None and np.allclose(t1.grad, tv.grad, rtol=0, atol=0)
    t0 = taylor_eval(f, (0.3, -0.2, 1.4, 0.8), order=0)
    assert t0.grad is None and t0.val == tv.val
    with pytest.raises(UnsupportedOrder):
        taylor_eval(f, (0, 0, 1, 1), order=3)


def test_fd_check_examples():
    assert fd_check(u ** 2, (0.0, 0.0, 3.0, 1.0), 1e-4) < 1e-7
    assert fd_check(exp(2 * x), (0.0, 0.0, 1.0, 1.0), 1e-4) < 1e-6
    assert fd_check(Const(7.0), (0.1, 0.2, 0.3, 0.4), 1e-4) == 0.0


def test_domain_errors():
    with pytest.raises(DomainError):
        calc.evaluate(log(u), (0, 0, -1.0, 1.0))
    with pytest.raises(DomainError):
        calc.evaluate(u ** 0.5, (0, 0, -1.0, 1.0))
    with pytest.raises(DomainError):
        calc.evaluate(1.0 / (u - 1.0), (0, 0, 1.0, 1.0))
    # integer powers of negative numbers are fine
    assert calc.evaluate(u ** 3, (0, 0, -2.0, 1.0)) == -8.0


def test_callable_field_declared_orders():
    f0 = CallableField(lambda t_, x_, u_, v_: u_ * v_, 0)
    assert calc.evaluate(f0, (0, 0, 2.0, 3.0)) == 6.0
    with pytest.raises(UnsupportedOrder):
        taylor_eval(f0, (0, 0, 2.0, 3.0), order=1)

    def fn(t_, x_, u_, v_):
        val = u_ * v_
        g = np.stack([0 * u_, 0 * u_, v_, u_], axis=-1)
        H = np.zeros(np.shape(u_) + (4, 4))
        H[..., 2, 3] = H[..., 3, 2] = 1.0
        return val, g, H

    f2 = CallableField(fn, 2)
    # composition through a callable field obeys the chain rule
    comp = exp(f2)
    tv = taylor_eval(comp, (0.0, 0.0, 2.0, 0.5))
    e = math.exp(1.0)
    assert np.isclose(tv.d("u"), 0.5 * e) and np.isclose(tv.d("u", "v"), e * (1 + 0.5 * 2.0))


def test_batched_evaluation_matches_scalar():
    f = exp(x) * u ** 2 + cos(t) * v
    pts = np.array([[0.1, 0.2, 1.1, 0.7], [0.5, -0.3, 1.9, 1.2]])
    tv = taylor_eval(f, pts.T)
    for i, p in enumerate(pts):
        ts = taylor_eval(f, p)
        assert tv.val[i] == ts.val
        assert np.array_equal(tv.grad[i], ts.grad)
        assert np.array_equal(tv.hess[i], ts.hess)


def test_deterministic():
    f = sqrt(u) * sin(x * v) / (1 + t ** 2)
    a = taylor_eval(f, (0.2, 0.3, 1.3, 0.9))
    b = taylor_eval(f, (0.2, 0.3, 1.3, 0.9))
    assert a.val.tobytes() == b.val.tobytes() and a.hess.tobytes() == b.hess.tobytes()


# chain rule on hand-built compositions
def test_chain_rule_exp_of_sin():
    tv = taylor_eval(exp(sin(x)), (0.0, 0.7, 1.0, 1.0))
    s, c = math.sin(0.7), math.cos(0.7)
    f = math.exp(s)
    assert np.isclose(tv.d("x"), f * c, rtol=1e-15)
    assert np.isclose(tv.d("x", "x"), f * (c * c - s), rtol=1e-14)


def test_chain_rule_log_of_product():
    tv = taylor_eval(log(u * v), (0.0, 0.0, 2.0, 3.0))
    assert np.isclose(tv.d("u"), 0.5) and np.isclose(tv.d("v"), 1 / 3)
    assert np.isclose(tv.d("u", "u"), -0.25) and tv.d("u", "v") == 0.0


def test_chain_rule_substitution():
    g = u ** 3
    comp = g.subs(u=exp(x) * v)
    tv = taylor_eval(comp, (0.0, 0.4, 1.0, 1.5))
    w = math.exp(0.4) * 1.5
    assert np.isclose(tv.val, w ** 3)
    assert np.isclose(tv.d("x"), 3 * w ** 3)
    assert np.isclose(tv.d("x", "v"), 9 * w ** 3 / 1.5)


# property-based: random expression trees

LEAVES = st.sampled_from([t, x, u, v, Const(0.5), Const(-1.25), Const(2.0)])


def _grow(children):
    return st.one_of(
        st.tuples(children, children).map(lambda p: p[0] + p[1]),
        st.tuples(children, children).map(lambda p: p[0] - p[1]),
        st.tuples(children, children).map(lambda p: p[0] * p[1]),
        st.tuples(children, children).map(lambda p: p[0] / (2.5 + sin(p[1]))),
        children.map(lambda a: sin(a)),
        children.map(lambda a: cos(a)),
        children.map(lambda a: exp(0.3 * sin(a))),
        children.map(lambda a: log(1.5 + cos(a))),
        st.tuples(children, st.sampled_from([-1.5, -1.0, 0.5, 2.0, 3.0])).map(
            lambda p: (2.0 + sin(p[0])) ** p[1]),
    )


EXPRS = st.recursive(LEAVES, _grow, max_leaves=8)
POINTS = st.tuples(st.floats(0, 1), st.floats(-1, 1), st.floats(0.5, 2), st.floats(0.5, 2))


@settings(max_examples=100, deadline=None)
@given(EXPRS, POINTS)
def test_fd_oracle_random_trees(f, p):
    val = float(calc.evaluate(f, p))
    assert fd_check(f, p, 1e-5) < 1e-5 * (1 + abs(val))


@settings(max_examples=50, deadline=None)
@given(EXPRS, EXPRS, st.floats(-3, 3), st.floats(-3, 3), POINTS)
def test_linearity(f, g, a, b, p):
    lhs = taylor_eval(a * f + b * g, p)
    tf, tg = taylor_eval(f, p), taylor_eval(g, p)
    for attr in ("val", "grad", "hess"):
        rhs = a * getattr(tf, attr) + b * getattr(tg, attr)
        scale = 1 + np.max(np.abs(a * getattr(tf, attr))) + np.max(np.abs(b * getattr(tg, attr)))
        assert np.max(np.abs(getattr(lhs, attr) - rhs)) <= 1e-14 * scale


def test_fd_error_is_second_order():
    f = exp(u * x) * sin(v + t)
    p = (0.3, 0.4, 1.2, 0.9)
    e1, e2 = fd_check(f, p, 1e-2), fd_check(f, p, 5e-3)
    assert 3.0 < e1 / e2 < 5.0
