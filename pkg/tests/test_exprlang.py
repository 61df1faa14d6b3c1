import math

import numpy as np
import pytest

from framedyn.exprlang import (Add, Const, Div, EvalDomainError, ExprFunction,
                               ExprSyntaxError, Fun, Mul, Neg, Pow, Ref,
                               UnboundNameError, UnknownFunctionError,
                               eval_jet2, eval_value, parse, tree_eval)
from framedyn.jets import TaylorValue


class TestParse:
    def test_ast_shape_product_sum(self):
        assert parse("q1*u2 + u3") == Add(Mul(Ref("q1"), Ref("u2")), Ref("u3"))

    def test_ast_shape_unary_minus_over_product(self):
        got = parse("-(R/2)*cos(theta)")
        want = Neg(Mul(Div(Ref("R"), Const(2.0)), Fun("cos", Ref("theta"))))
        assert got == want

    def test_precedence_and_associativity(self):
        assert parse("a - b - c") == Sub2("a", "b", "c")
        assert parse("a + b*c") == Add(Ref("a"), Mul(Ref("b"), Ref("c")))
        assert parse("a/b/c") == Div(Div(Ref("a"), Ref("b")), Ref("c"))
        assert parse("-a + b") == Add(Neg(Ref("a")), Ref("b"))
        assert parse("a * -b") == Mul(Ref("a"), Neg(Ref("b")))

    def test_pow_requires_integer_literal(self):
        assert parse("pow(q1, 2)") == Pow(Ref("q1"), 2)
        assert parse("pow(q1, -3)") == Pow(Ref("q1"), -3)
        with pytest.raises(ExprSyntaxError):
            parse("pow(q1, 2.5)")
        with pytest.raises(ExprSyntaxError):
            parse("pow(q1, u2)")

    def test_numbers(self):
        assert parse("2.5e-3") == Const(2.5e-3)
        assert parse(".5") == Const(0.5)
        assert parse("1e5") == Const(1e5)

    def test_syntax_error_carries_position(self):
        with pytest.raises(ExprSyntaxError) as ei:
            parse("q1 + \n* 2")
        assert ei.value.line == 2
        assert ei.value.col == 1
        assert "expected" in str(ei.value)

    def test_unbalanced_paren(self):
        with pytest.raises(ExprSyntaxError) as ei:
            parse("sin(q1")
        assert "')'" in str(ei.value)

    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError) as ei:
            parse("sinh(q1)")
        assert "sinh" in str(ei.value)

    def test_trailing_garbage(self):
        with pytest.raises(ExprSyntaxError):
            parse("q1 q2")

    def test_unexpected_character(self):
        with pytest.raises(ExprSyntaxError):
            parse("q1 @ 2")


def Sub2(a, b, c):
    from framedyn.exprlang import Sub
    return Sub(Sub(Ref(a), Ref(b)), Ref(c))


class TestEvalJet2:
    def test_bilinear_product(self):
        j = eval_jet2("q1*u2", {"q1": 2, "u2": 3}, {}, {"q1": 1}, {"u2": 1})
        assert j.as_tuple() == (6.0, 3.0, 2.0, 1.0)

    def test_sine_at_origin(self):
        j = eval_jet2("sin(q1)", {"q1": 0}, {}, {"q1": 1}, {"q1": 1})
        assert j.as_tuple() == (0.0, 1.0, 1.0, 0.0)

    def test_pow_times_velocity(self):
        j = eval_jet2("pow(q1,2)*u2", {"q1": 1, "u2": 2}, {},
                      {"q1": 1}, {"q1": 1})
        assert j.as_tuple() == (2.0, 4.0, 4.0, 4.0)
        h = 1e-5
        f = lambda q1: q1 ** 2 * 2.0
        d12 = (f(1 + 2 * h) - 2 * f(1) + f(1 - 2 * h)) / (4 * h * h)
        assert j.d12 == pytest.approx(d12, rel=1e-6)

    def test_trig_identity(self):
        e = parse("pow(sin(q1), 2) + pow(cos(q1), 2)")
        for x in np.linspace(-3, 3, 17):
            assert eval_value(e, {"q1": x}) == pytest.approx(1.0, abs=1e-15)

    def test_parameters_are_constant(self):
        j = eval_jet2("R*q1", {"q1": 2.0}, {"R": 3.0}, {"q1": 1}, {"q1": 1})
        assert j.as_tuple() == (6.0, 3.0, 3.0, 0.0)

    def test_zero_directions_zero_derivatives(self):
        j = eval_jet2("exp(q1)*sin(q1)", {"q1": 0.8}, {}, {}, {})
        assert j.d1 == 0.0 and j.d2 == 0.0 and j.d12 == 0.0
        assert j.value == pytest.approx(math.exp(0.8) * math.sin(0.8))

    def test_swap_directions_swaps_d1_d2(self):
        point = {"q1": 0.4, "u1": -1.2}
        d1, d2 = {"q1": 1.0, "u1": 0.3}, {"u1": 1.0}
        a = eval_jet2("sin(q1)*u1 + pow(u1,3)", point, {}, d1, d2)
        b = eval_jet2("sin(q1)*u1 + pow(u1,3)", point, {}, d2, d1)
        assert (a.d1, a.d2) == (b.d2, b.d1)
        assert a.value == b.value and a.d12 == b.d12

    def test_deterministic_bit_identical(self):
        args = ("exp(q1/3)*tan(u1) - sqrt(q1+2)", {"q1": 0.37, "u1": 0.21},
                {}, {"q1": 0.83}, {"u1": -0.4})
        a = eval_jet2(*args)
        b = eval_jet2(*args)
        assert a.as_tuple() == b.as_tuple()

    def test_unbound_name(self):
        with pytest.raises(UnboundNameError):
            eval_jet2("q1 + zz", {"q1": 1.0}, {}, {}, {})

    def test_domain_errors(self):
        with pytest.raises(EvalDomainError):
            eval_value(parse("1/q1"), {"q1": 0.0})
        with pytest.raises(EvalDomainError):
            eval_value(parse("log(q1)"), {"q1": -1.0})
        with pytest.raises(EvalDomainError):
            eval_value(parse("sqrt(q1)"), {"q1": -4.0})


class TestExprFunction:
    def test_unbound_name_at_build(self):
        with pytest.raises(UnboundNameError):
            ExprFunction("q1 + zz", ["q1"])

    def test_compiled_matches_tree_walk(self, rng):
        exprs = [
            "exp(q1/2)*sin(q1*u2) - sqrt(u2+3)/tan(q1+2) + pow(u2,-2)",
            "-(q1 - u2*(q1 + 2))*cos(u2) + log(q1*q1 + 1)",
            "pow(sin(q1),3)*pow(u2,2) - q1/(u2*u2 + 1)",
        ]
        for src in exprs:
            f = ExprFunction(src, ["q1", "u2"])
            for _ in range(20):
                vals = tuple(rng.uniform(0.2, 1.5, 2))
                dirs = tuple(tuple(rng.normal(size=2)) for _ in range(2))
                got = f.taylor(vals, (), dirs)
                env = {
                    "q1": TaylorValue.variable(
                        vals[0], (dirs[0][0], dirs[1][0]), 2),
                    "u2": TaylorValue.variable(
                        vals[1], (dirs[0][1], dirs[1][1]), 2),
                }
                want = tree_eval(f.expr, env).c
                assert got == tuple(want)

    def test_batched_tree_matches_scalar_compiled(self, rng):
        f = ExprFunction("sin(a)*b + pow(b,2)/(a*a + 1)", ["a", "b"])
        pts = rng.normal(size=(40, 2))
        d1 = rng.normal(size=(40, 2))
        env = {
            "a": TaylorValue.variable(pts[:, 0], (d1[:, 0],), 1),
            "b": TaylorValue.variable(pts[:, 1], (d1[:, 1],), 1),
        }
        batch = f.taylor_env(env)
        for i in range(40):
            got = f.taylor(tuple(pts[i]), (), (tuple(d1[i]),))
            assert got[0] == pytest.approx(batch.c[0][i], abs=0)
            assert got[1] == pytest.approx(batch.c[1][i], abs=0)


def _builtin_expressions():
    from framedyn import builtin
    seen = []
    for name in ("nonholonomic_particle", "vertical_disk", "carriage"):
        sysd = builtin(name)
        names = list(sysd.coords) + list(sysd.vel_names) + [
            f"v{i+1}" for i in range(sysd.m)]
        seen.append((sysd.lagrangian_expr, names, sysd.params))
        for row in sysd.frame_exprs:
            for e in row:
                seen.append((e, names, sysd.params))
        for ref in sysd.references.values():
            for e in (ref if isinstance(ref, list) else [ref]):
                seen.append((e, names, sysd.params))
        for e in sysd.builtin_k or []:
            seen.append((e, names, sysd.params))
    return seen


def test_jets_match_finite_differences_on_builtin_expressions():
    """d1, d2, d12 vs central finite differences, 1000 random samples."""
    rng = np.random.default_rng(11)
    pool = _builtin_expressions()
    h = 1e-5
    checked = 0
    while checked < 1000:
        src, names, params = pool[rng.integers(len(pool))]
        f = ExprFunction(src, names, tuple(params))
        pvals = tuple(params.values())
        x = rng.uniform(-1.5, 1.5, len(names))
        w1 = rng.normal(size=len(names))
        w2 = rng.normal(size=len(names))
        jet = f.taylor(tuple(x), pvals, (tuple(w1), tuple(w2)))

        def val(y):
            return f.value(tuple(y), pvals)

        f0 = abs(val(x))
        d1 = (val(x + h * w1) - val(x - h * w1)) / (2 * h)
        d2 = (val(x + h * w2) - val(x - h * w2)) / (2 * h)
        d12 = (val(x + h * (w1 + w2)) - val(x + h * (w1 - w2))
               - val(x - h * (w1 - w2)) + val(x - h * (w1 + w2))) / (4 * h * h)
        # First differences carry an eps|f|/h roundoff floor (negligible);
        # the second difference carries eps|f|/h^2, which at h = 1e-5 is a
        # few 1e-6 |f| all by itself.  The comparison is rel-1e-6 above the
        # reference's own floor.
        eps_floor = 4 * 2.3e-16 / (h * h) * max(1.0, f0)
        for got, fd in ((jet[1], d1), (jet[2], d2)):
            assert abs(got - fd) <= 1e-6 * max(1.0, abs(got), abs(fd))
        assert abs(jet[3] - d12) <= (1e-6 * max(1.0, abs(jet[3]), abs(d12))
                                     + eps_floor)
        checked += 1
