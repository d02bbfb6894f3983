"""Kernel tests: canonical arithmetic, parser, differentiation, linear solving.

Derived expected values are computed inside the tests by independent oracles
(point evaluation, symbolic difference quotients), never copied from the code
under test.
"""

import random
from fractions import Fraction

import pytest

from hamhydro.kernel import (
    Expr, KernelError, LinearSystem, ParseError, PoleError, Workspace,
    expr_sum, parse, solve_linear,
)
from hamhydro import poly


def qws():
    return Workspace([f"q{i}" for i in range(1, 7)])


def rand_expr(ws, rng, depth=2):
    """Random small rational function over the workspace."""
    def rand_poly():
        e = ws.zero
        for _ in range(rng.randint(1, 4)):
            term = ws.const(rng.randint(-6, 6))
            for _ in range(rng.randint(0, 2)):
                term = term * ws.var(rng.choice(ws.symbols).name)
            e = e + term
        return e
    num = rand_poly()
    den = ws.zero
    while den.is_zero:
        den = rand_poly()
    return num / den


def rand_point(ws, rng):
    return {s: Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for s in ws.symbols}


def eval_safe(e, pt):
    try:
        return e.eval_at(pt)
    except PoleError:
        return None


class TestPolyLayer:
    def test_gcd_of_constructed_products(self):
        ws = Workspace(["x", "y", "z"])
        T = ws.table
        rng = random.Random(7)
        for _ in range(40):
            a = rand_expr(ws, rng).num
            b = rand_expr(ws, rng).num
            h = rand_expr(ws, rng).num
            if not (a and b and h):
                continue
            f = poly.pmul(a, h)
            g = poly.pmul(b, h)
            got = poly.pgcd(f, g, T)
            # gcd(a*h, b*h) must be divisible by h and must divide both inputs
            assert poly.pdiv_exact(got, poly.pgcd(h, got, T), T) is not None
            assert poly.pdiv_exact(f, got, T) is not None
            assert poly.pdiv_exact(g, got, T) is not None
            cof = poly.pdiv_exact(f, got, T)
            cog = poly.pdiv_exact(g, got, T)
            assert poly.pgcd(cof, cog, T) == {0: 1}

    def test_prs_fallback_agrees_with_heuristic(self):
        ws = Workspace(["x", "y"])
        T = ws.table
        rng = random.Random(3)
        for _ in range(15):
            a = rand_expr(ws, rng).num
            h = rand_expr(ws, rng).num
            b = rand_expr(ws, rng).num
            if not (a and b and h):
                continue
            f, g = poly.pmul(a, h), poly.pmul(b, h)
            vars_ = sorted(set(poly.pvars(f, T)) | set(poly.pvars(g, T)))
            if not vars_:
                continue
            _, fp = poly.pprimitive(f)
            _, gp = poly.pprimitive(g)
            got_prs = poly._pos_lc(poly._prs_gcd(fp, gp, T, vars_))
            got = poly.pgcd(fp, gp, T)
            assert got_prs == got


class TestParsePrint:
    def test_zero(self):
        ws = qws()
        e = parse("0", ws)
        assert e.is_zero
        assert str(e) == "0"

    def test_charpoly_lambda1_coefficient(self):
        # the three-term polynomial q3*q6 - q4*q5 - q1
        ws = qws()
        e = parse("q3*q6 - q4*q5 - q1", ws)
        built = ws.var("q3") * ws.var("q6") - ws.var("q4") * ws.var("q5") - ws.var("q1")
        assert e == built
        assert len(e.num) == 3 and e.den == {0: 1}

    def test_flux_of_q4(self):
        ws = qws()
        e = parse("(q2 + q4*q6)/q5", ws)
        assert e.den == {ws.table.var_key(ws.sym("q5").index): 1}
        assert e == (ws.var("q2") + ws.var("q4") * ws.var("q6")) / ws.var("q5")

    def test_roundtrip_is_identity(self):
        ws = qws()
        rng = random.Random(11)
        for _ in range(60):
            e = rand_expr(ws, rng)
            assert parse(str(e), ws) == e

    def test_rational_coefficients_and_powers(self):
        ws = qws()
        e = parse("1/2*q1^2 - 3/4", ws)
        pt = {s: 2 for s in ws.symbols}
        assert e.eval_at(pt) == Fraction(1, 2) * 4 - Fraction(3, 4)
        assert parse("q1^-2", ws) == 1 / (ws.var("q1") ** 2)
        assert parse("2^3^2", ws) == ws.const(512)

    def test_errors(self):
        ws = qws()
        with pytest.raises(ParseError):
            parse("q1 + zz", ws)
        with pytest.raises(ParseError):
            parse("q1 / (q2 - q2)", ws)
        with pytest.raises(ParseError):
            parse("q1 ^ q2", ws)
        with pytest.raises(ParseError):
            parse("q1 +", ws)
        with pytest.raises(ParseError):
            parse("(q1", ws)


class TestArith:
    def test_x_over_x(self):
        ws = qws()
        rng = random.Random(23)
        for _ in range(10):
            x = rand_expr(ws, rng)
            if x.is_zero:
                continue
            assert x / x == ws.one

    def test_difference_of_squares(self):
        ws = Workspace(["u1", "u2"])
        u1, u2 = ws.var("u1"), ws.var("u2")
        assert (u1 ** 2 - u2 ** 2) / (u1 - u2) == u1 + u2

    def test_cancel_and_add_zero(self):
        ws = qws()
        q1, q5 = ws.var("q1"), ws.var("q5")
        assert (q1 * q5) / q5 + ws.zero == q1

    def test_canonical_uniqueness(self):
        ws = qws()
        rng = random.Random(5)
        for _ in range(60):
            a, b = rand_expr(ws, rng), rand_expr(ws, rng)
            c = (a + b) - b
            assert c.num == a.num and c.den == a.den

    def test_numeric_oracle_field_ops(self):
        # symbolic op then evaluate == evaluate then op, at >= 20 points
        ws = qws()
        rng = random.Random(17)
        checked = 0
        while checked < 20:
            a, b = rand_expr(ws, rng), rand_expr(ws, rng)
            pt = rand_point(ws, rng)
            va, vb = eval_safe(a, pt), eval_safe(b, pt)
            if va is None or vb is None:
                continue
            assert (a + b).eval_at(pt) == va + vb
            assert (a - b).eval_at(pt) == va - vb
            assert (a * b).eval_at(pt) == va * vb
            if vb != 0 and not b.is_zero:
                assert (a / b).eval_at(pt) == va / vb
            checked += 1

    def test_pow_matches_repeated_product(self):
        ws = qws()
        rng = random.Random(29)
        e = rand_expr(ws, rng)
        assert e ** 3 == e * e * e
        if not e.is_zero:
            assert e ** -2 == ws.one / (e * e)

    def test_expr_sum_matches_binary_addition(self):
        ws = qws()
        rng = random.Random(31)
        terms = [rand_expr(ws, rng) for _ in range(8)]
        acc = ws.zero
        for t in terms:
            acc = acc + t
        assert expr_sum(ws, terms) == acc


class TestDiff:
    def test_constant(self):
        ws = qws()
        assert ws.const(Fraction(7, 3)).diff(ws.sym("q1")).is_zero

    def diff_oracle(self, e, sym, pt):
        """Exact derivative at a point via the symbolic difference quotient
        (f(x + h) - f(x))/h evaluated at h = 0; independent of Expr.diff."""
        hw = Workspace(["h"])
        h = hw.var("h")
        shifted = {s: hw.const(pt[s]) for s in e.ws.symbols}
        shifted[sym] = hw.const(pt[sym]) + h
        fh = e.substitute(shifted, hw)
        f0 = hw.const(e.eval_at(pt))
        quotient = (fh - f0) / h
        return quotient.eval_at({hw.sym("h"): 0})

    def test_power_rule(self):
        ws = qws()
        e = parse("2*q5^2", ws)
        d = e.diff(ws.sym("q5"))
        assert d == parse("4*q5", ws)
        rng = random.Random(41)
        for _ in range(5):
            pt = rand_point(ws, rng)
            assert d.eval_at(pt) == self.diff_oracle(e, ws.sym("q5"), pt)

    def test_metric_entry_derivative(self):
        # d/dq1 of -2*(q1 + q4*q5) is -2
        ws = qws()
        e = parse("-2*(q1 + q4*q5)", ws)
        assert e.diff(ws.sym("q1")) == ws.const(-2)

    def test_diff_against_difference_quotient_oracle(self):
        ws = qws()
        rng = random.Random(43)
        checked = 0
        while checked < 20:
            e = rand_expr(ws, rng)
            sym = rng.choice(ws.symbols)
            pt = rand_point(ws, rng)
            if eval_safe(e, pt) is None:
                continue
            try:
                want = self.diff_oracle(e, sym, pt)
            except PoleError:
                continue
            assert e.diff(sym).eval_at(pt) == want
            checked += 1

    def test_linearity_and_leibniz(self):
        ws = qws()
        rng = random.Random(47)
        for _ in range(10):
            a, b = rand_expr(ws, rng), rand_expr(ws, rng)
            s = rng.choice(ws.symbols)
            assert (a + b).diff(s) == a.diff(s) + b.diff(s)
            assert (a * b).diff(s) == a.diff(s) * b + a * b.diff(s)


class TestEval:
    def test_zero_everywhere(self):
        ws = qws()
        assert ws.zero.eval_at({s: 1 for s in ws.symbols}) == 0

    def test_simple_sum(self):
        ws = qws()
        e = parse("q3 + q6", ws)
        assert e.eval_at({"q3": 1, "q6": 2}) == 3

    def test_pole_detection(self):
        ws = qws()
        e = parse("q1/q5", ws)
        with pytest.raises(PoleError):
            e.eval_at({"q1": 1, "q5": 0})

    def test_missing_symbol(self):
        ws = qws()
        with pytest.raises(KernelError):
            parse("q1 + q2", ws).eval_at({"q1": 1})


class TestSolveLinear:
    def test_single_equation(self):
        ws = Workspace(["x"])
        sol = solve_linear(LinearSystem([parse("x - 1", ws)], [ws.sym("x")]))
        assert sol.status == "unique"
        assert sol.assignment[ws.sym("x")] == ws.one

    def test_symmetric_pair(self):
        ws = Workspace(["x", "y"])
        eqs = [parse("x + y", ws), parse("x - y", ws)]
        sol = solve_linear(LinearSystem(eqs, [ws.sym("x"), ws.sym("y")]))
        assert sol.status == "unique"
        assert sol.assignment[ws.sym("x")].is_zero
        assert sol.assignment[ws.sym("y")].is_zero

    def test_inconsistent(self):
        ws = Workspace(["x"])
        eqs = [parse("x - 1", ws), parse("x - 2", ws)]
        sol = solve_linear(LinearSystem(eqs, [ws.sym("x")]))
        assert sol.status == "inconsistent"

    def test_underdetermined_reports_free(self):
        ws = Workspace(["x", "y", "z"])
        eqs = [parse("x + y + z", ws)]
        sol = solve_linear(LinearSystem(eqs, [ws.sym(n) for n in "xyz"]))
        assert sol.status == "underdetermined"
        assert len(sol.free) == 2

    def test_rational_function_coefficients(self):
        # coefficients from the ambient field, not just constants
        ws = Workspace(["t", "x", "y"])
        t = ws.var("t")
        x, y = ws.var("x"), ws.var("y")
        eqs = [t * x + y - t * t, x - y]
        sol = solve_linear(LinearSystem(eqs, [ws.sym("x"), ws.sym("y")]))
        assert sol.status == "unique"
        want = t * t / (t + 1)
        assert sol.assignment[ws.sym("x")] == want
        assert sol.assignment[ws.sym("y")] == want

    def test_backsubstitution_residuals_vanish(self):
        rng = random.Random(53)
        names = [f"a{i}" for i in range(4)]
        ws = Workspace(["s"] + names)
        unknowns = [ws.sym(n) for n in names]
        for _ in range(10):
            eqs = []
            for _ in range(rng.randint(2, 5)):
                e = ws.const(rng.randint(-3, 3))
                for u in unknowns:
                    c = rng.randint(-3, 3)
                    if c:
                        e = e + ws.const(c) * ws.var(u.name)
                eqs.append(e)
            sol = solve_linear(LinearSystem(eqs, unknowns, ws=ws))
            if sol.status == "inconsistent":
                continue
            subs = {u: sol.assignment[u] for u in unknowns}
            # general solutions may involve free unknowns; substituting the
            # assignment must annihilate every equation identically
            for eq in eqs:
                assert eq.substitute(subs).is_zero
