"""Exact arithmetic core: rational functions in canonical form.

An :class:`Expr` is a quotient of two integer-coefficient multivariate
polynomials over the field symbols declared in a :class:`Workspace`.
Canonical form: gcd(numerator, denominator) = 1 (integer contents included),
the denominator has positive leading coefficient under the workspace's graded
lexicographic order, and zero is uniquely (0, 1).  Rational coefficients are
carried as integer denominators, so every coefficient computation is exact.

Expr values are immutable and safe to share between threads; all operations
are pure functions of their inputs.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd as igcd

from .poly import (
    MonomialTable, padd, psub, pneg, pscale, pmul, ppow, plc, pprimitive,
    pdiv_exact, pdiff, peval, pgcd,
)


class KernelError(Exception):
    """Base class for exact-arithmetic errors."""


class ParseError(KernelError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class PoleError(KernelError):
    """Evaluation point lies on the pole set of the expression."""


class Symbol:
    """A named variable: a field symbol of a workspace, or a jet symbol.

    Field symbols index the coefficient field; jet symbols (created by the jet
    layer) carry a dependent-variable index and an x-derivative order and never
    appear inside Expr values.
    """

    __slots__ = ("name", "kind", "index", "family", "comp", "order")

    def __init__(self, name: str, kind: str = "field", index: int | None = None,
                 family: str | None = None, comp: int | None = None,
                 order: int | None = None):
        if kind == "jet" and (order is None or order < 0):
            raise KernelError(f"jet symbol {name!r} needs derivative order >= 0")
        self.name = name
        self.kind = kind
        self.index = index
        self.family = family
        self.comp = comp
        self.order = order

    def __repr__(self):
        return f"Symbol({self.name!r})"

    def __str__(self):
        return self.name


class Workspace:
    """An ordered table of field symbols fixing the monomial order.

    The graded lexicographic order follows the declaration order: earlier
    symbols are lexicographically more significant.
    """

    def __init__(self, names, bits: int = 16):
        names = list(names)
        if len(set(names)) != len(names):
            raise KernelError("symbol names must be unique within a workspace")
        self.symbols = [Symbol(n, "field", i) for i, n in enumerate(names)]
        self._by_name = {s.name: s for s in self.symbols}
        self.table = MonomialTable(len(names), bits)
        self._zero = Expr(self, {}, {0: 1})
        self._one = Expr(self, {0: 1}, {0: 1})

    def sym(self, name: str) -> Symbol:
        try:
            return self._by_name[name]
        except KeyError:
            raise KernelError(f"unknown symbol {name!r}") from None

    def var(self, name: str) -> Expr:
        s = self.sym(name)
        return Expr(self, {self.table.var_key(s.index): 1}, {0: 1})

    def const(self, value) -> Expr:
        if isinstance(value, Expr):
            if value.ws is not self:
                raise KernelError("expression belongs to another workspace")
            return value
        value = Fraction(value)
        num = {0: value.numerator} if value.numerator else {}
        return Expr(self, num, {0: value.denominator})

    @property
    def zero(self) -> Expr:
        return self._zero

    @property
    def one(self) -> Expr:
        return self._one

    def extended(self, extra_names, bits: int | None = None) -> "Workspace":
        """A new workspace with extra symbols appended after the current ones."""
        return Workspace([s.name for s in self.symbols] + list(extra_names),
                         bits if bits is not None else self.table.bits)

    def migrate(self, e: "Expr") -> "Expr":
        """Re-host an expression from a prefix workspace into this one."""
        if e.ws is self:
            return e
        mapping = {s: self.var(s.name) for s in e.free_symbols()}
        return e.substitute(mapping, self)

    def parse(self, text: str) -> "Expr":
        return parse(text, self)


class Expr:
    """Canonical rational function over a workspace's field symbols."""

    __slots__ = ("ws", "num", "den", "_hash")

    def __init__(self, ws: Workspace, num: dict, den: dict):
        # trusted constructor: (num, den) must already be canonical
        self.ws = ws
        self.num = num
        self.den = den
        self._hash = None

    @staticmethod
    def make(ws: Workspace, num: dict, den: dict) -> "Expr":
        """Build an Expr from an arbitrary integer-polynomial quotient."""
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            return ws._zero
        if plc(den)[1] < 0:
            num, den = pneg(num), pneg(den)
        cn, nn = pprimitive(num)
        cd, dd = pprimitive(den)
        ci = igcd(cn, cd)
        cn //= ci
        cd //= ci
        if dd != {0: 1}:
            h = pgcd(nn, dd, ws.table)
            if h != {0: 1}:
                nn = pdiv_exact(nn, h, ws.table)
                dd = pdiv_exact(dd, h, ws.table)
        return Expr(ws, pscale(nn, cn), pscale(dd, cd))

    # -- predicates ------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.num

    def __bool__(self) -> bool:
        return bool(self.num)

    def is_constant(self) -> bool:
        return set(self.num) <= {0} and set(self.den) <= {0}

    def as_fraction(self) -> Fraction:
        if not self.num:
            return Fraction(0)
        if set(self.num) <= {0} and set(self.den) <= {0}:
            return Fraction(self.num[0], self.den[0])
        raise KernelError("expression is not constant")

    def free_symbols(self) -> list[Symbol]:
        seen = 0
        for k in self.num:
            seen |= k
        for k in self.den:
            seen |= k
        T = self.ws.table
        out = []
        for i, s in enumerate(T._shifts):
            if (seen >> s) & T.mask:
                out.append(self.ws.symbols[i])
        return out

    def total_degree(self) -> int:
        T = self.ws.table
        dn = max((T.degree(k) for k in self.num), default=0)
        dd = max((T.degree(k) for k in self.den), default=0)
        return dn - dd

    # -- arithmetic ------------------------------------------------------

    def _coerce(self, other) -> "Expr | None":
        if isinstance(other, Expr):
            if other.ws is not self.ws:
                raise KernelError("operands belong to different workspaces")
            return other
        if isinstance(other, (int, Fraction)):
            return self.ws.const(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not self.num:
            return other
        if not other.num:
            return self
        T = self.ws.table
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        if d1 == d2:
            num = padd(n1, n2)
            if not num:
                return self.ws._zero
            g = pgcd(num, d1, T)
            if g != {0: 1}:
                return Expr(self.ws, pdiv_exact(num, g, T), pdiv_exact(d1, g, T))
            return Expr(self.ws, num, dict(d1))
        g = pgcd(d1, d2, T)
        if g == {0: 1}:
            num = padd(pmul(n1, d2), pmul(n2, d1))
            if not num:
                return self.ws._zero
            return Expr(self.ws, num, pmul(d1, d2))
        d2g = pdiv_exact(d2, g, T)
        num = padd(pmul(n1, d2g), pmul(n2, pdiv_exact(d1, g, T)))
        if not num:
            return self.ws._zero
        den = pmul(d1, d2g)
        h = pgcd(num, g, T)
        if h != {0: 1}:
            num = pdiv_exact(num, h, T)
            den = pdiv_exact(den, h, T)
        return Expr(self.ws, num, den)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.ws, pneg(self.num), self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not self.num or not other.num:
            return self.ws._zero
        T = self.ws.table
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        g1 = pgcd(n1, d2, T)
        if g1 != {0: 1}:
            n1 = pdiv_exact(n1, g1, T)
            d2 = pdiv_exact(d2, g1, T)
        g2 = pgcd(n2, d1, T)
        if g2 != {0: 1}:
            n2 = pdiv_exact(n2, g2, T)
            d1 = pdiv_exact(d1, g2, T)
        return Expr(self.ws, pmul(n1, n2), pmul(d1, d2))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.reciprocal()

    def reciprocal(self) -> "Expr":
        if not self.num:
            raise ZeroDivisionError("division by zero expression")
        num, den = self.den, self.num
        if plc(den)[1] < 0:
            num, den = pneg(num), pneg(den)
        return Expr(self.ws, num, den)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n == 0:
            return self.ws._one
        base = self if n > 0 else self.reciprocal()
        # coprime numerator/denominator stay coprime under powers
        return Expr(self.ws, ppow(base.num, abs(n)), ppow(base.den, abs(n)))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ws.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.ws is other.ws and self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(sorted(self.num.items())),
                               tuple(sorted(self.den.items()))))
        return self._hash

    # -- calculus and evaluation -----------------------------------------

    def diff(self, sym: Symbol) -> "Expr":
        if sym.kind != "field" or self.ws.symbols[sym.index] is not sym:
            raise KernelError(f"symbol {sym.name!r} is not a field symbol here")
        T = self.ws.table
        i = sym.index
        if self.den == {0: 1}:
            return Expr.make(self.ws, pdiff(self.num, i, T), {0: 1})
        dn = pdiff(self.num, i, T)
        dd = pdiff(self.den, i, T)
        t = psub(pmul(dn, self.den), pmul(self.num, dd))
        return Expr.make(self.ws, t, pmul(self.den, self.den))

    def eval_at(self, assignment: dict) -> Fraction:
        """Exact value at a point given as {Symbol: rational}."""
        vals = [None] * len(self.ws.symbols)
        for s, v in assignment.items():
            if isinstance(s, str):
                s = self.ws.sym(s)
            vals[s.index] = Fraction(v)
        for s in self.free_symbols():
            if vals[s.index] is None:
                raise KernelError(f"no value for symbol {s.name!r}")
        vals = [v if v is not None else Fraction(0) for v in vals]
        T = self.ws.table
        d = peval(self.den, vals, T)
        if d == 0:
            raise PoleError("denominator vanishes at the evaluation point")
        return Fraction(peval(self.num, vals, T)) / d

    def substitute(self, mapping: dict, target: Workspace | None = None) -> "Expr":
        """Evaluate at Expr-valued points, producing an Expr in `target`.

        Every free symbol must either be mapped or (when target is the home
        workspace) is kept as itself.
        """
        target = target or self.ws
        images: dict[int, Expr] = {}
        for s, e in mapping.items():
            if isinstance(s, str):
                s = self.ws.sym(s)
            if not isinstance(e, Expr):
                e = target.const(e)
            if e.ws is not target:
                raise KernelError("substitution image in wrong workspace")
            images[s.index] = e
        for s in self.free_symbols():
            if s.index not in images:
                if target is self.ws:
                    images[s.index] = self.ws.var(s.name)
                else:
                    raise KernelError(f"symbol {s.name!r} not covered by substitution")
        T = self.ws.table
        pows: dict[tuple[int, int], Expr] = {}

        def power(i: int, e: int) -> Expr:
            p = pows.get((i, e))
            if p is None:
                p = images[i] ** e
                pows[(i, e)] = p
            return p

        def image_of(poly: dict) -> Expr:
            terms = []
            for k, c in poly.items():
                t = target.const(c)
                for i, e in enumerate(T.unpack(k)):
                    if e:
                        t = t * power(i, e)
                terms.append(t)
            return expr_sum(target, terms)

        pn = image_of(self.num)
        pd = image_of(self.den)
        if pd.is_zero:
            raise PoleError("substitution maps the denominator to zero")
        return pn / pd

    # -- printing --------------------------------------------------------

    def __str__(self):
        num = _poly_str(self.num, self.ws)
        if self.den == {0: 1}:
            return num
        den = _poly_str(self.den, self.ws)
        if len(self.num) > 1:
            num = f"({num})"
        if _den_needs_parens(self.den, self.ws):
            den = f"({den})"
        return f"{num}/{den}"

    def __repr__(self):
        return f"Expr({self})"


def expr_sum(ws: Workspace, terms) -> Expr:
    """Sum of expressions over a shared denominator: one gcd at the end.

    Considerably faster than repeated binary addition when many terms share
    structured denominators.
    """
    terms = [t for t in terms if t.num]
    if not terms:
        return ws._zero
    if len(terms) == 1:
        return terms[0]
    T = ws.table
    den = {0: 1}
    for t in terms:
        if t.den != {0: 1}:
            g = pgcd(den, t.den, T)
            den = pmul(den, pdiv_exact(t.den, g, T))
    num: dict = {}
    for t in terms:
        if t.den == den:
            num = padd(num, t.num)
        else:
            num = padd(num, pmul(t.num, pdiv_exact(den, t.den, T)))
    return Expr.make(ws, num, den)


def _poly_str(f: dict, ws: Workspace) -> str:
    if not f:
        return "0"
    T = ws.table
    names = [s.name for s in ws.symbols]
    parts = []
    for k in sorted(f, reverse=True):
        c = f[k]
        factors = []
        for i, e in enumerate(T.unpack(k)):
            if e == 1:
                factors.append(names[i])
            elif e:
                factors.append(f"{names[i]}^{e}")
        mono = "*".join(factors)
        a = abs(c)
        if mono:
            body = mono if a == 1 else f"{a}*{mono}"
        else:
            body = str(a)
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f" + {body}" if c > 0 else f" - {body}")
    return "".join(parts)


def _den_needs_parens(den: dict, ws: Workspace) -> bool:
    if len(den) > 1:
        return True
    (k, c), = den.items()
    if k == 0:
        return False  # plain integer
    if c != 1:
        return True   # coefficient and variables both present
    T = ws.table
    return sum(1 for e in T.unpack(k) if e) > 1


# -- parser --------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, ws: Workspace):
        self.tokens = tokens
        self.ws = ws
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)

    def parse_expr(self) -> Expr:
        e = self.parse_term()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.parse_term()
                e = e + rhs if val == "+" else e - rhs
            else:
                return e

    def parse_term(self) -> Expr:
        e = self.parse_unary()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.parse_unary()
                if val == "/":
                    if rhs.is_zero:
                        raise ParseError("division by zero", pos)
                    e = e / rhs
                else:
                    e = e * rhs
            else:
                return e

    def parse_unary(self) -> Expr:
        sign = 1
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                if val == "-":
                    sign = -sign
            else:
                break
        e = self.parse_power()
        return e if sign > 0 else -e

    def parse_power(self) -> Expr:
        e = self.parse_atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.next()
            n = self.parse_exponent()
            if n < 0 and e.is_zero:
                raise ParseError("zero raised to a negative power", pos)
            e = e ** n
        return e

    def parse_exponent(self) -> int:
        kind, val, pos = self.peek()
        if kind == "op" and val == "(":
            self.next()
            n = self.parse_exponent()
            self.expect_op(")")
        else:
            sign = 1
            while kind == "op" and val in "+-":
                self.next()
                if val == "-":
                    sign = -sign
                kind, val, pos = self.peek()
            kind, val, pos = self.next()
            if kind != "int":
                raise ParseError("integer exponent expected", pos)
            n = sign * int(val)
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            # right-associative integer exponent towers
            self.next()
            m = self.parse_exponent()
            if m < 0:
                raise ParseError("negative exponent in exponent tower", pos)
            n = n ** m
        return n

    def parse_atom(self) -> Expr:
        kind, val, pos = self.next()
        if kind == "int":
            return self.ws.const(int(val))
        if kind == "name":
            try:
                return self.ws.var(val)
            except KernelError:
                raise ParseError(f"unknown symbol {val!r}", pos) from None
        if kind == "op" and val == "(":
            e = self.parse_expr()
            self.expect_op(")")
            return e
        raise ParseError("unexpected token", pos)


def parse(text: str, ws: Workspace) -> Expr:
    """Parse the expression grammar: rationals, symbols, + - * / ^, parens."""
    p = _Parser(_tokenize(text), ws)
    e = p.parse_expr()
    kind, _, pos = p.peek()
    if kind != "end":
        raise ParseError("trailing input", pos)
    return e


# -- exact linear solving --------------------------------------------------

class LinearSystem:
    """Equations (each an Expr equated to zero) affine in declared unknowns."""

    def __init__(self, equations, unknowns, ws: Workspace | None = None):
        self.equations = list(equations)
        self.unknowns = list(unknowns)
        if ws is None:
            if not self.equations:
                raise KernelError("empty system needs an explicit workspace")
            ws = self.equations[0].ws
        self.ws = ws


class LinearSolution:
    """Outcome of solve_linear.

    status is 'unique', 'underdetermined' or 'inconsistent'.  For solvable
    systems `assignment` maps every pivot unknown to an Expr that may involve
    the free unknowns; `free` lists the non-pivot unknowns.
    """

    def __init__(self, status: str, assignment: dict, free: list):
        self.status = status
        self.assignment = assignment
        self.free = free

    def __repr__(self):
        return f"LinearSolution({self.status}, free={[s.name for s in self.free]})"


def _extract_affine(eq: Expr, unknown_index: dict) -> tuple[dict, dict]:
    """Split an affine equation into {unknown position: coeff poly} and the
    constant polynomial part; coefficients stay polynomials over the full
    workspace (unknown symbols must not occur in them)."""
    ws = eq.ws
    T = ws.table
    bits = T.bits
    nvars = T.nvars
    unknown_mask = 0
    for i in unknown_index:
        unknown_mask |= T.mask << T._shifts[i]
    for k in eq.den:
        if k & unknown_mask:
            raise KernelError("equation denominator involves an unknown")
    coeffs: dict[int, dict] = {}
    const: dict = {}
    for k, c in eq.num.items():
        t = k & unknown_mask
        if not t:
            const[k] = c
            continue
        i = nvars - 1 - (t.bit_length() - 1) // bits
        if T.var_exp(k, i) != 1 or t & ~(T.mask << T._shifts[i]):
            raise KernelError("equation is not affine in the unknowns")
        coeffs.setdefault(i, {})[k - T.var_key(i, 1)] = c
    return coeffs, const


def solve_linear(ls: LinearSystem) -> LinearSolution:
    """Exact Gaussian elimination over the rational-function field."""
    if not ls.unknowns:
        raise KernelError("no unknowns declared")
    ws = ls.ws
    unknown_index = {s.index: pos for pos, s in enumerate(ls.unknowns)}
    rows = []
    all_const = True
    for eq in ls.equations:
        if eq.is_zero:
            continue
        coeffs, const = _extract_affine(eq, unknown_index)
        den = eq.den
        row = {}
        for i, poly in coeffs.items():
            row[unknown_index[i]] = Expr.make(ws, poly, dict(den))
        if const:
            row[-1] = Expr.make(ws, const, dict(den))
        for v in row.values():
            if not v.is_constant():
                all_const = False
        rows.append(row)

    if all_const:
        rows = [{c: v.as_fraction() for c, v in row.items()} for row in rows]
        zero, one = Fraction(0), Fraction(1)
    else:
        zero, one = ws.zero, ws.one

    pivots: dict[int, dict] = {}
    inconsistent = False
    for row in rows:
        while True:
            hit = None
            for c in row:
                if c >= 0 and c in pivots and (hit is None or c < hit):
                    hit = c
            if hit is None:
                break
            factor = row.pop(hit)
            for c, v in pivots[hit].items():
                if c == hit:
                    continue
                s = row.get(c, zero) - factor * v
                if s:
                    row[c] = s
                elif c in row:
                    del row[c]
        lead = min((c for c in row if c >= 0), default=None)
        if lead is None:
            if row:
                inconsistent = True
            continue
        inv = one / row[lead]
        pivots[lead] = {c: v * inv for c, v in row.items()}

    # reduced row echelon: clear pivot columns from earlier pivot rows
    for lead in sorted(pivots, reverse=True):
        prow = pivots[lead]
        for other_lead, orow in pivots.items():
            if other_lead >= lead or lead not in orow:
                continue
            factor = orow.pop(lead)
            for c, v in prow.items():
                if c == lead:
                    continue
                s = orow.get(c, zero) - factor * v
                if s:
                    orow[c] = s
                elif c in orow:
                    del orow[c]

    if inconsistent:
        return LinearSolution("inconsistent", {}, [])

    free = [s for pos, s in enumerate(ls.unknowns) if pos not in pivots]
    assignment = {}
    for lead, row in pivots.items():
        value = ws.zero
        for c, v in row.items():
            v_expr = ws.const(v) if not isinstance(v, Expr) else v
            if c == -1:
                value = value - v_expr
            elif c != lead:
                value = value - v_expr * ws.var(ls.unknowns[c].name)
        assignment[ls.unknowns[lead]] = value
    for s in free:
        assignment[s] = ws.var(s.name)
    status = "unique" if not free else "underdetermined"
    return LinearSolution(status, assignment, free)
