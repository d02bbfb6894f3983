"""Differential algebra on jet variables.

A :class:`JetExpr` is a polynomial in jet symbols with :class:`~hamhydro.kernel.Expr`
coefficients.  The dependent coordinates u^i are the workspace field symbols of
a :class:`JetSpace`; their x-derivatives u^i_x, u^i_xx, ... are jet symbols, as
are auxiliary covector components p_i and nonlocal potentials r_a with their
derivatives.

Potential coordinates are a pure relabelling: b^i_x is u^i, b^i_xx is u^i_x and
so on, shifting every jet order down by one.  Nothing is ever integrated.
"""

from __future__ import annotations

from fractions import Fraction

from .kernel import Expr, KernelError, Symbol, Workspace, expr_sum

# jet symbols are identified by (family, component, order); the coordinate
# family is named "u" in every space, its order-0 members being field symbols.
U = "u"


def _suffix(order: int) -> str:
    if order == 0:
        return ""
    return "_x" if order == 1 else f"_{order}x"


class JetSpace:
    """Coordinates plus registered auxiliary jet families over a workspace."""

    def __init__(self, ws: Workspace, coords):
        self.ws = ws
        self.coords = [ws.sym(c) if isinstance(c, str) else c for c in coords]
        self.coord_index = {s: i for i, s in enumerate(self.coords)}
        self.n = len(self.coords)
        self.families: dict[str, int] = {U: self.n}
        self._jet_symbols: dict[tuple, Symbol] = {}
        self._zero = JetExpr(self, {})

    def add_family(self, name: str, count: int) -> None:
        if name in self.families:
            if self.families[name] != count:
                raise KernelError(f"family {name!r} already declared differently")
            return
        if any(s.name.startswith(name) for s in self.ws.symbols):
            # keep printed jet names unambiguous against field symbols
            raise KernelError(f"family name {name!r} collides with a field symbol")
        self.families[name] = count

    def jet_symbol(self, family: str, comp: int, order: int) -> Symbol:
        key = (family, comp, order)
        s = self._jet_symbols.get(key)
        if s is None:
            if family not in self.families:
                raise KernelError(f"unknown jet family {family!r}")
            if not 0 <= comp < self.families[family]:
                raise KernelError(f"component {comp} out of range for family {family!r}")
            if family == U and order < 1:
                raise KernelError("order-0 coordinates are field symbols, not jets")
            base = self.coords[comp].name if family == U else f"{family}{comp + 1}"
            s = Symbol(base + _suffix(order), "jet", family=family, comp=comp, order=order)
            self._jet_symbols[key] = s
        return s

    # -- constructors ------------------------------------------------------

    @property
    def zero(self) -> "JetExpr":
        return self._zero

    def const(self, value) -> "JetExpr":
        e = value if isinstance(value, Expr) else self.ws.const(value)
        if e.is_zero:
            return self._zero
        return JetExpr(self, {(): e})

    def var(self, family: str, comp: int, order: int = 0) -> "JetExpr":
        if family == U and order == 0:
            return self.const(self.ws.var(self.coords[comp].name))
        key = (family, comp, order)
        self.jet_symbol(*key)
        return JetExpr(self, {((key, 1),): self.ws.one})

    def xjet(self, comp: int, order: int = 1) -> "JetExpr":
        """u^comp differentiated `order` times (1-based components)."""
        return self.var(U, comp - 1, order)


class JetExpr:
    """Polynomial in jet symbols with exact rational-function coefficients."""

    __slots__ = ("space", "terms")

    def __init__(self, space: JetSpace, terms: dict):
        self.space = space
        self.terms = terms

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def max_order(self) -> int:
        orders = [key[2] for mono in self.terms for key, _ in mono]
        return max(orders, default=0)

    def _coerce(self, other):
        if isinstance(other, JetExpr):
            if other.space is not self.space:
                raise KernelError("jet expressions from different spaces")
            return other
        if isinstance(other, (int, Fraction, Expr)):
            return self.space.const(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            s = terms.get(mono)
            s = c if s is None else s + c
            if s.is_zero:
                terms.pop(mono, None)
            else:
                terms[mono] = s
        return JetExpr(self.space, terms)

    __radd__ = __add__

    def __neg__(self):
        return JetExpr(self.space, {m: -c for m, c in self.terms.items()})

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
        if isinstance(other, (int, Fraction, Expr)) and not isinstance(other, JetExpr):
            c = other if isinstance(other, Expr) else self.space.ws.const(other)
            if c.is_zero:
                return self.space.zero
            return JetExpr(self.space, {m: v * c for m, v in self.terms.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        acc: dict[tuple, list] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                acc.setdefault(m, []).append(c1 * c2)
        return _build(self.space, acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        out = self.space.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Expr)):
            other = self.space.const(other)
        if not isinstance(other, JetExpr):
            return NotImplemented
        return self.space is other.space and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted((m, c) for m, c in self.terms.items())))

    # -- partial derivatives ----------------------------------------------

    def field_partial(self, sym: Symbol) -> "JetExpr":
        """Partial derivative with respect to an order-0 coordinate."""
        terms = {}
        for mono, c in self.terms.items():
            d = c.diff(sym)
            if d:
                terms[mono] = d
        return JetExpr(self.space, terms)

    def jet_partial(self, family: str, comp: int, order: int) -> "JetExpr":
        if family == U and order == 0:
            return self.field_partial(self.space.coords[comp])
        key = (family, comp, order)
        acc: dict[tuple, list] = {}
        for mono, c in self.terms.items():
            for i, (sym, p) in enumerate(mono):
                if sym == key:
                    rest = _mono_drop(mono, i)
                    acc.setdefault(rest, []).append(c * p)
                    break
        return _build(self.space, acc)

    def coefficient(self, mono: tuple) -> Expr:
        return self.terms.get(mono, self.space.ws.zero)

    def map_coefficients(self, fn) -> "JetExpr":
        terms = {}
        for mono, c in self.terms.items():
            v = fn(c)
            if v:
                terms[mono] = v
        return JetExpr(self.space, terms)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms):
            c = self.terms[mono]
            factors = []
            for (fam, comp, order), p in mono:
                s = self.space.jet_symbol(fam, comp, order)
                factors.append(s.name if p == 1 else f"{s.name}^{p}")
            body = "*".join(factors)
            cs = str(c)
            if body:
                cs = f"({cs})*{body}" if (len(c.num) > 1 or c.den != {0: 1} or cs.startswith("-")) else (
                    body if cs == "1" else f"{cs}*{body}")
            parts.append(cs)
        return " + ".join(parts)

    def __repr__(self):
        return f"JetExpr({self})"


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for k, p in m2:
        d[k] = d.get(k, 0) + p
    return tuple(sorted(d.items()))


def _mono_drop(mono: tuple, i: int) -> tuple:
    sym, p = mono[i]
    if p == 1:
        return mono[:i] + mono[i + 1:]
    return mono[:i] + ((sym, p - 1),) + mono[i + 1:]


def _build(space: JetSpace, acc: dict) -> JetExpr:
    terms = {}
    ws = space.ws
    for mono, parts in acc.items():
        c = parts[0] if len(parts) == 1 else expr_sum(ws, parts)
        if c:
            terms[mono] = c
    return JetExpr(space, terms)


# -- total derivatives -------------------------------------------------------

def total_x(e: JetExpr, xrules: dict | None = None) -> JetExpr:
    """Total x-derivative; raises every jet order by one via the chain rule.

    `xrules` optionally maps a family name to the list of JetExprs replacing
    the x-derivatives of its order-0 symbols (used for nonlocal potentials).
    """
    space = e.space
    acc: dict[tuple, list] = {}
    for mono, coeff in e.terms.items():
        for s in coeff.free_symbols():
            i = space.coord_index.get(s)
            if i is None:
                continue
            d = coeff.diff(s)
            if d:
                m = _mono_mul(mono, (((U, i, 1), 1),))
                acc.setdefault(m, []).append(d)
        for idx, (key, p) in enumerate(mono):
            fam, comp, order = key
            rest = _mono_drop(mono, idx)
            factor = coeff * p if p != 1 else coeff
            if xrules and fam in xrules and order == 0:
                rule = xrules[fam][comp]
                for m2, c2 in rule.terms.items():
                    m = _mono_mul(rest, m2)
                    acc.setdefault(m, []).append(factor * c2)
            else:
                m = _mono_mul(rest, (((fam, comp, order + 1), 1),))
                acc.setdefault(m, []).append(factor)
    return _build(space, acc)


def total_x_n(e: JetExpr, n: int, xrules: dict | None = None) -> JetExpr:
    for _ in range(n):
        e = total_x(e, xrules)
    return e


class EvolutionSystem:
    """Hydrodynamic-type system u^i_t = d/dx V^i(u) given by its fluxes."""

    def __init__(self, space: JetSpace, fluxes):
        self.space = space
        self.fluxes = [space.ws.const(f) if not isinstance(f, Expr) else f
                       for f in fluxes]
        if len(self.fluxes) != space.n:
            raise KernelError("one flux per coordinate required")
        coordset = set(space.coords)
        for f in self.fluxes:
            if not set(f.free_symbols()) <= coordset:
                raise KernelError("fluxes must depend on the coordinates only")
        self._d1: dict = {}
        self._d2: dict = {}
        self._d3: dict = {}
        self._dt_u: list[JetExpr] | None = None
        self._dt_cache: dict = {}

    # V^i_j, V^i_{jk}, V^i_{jkl} with caching; indices are 0-based
    def d1(self, i: int, j: int) -> Expr:
        v = self._d1.get((i, j))
        if v is None:
            v = self.fluxes[i].diff(self.space.coords[j])
            self._d1[(i, j)] = v
        return v

    def d2(self, i: int, j: int, k: int) -> Expr:
        j, k = min(j, k), max(j, k)
        v = self._d2.get((i, j, k))
        if v is None:
            v = self.d1(i, j).diff(self.space.coords[k])
            self._d2[(i, j, k)] = v
        return v

    def d3(self, i: int, j: int, k: int, l: int) -> Expr:
        j, k, l = sorted((j, k, l))
        v = self._d3.get((i, j, k, l))
        if v is None:
            v = self.d2(i, j, k).diff(self.space.coords[l])
            self._d3[(i, j, k, l)] = v
        return v

    def velocity_matrix(self) -> list[list[Expr]]:
        n = self.space.n
        return [[self.d1(i, j) for j in range(n)] for i in range(n)]

    def _dt_u_rules(self) -> list[JetExpr]:
        if self._dt_u is None:
            self._dt_u = [total_x(self.space.const(f)) for f in self.fluxes]
        return self._dt_u

    def dt_rule(self, key: tuple) -> JetExpr:
        """Total t-derivative of a single jet symbol, fully prolonged."""
        fam, comp, order = key
        cached = self._dt_cache.get(key)
        if cached is not None:
            return cached
        if fam == U:
            # D_t u^i = D_x V^i, prolonged once per jet order
            rule = total_x_n(self._dt_u_rules()[comp], order)
        else:
            raise KernelError(f"unresolvable t-derivative of family {fam!r}")
        self._dt_cache[key] = rule
        return rule

    def xrules(self) -> dict | None:
        return None

    def total_x(self, e: JetExpr) -> JetExpr:
        return total_x(e, self.xrules())

    def total_t(self, e: JetExpr) -> JetExpr:
        """Replace every t-derivative through the (prolonged) equations."""
        space = self.space
        acc: dict[tuple, list] = {}
        for mono, coeff in e.terms.items():
            for s in coeff.free_symbols():
                i = space.coord_index.get(s)
                if i is None:
                    continue
                d = coeff.diff(s)
                if d:
                    for m2, c2 in self._dt_u_rules()[i].terms.items():
                        m = _mono_mul(mono, m2)
                        acc.setdefault(m, []).append(d * c2)
            for idx, (key, p) in enumerate(mono):
                rest = _mono_drop(mono, idx)
                factor = coeff * p if p != 1 else coeff
                rule = self.dt_rule(key)
                for m2, c2 in rule.terms.items():
                    m = _mono_mul(rest, m2)
                    acc.setdefault(m, []).append(factor * c2)
        return _build(space, acc)


class CotangentSystem(EvolutionSystem):
    """The adjoint extension: covector components p_k evolve by the formal
    adjoint of the linearized system; optional nonlocal potentials r_a carry
    the prescribed x- and t-derivatives of the tail flows."""

    P = "p"
    R = "r"

    def __init__(self, base: EvolutionSystem, tail_flows=None):
        super().__init__(base.space, base.fluxes)
        self.base = base
        self._d1 = base._d1
        self._d2 = base._d2
        self._d3 = base._d3
        space = self.space
        n = space.n
        space.add_family(self.P, n)
        self._p_rules: list[JetExpr] | None = None
        self.tail_flows = tail_flows
        self._r_xrules: list[JetExpr] | None = None
        self._r_trules: list[JetExpr] | None = None
        if tail_flows is not None:
            space.add_family(self.R, len(tail_flows))
            self._build_tail_rules()

    def p(self, k: int, order: int = 0) -> JetExpr:
        return self.space.var(self.P, k, order)

    def r(self, a: int) -> JetExpr:
        return self.space.var(self.R, a)

    def _p_t_rules(self) -> list[JetExpr]:
        # p_{k,t} = V^i_{kh} u^h_x p_i + V^i_k p_{i,x}
        if self._p_rules is None:
            space = self.space
            n = space.n
            rules = []
            for k in range(n):
                t = space.zero
                for i in range(n):
                    for h in range(n):
                        c = self.d2(i, k, h)
                        if c:
                            t = t + space.var(U, h, 1) * self.p(i) * c
                    c = self.d1(i, k)
                    if c:
                        t = t + self.p(i, 1) * c
                rules.append(t)
            self._p_rules = rules
        return self._p_rules

    def _build_tail_rules(self):
        # r_{a,x} = w^i_{ak} u^k_x p_i ;  r_{a,t} = V^i_j w^j_{ak} u^k_x p_i
        space = self.space
        n = space.n
        xr, tr = [], []
        for w in self.tail_flows:
            rx = space.zero
            rt = space.zero
            for k in range(n):
                uk = space.var(U, k, 1)
                for i in range(n):
                    if w[i][k]:
                        rx = rx + uk * self.p(i) * w[i][k]
                for i in range(n):
                    c = expr_sum(space.ws, [self.d1(i, j) * w[j][k] for j in range(n)])
                    if c:
                        rt = rt + uk * self.p(i) * c
            xr.append(rx)
            tr.append(rt)
        self._r_xrules = xr
        self._r_trules = tr

    def xrules(self) -> dict | None:
        if self._r_xrules is None:
            return None
        return {self.R: self._r_xrules}

    def dt_rule(self, key: tuple) -> JetExpr:
        fam, comp, order = key
        if fam == U:
            return super().dt_rule(key)
        cached = self._dt_cache.get(key)
        if cached is not None:
            return cached
        if fam == self.P:
            rule = total_x_n(self._p_t_rules()[comp], order, self.xrules())
        elif fam == self.R and self._r_trules is not None:
            if order:
                raise KernelError("potentials appear undifferentiated only")
            rule = self._r_trules[comp]
        else:
            raise KernelError(f"unresolvable t-derivative of family {fam!r}")
        self._dt_cache[key] = rule
        return rule


def linearize(sys: EvolutionSystem, phi) -> list[JetExpr]:
    """Formal linearization along the flow: l(phi)^i = D_t phi^i - V^i_j D_x phi^j."""
    n = sys.space.n
    out = []
    dx = [sys.total_x(phi[j]) for j in range(n)]
    for i in range(n):
        e = sys.total_t(phi[i])
        for j in range(n):
            c = sys.d1(i, j)
            if c and dx[j]:
                e = e - dx[j] * c
        out.append(e)
    return out


def adjoint_linearize(sys: EvolutionSystem, psi) -> list[JetExpr]:
    """Adjoint linearization: l*(psi)_k = -D_t psi_k + D_x(V^i_k psi_i)."""
    n = sys.space.n
    out = []
    for k in range(n):
        s = sys.space.zero
        for i in range(n):
            c = sys.d1(i, k)
            if c and psi[i]:
                s = s + psi[i] * c
        out.append(sys.total_x(s) - sys.total_t(psi[k]))
    return out


# -- Euler operators ---------------------------------------------------------

def euler(h: JetExpr, coord: Symbol | int) -> JetExpr:
    """The bracket -dh/db^k_x + D_x dh/db^k_xx, i.e. the antiderivative of the
    variational derivative in potential coordinates, valid for densities of
    order <= 2 in the b-jets (order <= 1 in the relabelled u-jets)."""
    space = h.space
    k = coord if isinstance(coord, int) else space.coord_index[coord]
    if h.max_order() > 1:
        raise KernelError("bracket form requires order <= 2 in potential jets")
    return total_x(h.jet_partial(U, k, 1)) - h.field_partial(space.coords[k])


def euler_full(h: JetExpr, coord: Symbol | int) -> JetExpr:
    """Full variational derivative with respect to the potential b^k."""
    space = h.space
    k = coord if isinstance(coord, int) else space.coord_index[coord]
    out = space.zero
    sign = -1
    # b^k_{jx} is the relabelled jet of order j-1; b^k itself never occurs
    for j in range(1, h.max_order() + 2):
        part = h.jet_partial(U, k, j - 1)
        if part:
            out = out + total_x_n(part, j) * sign
        sign = -sign
    return out


def variational_derivative(e: JetExpr, coord: Symbol | int) -> JetExpr:
    """Euler operator with respect to the coordinate u^k itself; annihilates
    exactly the total x-derivatives (plus constants)."""
    space = e.space
    k = coord if isinstance(coord, int) else space.coord_index[coord]
    out = space.zero
    sign = 1
    for j in range(0, e.max_order() + 1):
        part = e.jet_partial(U, k, j)
        if part:
            out = out + total_x_n(part, j) * sign
        sign = -sign
    return out
