"""Lax pair machinery and the conserved-density expansion.

The wave-function system is reduced to one scalar third-order equation; the
logarithmic-derivative substitution turns it into a first-order nonlinear
equation whose expansion in inverse powers of the spectral symbol generates,
branch by branch, the conserved densities.  The leading order of the expansion
is the characteristic polynomial of the x-part matrix, so the three branches
start from the three eigenvalue coordinates; computations stay in the
rational-function field of the eigenvalue chart, which is exactly the generic
stratum of pairwise distinct branch points.
"""

from __future__ import annotations

from fractions import Fraction

from .kernel import Expr, KernelError, Workspace, expr_sum
from .jet import EvolutionSystem, JetExpr, JetSpace, U, euler, total_x, total_x_n
from .tensor import ChartMap
from .conditions import ResidualReport

PSI = "psi"


class LaxPair:
    """x- and t-matrices of the linear problem, entries rational in the
    coordinates, with the spectral symbol multiplying both."""

    def __init__(self, A, B, space: JetSpace, lam: str = "lam"):
        self.A = [list(r) for r in A]
        self.B = [list(r) for r in B]
        self.space = space
        self.lam = lam
        self.size = len(self.A)

    @classmethod
    def for_system(cls, sys: EvolutionSystem, lam: str = "lam") -> "LaxPair":
        """The canonical 3x3 pair of the six-component system: the x-matrix
        carries the even-slot coordinates, the t-matrix their fluxes."""
        ws = sys.space.ws
        q = [ws.var(f"q{i}") for i in range(1, 7)]
        zero, one = ws.zero, ws.one
        A = [[zero, one, zero], [q[0], q[2], q[4]], [q[1], q[3], q[5]]]
        B = [[zero, zero, one],
             [q[1], q[3], q[5]],
             [sys.fluxes[1], sys.fluxes[3], sys.fluxes[5]]]
        return cls(A, B, sys.space, lam)


def zero_curvature(L: LaxPair, sys: EvolutionSystem) -> ResidualReport:
    """A_t - B_x + lambda [A, B] on the jet space of the system: the
    commutator must vanish identically, the derivative part on solutions."""
    space = L.space
    ws = space.ws
    residuals = {}
    n = L.size
    for i in range(n):
        for j in range(n):
            comm = expr_sum(ws, [L.A[i][k] * L.B[k][j] - L.B[i][k] * L.A[k][j]
                                 for k in range(n)])
            residuals[("commutator", i + 1, j + 1)] = comm
    for i in range(n):
        for j in range(n):
            e = sys.total_t(space.const(L.A[i][j])) - total_x(space.const(L.B[i][j]))
            if e.is_zero:
                residuals[("evolution", i + 1, j + 1, ())] = ws.zero
            for mono in sorted(e.terms):
                residuals[("evolution", i + 1, j + 1, mono)] = e.terms[mono]
    return ResidualReport("zero_curvature", residuals)


def char_poly(L: LaxPair) -> Expr:
    """det(lambda I - A) expanded; the spectral symbol must be a field symbol
    of the workspace."""
    ws = L.space.ws
    lam = ws.var(L.lam)
    n = L.size
    M = [[(lam if i == j else ws.zero) - L.A[i][j] for j in range(n)] for i in range(n)]
    if n != 3:
        raise KernelError("characteristic polynomial implemented for 3x3 pairs")
    def det2(a, b, c, d):
        return a * d - b * c
    return expr_sum(ws, [
        M[0][0] * det2(M[1][1], M[1][2], M[2][1], M[2][2]),
        -(M[0][1] * det2(M[1][0], M[1][2], M[2][0], M[2][2])),
        M[0][2] * det2(M[1][0], M[1][1], M[2][0], M[2][1]),
    ])


def scalar_reduce(L: LaxPair) -> list[JetExpr]:
    """Eliminate the auxiliary wave-function components; returns the four
    coefficients of psi, psi_x, psi_2x, psi_3x, normalized so the leading
    coefficient is the corner coordinate (the generic-stratum denominator)."""
    space = L.space
    ws = space.ws
    lam = ws.var(L.lam)
    q5 = L.A[1][2]
    if q5.is_zero:
        raise KernelError("degenerate elimination: corner entry vanishes")
    space.add_family(PSI, 1)
    psi = [space.var(PSI, 0, k) for k in range(4)]
    # first row: psi_x = lam * psi1
    psi1 = psi[1] * (ws.one / lam)
    # second row solved for psi2
    a10, a11, a12 = L.A[1][0], L.A[1][1], L.A[1][2]
    psi2 = (total_x(psi1) - psi[0] * (lam * a10) - psi1 * (lam * a11)) * (ws.one / (lam * a12))
    # third row becomes the scalar equation
    a20, a21, a22 = L.A[2][0], L.A[2][1], L.A[2][2]
    eq = total_x(psi2) - psi[0] * (lam * a20) - psi1 * (lam * a21) - psi2 * (lam * a22)
    eq = eq * (lam * lam * a12 * a12)
    coeffs = []
    rest = eq
    for k in range(4):
        c = eq.jet_partial(PSI, 0, k)
        coeffs.append(c)
        rest = rest - c * psi[k]
    if not rest.is_zero:
        raise KernelError("scalar reduction is not linear in the wave function")
    return coeffs


# -- spectral expansion --------------------------------------------------------

def _lam_split_expr(e: Expr, lam_index: int) -> dict[int, Expr]:
    """Split an Expr polynomial in the spectral symbol into power slices; the
    denominator must be free of the symbol."""
    ws = e.ws
    T = ws.table
    shift = T._shifts[lam_index]
    mask = T.mask
    for k in e.den:
        if (k >> shift) & mask:
            raise KernelError("spectral symbol in a denominator")
    slices: dict[int, dict] = {}
    for k, c in e.num.items():
        p = (k >> shift) & mask
        slices.setdefault(p, {})[k - T.var_key(lam_index, p)] = c
    return {p: Expr.make(ws, poly, dict(e.den)) for p, poly in slices.items()}


def _lam_split_jet(e: JetExpr, lam_index: int) -> dict[int, JetExpr]:
    out: dict[int, dict] = {}
    for mono, c in e.terms.items():
        for p, part in _lam_split_expr(c, lam_index).items():
            out.setdefault(p, {})[mono] = part
    return {p: JetExpr(e.space, terms) for p, terms in out.items()}


def _ladd(a: dict, b: dict) -> dict:
    out = dict(a)
    for p, e in b.items():
        if p in out:
            s = out[p] + e
            if s.is_zero:
                del out[p]
            else:
                out[p] = s
        else:
            out[p] = e
    return out


def _lmul(a: dict, b: dict, cutoff: int | None = None) -> dict:
    out: dict[int, JetExpr] = {}
    for pa, ea in a.items():
        for pb, eb in b.items():
            p = pa + pb
            if cutoff is not None and p < cutoff:
                continue
            prod = ea * eb
            if prod.is_zero:
                continue
            if p in out:
                s = out[p] + prod
                if s.is_zero:
                    del out[p]
                else:
                    out[p] = s
            else:
                out[p] = prod
    return out


def _lx(a: dict) -> dict:
    out = {}
    for p, e in a.items():
        d = total_x(e)
        if not d.is_zero:
            out[p] = d
    return out


def chart_jet(e: JetExpr, chart_map: ChartMap, target: JetSpace) -> JetExpr:
    """Move a jet expression of the root chart onto the parameter chart: the
    coefficients compose with the forward map and each jet factor prolongs by
    total derivatives of the composed coordinate."""
    images: dict[tuple, JetExpr] = {}

    def image(key):
        got = images.get(key)
        if got is None:
            fam, comp, order = key
            if fam != U:
                raise KernelError("only coordinate jets can change chart")
            got = total_x_n(target.const(chart_map.forward[comp]), order)
            images[key] = got
        return got

    out = target.zero
    for mono, c in e.terms.items():
        t = target.const(chart_map.compose(c))
        for key, p in mono:
            t = t * image(key) ** p
        out = out + t
    return out


class GeneratingSeries:
    """One branch of the density expansion: coefficients h_{-1} = u^branch,
    h_0, h_1, ... as jet expressions of the parameter chart."""

    def __init__(self, branch: int, coefficients: list[JetExpr]):
        self.branch = branch
        self.coefficients = coefficients

    def density(self, i: int) -> JetExpr:
        return self.coefficients[i + 1]


def riccati_expand(L: LaxPair, chart_map: ChartMap, uspace: JetSpace,
                   branch: int, depth: int) -> GeneratingSeries:
    """Expand the logarithmic derivative of the wave function at large
    spectral parameter along one branch.

    The scalar equation, after the exponential substitution, becomes a
    polynomial identity in r, r_x, r_2x; feeding the series with leading term
    lambda u^branch and collecting like powers solves one coefficient per
    order.  Each solved order is re-verified to annihilate its slice."""
    if branch not in (1, 2, 3):
        raise KernelError("branch out of range")
    if depth < 0:
        raise KernelError("depth must be nonnegative")
    uws = uspace.ws
    coeffs_q = scalar_reduce(L)
    lam_u = uws.sym(L.lam).index
    c = []
    for cq in coeffs_q:
        cu = chart_jet(cq, chart_map, uspace)
        c.append(_lam_split_jet(cu, lam_u))

    uk = uspace.var(U, branch - 1, 0)
    others = [j for j in range(3) if j != branch - 1]
    # derivative of the characteristic polynomial at its own root, times the
    # corner coordinate: nonzero on the generic stratum of distinct roots
    diff0 = uws.var(f"u{branch}") - uws.var(f"u{others[0] + 1}")
    diff1 = uws.var(f"u{branch}") - uws.var(f"u{others[1] + 1}")
    q5_u = chart_map.compose(L.A[1][2])
    pivot = q5_u * diff0 * diff1

    r = {1: uk}
    hs = [uk]
    # only slices down to 2 - depth ever matter; cap the convolutions there
    cut = 2 - depth - 1

    def residual():
        r2 = _lmul(r, r, cut)
        rx = _lx(r)
        r3 = _lmul(r2, r, cut)
        rxx = _lx(rx)
        rrx = _lmul(r, rx, cut)
        e = _lmul(c[3], _ladd(_ladd(r3, {p: v * 3 for p, v in rrx.items()}), rxx), cut)
        e = _ladd(e, _lmul(c[2], _ladd(r2, rx), cut))
        e = _ladd(e, _lmul(c[1], r, cut))
        e = _ladd(e, c[0])
        return e

    E = residual()
    if 3 in E and not E[3].is_zero:
        raise KernelError("leading order does not annihilate the branch point")
    for m in range(depth + 1):
        R = E.get(2 - m, uspace.zero)
        h = R * (-(uws.one) / pivot)
        hs.append(h)
        r = _ladd(r, {-m: h})
        E = residual()
        if not E.get(2 - m, uspace.zero).is_zero:
            raise KernelError(f"expansion order {m} failed to close")
    return GeneratingSeries(branch, hs)


def leading_densities(L: LaxPair, chart_map: ChartMap, uspace: JetSpace,
                      depth: int = 0, normalize: bool = True) -> list[GeneratingSeries]:
    """All three expansion branches.

    The raw leading coefficients reproduce the printed closed forms exactly,
    but their branch sum is a trivial density (a total x-derivative of a
    logarithm), not the zero jet expression.  With ``normalize`` the leading
    densities are shifted to the trace-free gauge, where the branch sum
    vanishes identically while each density moves only by a total derivative."""
    series = [riccati_expand(L, chart_map, uspace, k, depth) for k in (1, 2, 3)]
    if normalize:
        third = Fraction(1, 3)
        trace = (series[0].density(0) + series[1].density(0)
                 + series[2].density(0)) * third
        for s in series:
            s.coefficients[1] = s.coefficients[1] - trace
    return series


def flows_from_density(h: JetExpr, g_upper) -> list[list[Expr]]:
    """Commuting-flow matrix from a density of hydrodynamic second order: the
    potential-coordinate bracket contracted with a constant contravariant
    metric; the result must be linear in the first-derivative jets."""
    space = h.space
    ws = space.ws
    n = space.n
    brackets = [euler(h, k) for k in range(n)]
    E = [[ws.zero] * n for _ in range(n)]
    for k in range(n):
        b = brackets[k]
        for mono, coeff in b.terms.items():
            if len(mono) != 1 or mono[0][1] != 1 or mono[0][0][2] != 1 or mono[0][0][0] != U:
                raise KernelError("flow is not of hydrodynamic second-order form")
            E[k][mono[0][0][1]] = coeff
    return [[expr_sum(ws, [g_upper[i][k] * E[k][j] for k in range(n)])
             for j in range(n)] for i in range(n)]


def conserved_density_residual(sys: EvolutionSystem, rho: JetExpr) -> list[JetExpr]:
    """Euler-operator image of the time derivative: zero for every component
    exactly when the time derivative is a total x-derivative on solutions."""
    from .jet import variational_derivative
    dt = sys.total_t(rho)
    return [variational_derivative(dt, k) for k in range(sys.space.n)]


def jet_scale_first_order(e: JetExpr, factor) -> JetExpr:
    """Scaling substitution u_{kx} -> factor^k u_{kx}, realizing the grading
    that weighs each x-derivative once."""
    space = e.space
    ws = space.ws
    out = {}
    for mono, c in e.terms.items():
        weight = sum(key[2] * p for key, p in mono)
        scaled = c * (ws.const(factor) ** weight)
        if scaled:
            out[mono] = scaled
    return JetExpr(space, out)
