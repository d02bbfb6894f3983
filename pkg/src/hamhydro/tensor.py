"""Metric and connection algebra for homogeneous operators.

Everything is an exact Expr matrix or array.  A metric carries the chart its
entries are written in; a chart knows how to take partial derivatives with
respect to its own coordinates.  The parameterized chart realizes the paper's
device of writing one coordinate system through another (rational) one, with
derivatives taken through the inverse Jacobian.
"""

from __future__ import annotations

from fractions import Fraction

from math import isqrt

from .kernel import Expr, KernelError, Workspace, expr_sum
from .poly import pdiff, pdiv_exact, pgcd, plc, pmul, pprimitive, pscale


class SingularMatrixError(KernelError):
    pass


# -- Expr matrices -----------------------------------------------------------

def mat_mul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    ws = _ws_of(A)
    return [[expr_sum(ws, [A[i][k] * B[k][j] for k in range(m)])
             for j in range(p)] for i in range(n)]


def mat_identity(ws: Workspace, n: int):
    return [[ws.one if i == j else ws.zero for j in range(n)] for i in range(n)]


def _ws_of(A) -> Workspace:
    return A[0][0].ws


def mat_inv(A):
    """Exact inverse by Gauss-Jordan elimination with deterministic pivoting."""
    n = len(A)
    ws = _ws_of(A)
    M = [list(row) + [ws.one if i == j else ws.zero for j in range(n)]
         for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col]:
                piv = r
                break
        if piv is None:
            raise SingularMatrixError("matrix is singular")
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
        inv = ws.one / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [vr - f * vc for vr, vc in zip(M[r], M[col])]
    return [row[n:] for row in M]


def mat_det(A) -> Expr:
    n = len(A)
    ws = _ws_of(A)
    M = [list(row) for row in A]
    det = ws.one
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col]:
                piv = r
                break
        if piv is None:
            return ws.zero
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det = det * M[col][col]
        inv = ws.one / M[col][col]
        for r in range(col + 1, n):
            if M[r][col]:
                f = M[r][col] * inv
                M[r] = [vr - f * vc for vr, vc in zip(M[r], M[col])]
    return det


# -- charts ------------------------------------------------------------------

class Chart:
    """Derivative policy: how to differentiate entries by chart coordinates."""

    label: str
    n: int

    def partial(self, f: Expr, l: int) -> Expr:
        raise NotImplementedError


class CoordinateChart(Chart):
    """Entries are functions of the workspace coordinates themselves."""

    def __init__(self, ws: Workspace, coords, label: str):
        self.ws = ws
        self.coords = [ws.sym(c) if isinstance(c, str) else c for c in coords]
        self.n = len(self.coords)
        self.label = label

    def partial(self, f: Expr, l: int) -> Expr:
        return f.diff(self.coords[l])


class ParameterizedChart(Chart):
    """Chart coordinates expressed rationally through parameters: derivatives
    go through the inverse Jacobian, du^s/dq^l."""

    def __init__(self, chart_map: "ChartMap", label: str):
        self.map = chart_map
        self.n = chart_map.n
        self.label = label
        self.ws = chart_map.uws

    def partial(self, f: Expr, l: int) -> Expr:
        jinv = self.map.inverse_jacobian()
        terms = []
        for s in range(self.n):
            d = f.diff(self.map.u_coords[s])
            if d:
                terms.append(jinv[s][l] * d)
        return expr_sum(self.ws, terms)


class ChartMap:
    """Rational coordinate change q = q(u) with Jacobian transport.

    The inverse direction is never solved for explicitly (it would need
    radicals); u serves as the global parameter chart.
    """

    def __init__(self, uws: Workspace, u_coords, qws: Workspace, q_coords, forward):
        self.uws = uws
        self.qws = qws
        self.u_coords = [uws.sym(c) if isinstance(c, str) else c for c in u_coords]
        self.q_coords = [qws.sym(c) if isinstance(c, str) else c for c in q_coords]
        self.forward = list(forward)
        self.n = len(self.forward)
        if len(self.u_coords) != self.n or len(self.q_coords) != self.n:
            raise KernelError("chart map must be square")
        self._jac: list | None = None
        self._jinv: list | None = None
        self._mono_cache: dict[int, Expr] = {}

    def jacobian(self):
        if self._jac is None:
            self._jac = [[self.forward[i].diff(self.u_coords[j])
                          for j in range(self.n)] for i in range(self.n)]
        return self._jac

    def inverse_jacobian(self):
        if self._jinv is None:
            try:
                self._jinv = mat_inv(self.jacobian())
            except SingularMatrixError:
                raise SingularMatrixError("chart map has singular Jacobian") from None
        return self._jinv

    def det_jacobian(self) -> Expr:
        return mat_det(self.jacobian())

    def _mono_image(self, key: int) -> Expr:
        img = self._mono_cache.get(key)
        if img is not None:
            return img
        if key == 0:
            img = self.uws.one
        else:
            T = self.qws.table
            # peel one variable to reuse previously cached products
            for i in range(T.nvars):
                e = T.var_exp(key, i)
                if e:
                    img = self._mono_image(key - T.var_key(i, 1)) * self._image_of(i)
                    break
        self._mono_cache[key] = img
        return img

    def _image_of(self, i: int) -> Expr:
        sym = self.qws.symbols[i]
        for pos, qs in enumerate(self.q_coords):
            if qs is sym:
                return self.forward[pos]
        # parameters (the spectral symbol, constants) cross charts by name
        return self.uws.var(sym.name)

    def compose_poly(self, poly: dict) -> Expr:
        terms = [self._mono_image(k) * c for k, c in poly.items()]
        return expr_sum(self.uws, terms)

    def compose(self, e: Expr) -> Expr:
        """Pull a q-chart expression back to the parameter chart."""
        if e.ws is not self.qws:
            raise KernelError("expression is not in the source chart workspace")
        num = self.compose_poly(e.num)
        den = self.compose_poly(e.den)
        if den.is_zero:
            raise KernelError("chart composition hits a pole")
        return num / den


# -- metric, c-tensor, tails ---------------------------------------------------

class Metric:
    """Symmetric nondegenerate Expr matrix tagged with its chart."""

    def __init__(self, entries, chart: Chart, variance: str = "lower"):
        self.entries = [list(r) for r in entries]
        self.n = len(self.entries)
        self.chart = chart
        self.variance = variance
        self._inv: list | None = None
        self._det: Expr | None = None

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    @property
    def ws(self) -> Workspace:
        return _ws_of(self.entries)

    def det(self) -> Expr:
        if self._det is None:
            self._det = mat_det(self.entries)
        return self._det

    def inverse_entries(self):
        if self._inv is None:
            try:
                self._inv = mat_inv(self.entries)
            except SingularMatrixError:
                raise SingularMatrixError("metric is singular") from None
        return self._inv

    def is_symmetric(self) -> bool:
        return all(self.entries[i][j] == self.entries[j][i]
                   for i in range(self.n) for j in range(i))


def invert(M: Metric) -> Metric:
    """Contravariant metric; the product with M is the identity."""
    return Metric(M.inverse_entries(), M.chart,
                  "upper" if M.variance == "lower" else "lower")


class CTensor:
    """Connection coefficients of a third-order candidate, lowered and raised."""

    def __init__(self, lowered, metric: Metric):
        self.lowered = lowered            # c_{nkm} as nested lists
        self.metric = metric
        self.n = len(lowered)
        self._raised1: list | None = None  # c^s_{ml} = g^{sp} c_{pml}
        self._raised2: list | None = None  # c^{ij}_l = g^{jn} g^{im} c_{nml}

    def raised1(self):
        if self._raised1 is None:
            n = self.n
            ws = self.metric.ws
            ginv = self.metric.inverse_entries()
            self._raised1 = [[[expr_sum(ws, [ginv[s][p] * self.lowered[p][m][l]
                                             for p in range(n)])
                               for l in range(n)] for m in range(n)]
                             for s in range(n)]
        return self._raised1

    def raised2(self):
        # c^{pq}_k = g^{qi} g^{pj} c_{ijk}: raise the first lowered slot with
        # the second upper index, then the second lowered slot with the first.
        if self._raised2 is None:
            n = self.n
            ws = self.metric.ws
            ginv = self.metric.inverse_entries()
            half = [[[expr_sum(ws, [ginv[q][i] * self.lowered[i][j][k] for i in range(n)])
                      for k in range(n)] for j in range(n)] for q in range(n)]
            self._raised2 = [[[expr_sum(ws, [ginv[p][j] * half[q][j][k] for j in range(n)])
                               for k in range(n)] for q in range(n)] for p in range(n)]
        return self._raised2


def c_from_metric(M: Metric) -> CTensor:
    """Lowered c_{nkm} = (g_{mn,k} - g_{kn,m})/3; derivatives in M's chart."""
    n = M.n
    third = Fraction(1, 3)
    D = M.chart.partial
    dg = [[[D(M.entries[i][j], k) for k in range(n)] for j in range(n)] for i in range(n)]
    lowered = [[[(dg[m][nn][k] - dg[k][nn][m]) * third
                 for m in range(n)] for k in range(n)] for nn in range(n)]
    return CTensor(lowered, M)


class NonlocalTail:
    """Tail data of a non-local third-order candidate: flow matrices w^i_{aj}
    and the symmetric constant matrix weighting their pairings."""

    def __init__(self, flows, constants):
        self.flows = [list(map(list, w)) for w in flows]
        self.m = len(self.flows)
        self.n = len(self.flows[0]) if self.flows else 0
        self.constants = [[Fraction(c) for c in row] for row in constants]
        if len(self.constants) != self.m or any(len(r) != self.m for r in self.constants):
            raise KernelError("constant matrix must be m x m over the flows")
        for a in range(self.m):
            for b in range(self.m):
                if self.constants[a][b] != self.constants[b][a]:
                    raise KernelError("constant matrix must be symmetric")
        self._lowered_cache: dict[int, list] = {}

    @classmethod
    def from_three_constants(cls, flows, c1, c2, c3):
        """Two flows with pair weights (c1, c2, c3) = (w1w1, cross, w2w2)."""
        if len(flows) != 2:
            raise KernelError("three-constant form expects exactly two flows")
        return cls(flows, [[c1, c2], [c2, c3]])

    def lowered(self, M: Metric):
        """w_{a ij} = g_{is} w^s_{aj}."""
        key = id(M)
        got = self._lowered_cache.get(key)
        if got is None:
            ws = M.ws
            n = self.n
            got = [[[expr_sum(ws, [M.entries[i][s] * w[s][j] for s in range(n)])
                     for j in range(n)] for i in range(n)] for w in self.flows]
            self._lowered_cache[key] = got
        return got


def transform_flow(w, chart_map: ChartMap):
    """Flow matrix change of chart: (dq/du) w (du/dq), entries staying in the
    parameter chart."""
    J = chart_map.jacobian()
    Jinv = chart_map.inverse_jacobian()
    return mat_mul(mat_mul(J, w), Jinv)


def mat_transpose(A):
    return [list(col) for col in zip(*A)]


def push_metric(M_q: Metric, chart_map: ChartMap, chart: Chart) -> Metric:
    """(0,2)-transport of a metric from the q-chart to the parameter chart:
    g~_{ij} = (dq^a/du^i) g_{ab}(q(u)) (dq^b/du^j)."""
    n = M_q.n
    g_u = [[chart_map.compose(M_q.entries[a][b]) for b in range(n)] for a in range(n)]
    J = chart_map.jacobian()
    out = mat_mul(mat_transpose(J), mat_mul(g_u, J))
    return Metric(out, chart, M_q.variance)


# -- exact square root (for the Delta factor) ----------------------------------

def _poly_sqrt(f: dict, ws: Workspace) -> dict | None:
    """Exact square root of an integer polynomial, positive leading
    coefficient; None when f is not a perfect square."""
    if not f:
        return {}
    cont, fp = pprimitive(f)
    lk, lcf = plc(fp)
    if lcf < 0:
        return None
    r = isqrt(cont)
    if r * r != cont:
        return None
    T = ws.table
    if len(fp) == 1:
        exps = T.unpack(lk)
        if any(e % 2 for e in exps):
            return None
        half = T.pack(tuple(e // 2 for e in exps))
        c = isqrt(lcf)
        if c * c != lcf:
            return None
        return {half: c * r}
    # s = squarefree radical of fp; a perfect square must be divisible by s^2,
    # and sqrt(fp) = s * sqrt(fp / s^2)
    g = fp
    for i in range(T.nvars):
        d = pdiff(fp, i, T)
        if d:
            g = pgcd(g, d, T)
            if g == {0: 1}:
                return None
    s = pdiv_exact(fp, g, T)
    if s is None:
        return None
    rest = pdiv_exact(fp, pmul(s, s), T)
    if rest is None:
        return None
    inner = _poly_sqrt(rest, ws)
    if inner is None:
        return None
    return pscale(pmul(s, inner), r)


def expr_sqrt(e: Expr) -> Expr | None:
    """Square root of e or -e as an Expr (positive leading coefficients), or
    None when neither is a perfect square."""
    for cand in (e, -e):
        if cand.is_zero:
            return cand.ws.zero
        sn = _poly_sqrt(cand.num, cand.ws)
        if sn is None:
            continue
        sd = _poly_sqrt(cand.den, cand.ws)
        if sd is None:
            continue
        return Expr.make(cand.ws, sn, sd)
    return None


def delta(M: Metric) -> Expr | None:
    """The factor with det(g) = +-Delta^2, normalized to positive leading
    coefficient; None when the determinant is not of that form."""
    return expr_sqrt(M.det())
