"""The Oriented Associativity system in hydrodynamic form: canonical dataset.

Everything printed in the source formulas lives in text fixtures under
``fixtures/`` and is parsed, not re-derived; the derivation paths elsewhere in
the package cross-validate the fixtures.  The u chart (eigenvalue coordinates
plus u4, u5, u6) is the global parameter chart: the forward map q(u) is
rational while the inverse would need radicals, so q-chart objects are always
handled as functions of u.
"""

from __future__ import annotations

from fractions import Fraction
from importlib import resources

from .kernel import Expr, KernelError, Workspace, expr_sum, parse
from .jet import EvolutionSystem, JetExpr, JetSpace, U, total_x
from .tensor import (
    ChartMap, CoordinateChart, Metric, NonlocalTail, ParameterizedChart,
    mat_inv, mat_mul, push_metric,
)

Q_NAMES = [f"q{i}" for i in range(1, 7)]
U_NAMES = [f"u{i}" for i in range(1, 7)]
LAM = "lam"


def _fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath("fixtures").joinpath(name).read_text()


def load_indexed(name: str, ws: Workspace) -> dict:
    """Fixture format: one component per line, 'i [j [k]] : expression'."""
    out = {}
    for lineno, line in enumerate(_fixture_text(name).splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, _, body = line.partition(":")
        if not body:
            raise KernelError(f"{name}:{lineno}: missing ':'")
        idx = tuple(int(t) for t in head.split())
        out[idx] = parse(body.strip(), ws)
    return out


def parse_jet1(text: str, space: JetSpace) -> JetExpr:
    """Parse an expression with first-derivative jet names '<coord>_x' into a
    JetExpr of order <= 1; the denominator must be jet-free."""
    ws = space.ws
    ext = ws.extended([f"{c.name}_x" for c in space.coords])
    e = parse(text, ext)
    n0 = len(ws.symbols)
    T = ext.table

    def is_jet_free(poly):
        return all(all(e_ == 0 for e_ in T.unpack(k)[n0:]) for k in poly)

    if not is_jet_free(e.den):
        raise KernelError("jet variables in a denominator are not supported")
    # move the denominator into the coefficients
    out = space.zero
    denom = _project(e.den, ws, ext)
    for k, c in e.num.items():
        exps = T.unpack(k)
        coeff_poly = {ws.table.pack(exps[:n0]): c}
        coeff = Expr.make(ws, coeff_poly, {0: 1}) / denom
        term = space.const(coeff)
        for pos, e_ in enumerate(exps[n0:]):
            if e_:
                term = term * space.var(U, pos, 1) ** e_
        out = out + term
    return out


def _project(poly: dict, ws: Workspace, ext: Workspace) -> Expr:
    n0 = len(ws.symbols)
    T = ext.table
    out = {}
    for k, c in poly.items():
        exps = T.unpack(k)
        out[ws.table.pack(exps[:n0])] = c
    return Expr.make(ws, out, {0: 1})


def load_jet1(name: str, space: JetSpace) -> dict:
    out = {}
    for lineno, line in enumerate(_fixture_text(name).splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, _, body = line.partition(":")
        idx = tuple(int(t) for t in head.split())
        out[idx] = parse_jet1(body.strip(), space)
    return out


def _skew_matrix_from_fixture(name: str, ws: Workspace, n: int = 6):
    """Lower-triangular components (k < j) with skew completion."""
    entries = load_indexed(name, ws)
    M = [[ws.zero for _ in range(n)] for _ in range(n)]
    for (k, j), e in entries.items():
        M[k - 1][j - 1] = e
        M[j - 1][k - 1] = -e
    return M


class OAssocBundle:
    """All verified structures of the six-component system in one place."""

    def __init__(self):
        self.qws = Workspace(Q_NAMES + [LAM])
        self.uws = Workspace(U_NAMES + [LAM])
        self.qspace = JetSpace(self.qws, Q_NAMES)
        self.uspace = JetSpace(self.uws, U_NAMES)
        self.q_chart = CoordinateChart(self.qws, Q_NAMES, "q")
        self.u_chart = CoordinateChart(self.uws, U_NAMES, "u")

        fl = load_indexed("system_q.txt", self.qws)
        self.fluxes_q = [fl[(i,)] for i in range(1, 7)]
        self.system_q = EvolutionSystem(self.qspace, self.fluxes_q)

        fwd = load_indexed("chart_q_of_u.txt", self.uws)
        self.q_of_u = [fwd[(i,)] for i in range(1, 7)]
        self.chart = ChartMap(self.uws, U_NAMES, self.qws, Q_NAMES, self.q_of_u)
        self.qviau_chart = ParameterizedChart(self.chart, "q-via-u")

        m1 = load_indexed("metric_first_order.txt", self.uws)
        self.metric1_upper = [[self.uws.zero for _ in range(6)] for _ in range(6)]
        for (i, j), e in m1.items():
            self.metric1_upper[i - 1][j - 1] = e
            self.metric1_upper[j - 1][i - 1] = e
        self.metric1_lower = mat_inv(self.metric1_upper)

        # Hamiltonian and momentum densities in the u chart
        self.H = self.q_of_u[1]
        self.P = self.q_of_u[0]

        m3 = load_indexed("metric_third_order_q.txt", self.qws)
        g = [[None] * 6 for _ in range(6)]
        for (i, j), e in m3.items():
            g[i - 1][j - 1] = e
            g[j - 1][i - 1] = e
        self.metric3_q = Metric(g, self.q_chart)

        self.wtilde = [_skew_matrix_from_fixture("wtilde1.txt", self.uws),
                       _skew_matrix_from_fixture("wtilde2.txt", self.uws)]
        u = [self.uws.var(n) for n in U_NAMES]
        self.delta = (u[0] - u[1]) * (u[0] - u[2]) * (u[1] - u[2]) * u[4]
        self.constants = (Fraction(2), Fraction(1), Fraction(2))

        # u-chart fluxes: the eigenvalue conservation laws for u1..u3, the
        # pulled-back fluxes for u4, u6, and q6 itself for u5
        q1u, q3u = self.q_of_u[0], self.q_of_u[2]
        u5 = u[4]
        self.fluxes_u = [
            (u[k] * u[k] - q3u * u[k] - q1u) / u5 for k in range(3)
        ] + [
            self.chart.compose(self.fluxes_q[3]),
            self.q_of_u[5],
            self.q_of_u[3] - self.chart.compose(self.fluxes_q[5]),
        ]
        self.system_u = EvolutionSystem(self.uspace, self.fluxes_u)

        self._metric3_qviau: Metric | None = None
        self._metric3_u: Metric | None = None
        self._metric3_q_inverse_u: list | None = None
        self._tails_qviau: NonlocalTail | None = None
        self._tails_u: NonlocalTail | None = None

        self._consistency()

    # -- lazy heavy parts -------------------------------------------------

    def metric3_qviau(self) -> Metric:
        """The q-chart Monge metric with entries written through u."""
        if self._metric3_qviau is None:
            n = 6
            entries = [[self.chart.compose(self.metric3_q.entries[i][j])
                        for j in range(n)] for i in range(n)]
            self._metric3_qviau = Metric(entries, self.qviau_chart)
            # the inverse composes entrywise with the chart
            self._metric3_qviau._inv = self.metric3_q_inverse_u()
        return self._metric3_qviau

    def metric3_u(self) -> Metric:
        """The Monge metric transported to the u chart as a (0,2)-tensor."""
        if self._metric3_u is None:
            self._metric3_u = push_metric(self.metric3_q, self.chart, self.u_chart)
        return self._metric3_u

    def metric3_q_inverse_u(self) -> list:
        """Contravariant q-chart metric, entries composed with q(u)."""
        if self._metric3_q_inverse_u is None:
            inv_q = self.metric3_q.inverse_entries()
            self._metric3_q_inverse_u = [
                [self.chart.compose(inv_q[i][j]) for j in range(6)] for i in range(6)]
        return self._metric3_q_inverse_u

    def tails_qviau(self) -> NonlocalTail:
        """Tail flows in the q chart (entries through u): the fixture matrices
        are the Delta-scaled lowered components, so raise with the q-metric."""
        if self._tails_qviau is None:
            ginv = self.metric3_q_inverse_u()
            flows = []
            for wt in self.wtilde:
                low = [[wt[i][j] / self.delta for j in range(6)] for i in range(6)]
                flows.append(mat_mul(ginv, low))
            c1, c2, c3 = self.constants
            self._tails_qviau = NonlocalTail.from_three_constants(flows, c1, c2, c3)
        return self._tails_qviau

    def tails_u(self) -> NonlocalTail:
        """Tail flows transported to the u chart: w_u = J^{-1} w_q J."""
        if self._tails_u is None:
            J = self.chart.jacobian()
            Jinv = self.chart.inverse_jacobian()
            flows = [mat_mul(Jinv, mat_mul(w, J))
                     for w in self.tails_qviau().flows]
            c1, c2, c3 = self.constants
            self._tails_u = NonlocalTail.from_three_constants(flows, c1, c2, c3)
        return self._tails_u

    def densities(self) -> list[JetExpr]:
        d = load_jet1("densities.txt", self.uspace)
        return [d[(k,)] for k in (1, 2, 3)]

    # -- consistency ------------------------------------------------------

    def _consistency(self):
        checks = []
        checks.append(("six fluxes", len(self.fluxes_q) == 6))
        checks.append(("q1_t = q2_x", self.fluxes_q[0] == self.qws.var("q2")))
        checks.append(("first-order metric entry (4,5)",
                       self.metric1_upper[3][4] == self.uws.const(-1)))
        e1 = expr_sum(self.uws, [self.uws.var(n) for n in U_NAMES[:3]])
        checks.append(("Viete sum", self.q_of_u[2] + self.q_of_u[5] == e1))
        checks.append(("third-order metric symmetric", self.metric3_q.is_symmetric()))
        half = Fraction(1, 2)
        p_quad = expr_sum(self.uws, [
            self.metric1_lower[i][k] * self.uws.var(U_NAMES[i]) * self.uws.var(U_NAMES[k]) * half
            for i in range(6) for k in range(6)])
        checks.append(("momentum is the metric quadratic form", self.P == p_quad))
        for name, ok in checks:
            if not ok:
                raise KernelError(f"bundle consistency failure: {name}")


_cached: OAssocBundle | None = None


def build_bundle(fresh: bool = False) -> OAssocBundle:
    """Construct (or reuse) the verified dataset; raises on any failing
    internal identity."""
    global _cached
    if fresh or _cached is None:
        _cached = OAssocBundle()
    return _cached
