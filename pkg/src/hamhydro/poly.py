"""Sparse multivariate polynomials over the integers.

A polynomial is a plain dict mapping packed monomial keys to nonzero int
coefficients; {} is the zero polynomial.  Monomial exponent vectors are
packed into a single int by :class:`MonomialTable` so that

* multiplication of monomials is integer addition of keys,
* comparison of keys is the graded lexicographic order over the declared
  variable order (total degree first, then variable 0 most significant).

All arithmetic is exact.  The gcd is computed by the evaluation/interpolation
heuristic with trial-division verification, falling back to a primitive
pseudo-remainder sequence; both paths are exact, so a returned gcd is always
correct.
"""

from __future__ import annotations

from math import gcd as igcd


class HeuristicFailed(Exception):
    """Internal: heuristic gcd gave up; caller falls back to PRS."""


class MonomialTable:
    """Packs exponent vectors of a fixed variable count into single ints.

    Field layout, most significant first: [total degree][e_0][e_1]...[e_{n-1}],
    each field ``bits`` wide with the top bit of every field reserved as a
    guard for borrow detection in :meth:`div`.  Exponents must stay below
    ``2**(bits-1)``; with the default 16 bits that is 32767, far above any
    degree arising here.
    """

    __slots__ = ("nvars", "bits", "mask", "guards", "_shifts", "_deg_shift")

    def __init__(self, nvars: int, bits: int = 16):
        self.nvars = nvars
        self.bits = bits
        self.mask = (1 << bits) - 1
        # variable 0 gets the highest variable field (just below the degree field)
        self._shifts = [(nvars - 1 - i) * bits for i in range(nvars)]
        self._deg_shift = nvars * bits
        guard = 1 << (bits - 1)
        g = 0
        for i in range(nvars + 1):
            g |= guard << (i * bits)
        self.guards = g

    def pack(self, exps) -> int:
        key = 0
        total = 0
        for i, e in enumerate(exps):
            if e:
                key |= e << self._shifts[i]
                total += e
        return key | (total << self._deg_shift)

    def unpack(self, key: int) -> tuple:
        m = self.mask
        return tuple((key >> s) & m for s in self._shifts)

    def var_key(self, i: int, e: int = 1) -> int:
        """Key of the monomial x_i**e (degree field included)."""
        return (e << self._shifts[i]) | (e << self._deg_shift)

    def degree(self, key: int) -> int:
        return key >> self._deg_shift

    def var_exp(self, key: int, i: int) -> int:
        return (key >> self._shifts[i]) & self.mask

    def div(self, a: int, b: int) -> int | None:
        """a / b as monomials, or None when b does not divide a."""
        t = (a | self.guards) - b
        if t & self.guards == self.guards:
            return t ^ self.guards
        return None


# -- basic ring operations ---------------------------------------------------

def padd(f: dict, g: dict) -> dict:
    if not f:
        return dict(g)
    h = dict(f)
    for k, c in g.items():
        s = h.get(k, 0) + c
        if s:
            h[k] = s
        elif k in h:
            del h[k]
    return h


def psub(f: dict, g: dict) -> dict:
    h = dict(f)
    for k, c in g.items():
        s = h.get(k, 0) - c
        if s:
            h[k] = s
        elif k in h:
            del h[k]
    return h


def pneg(f: dict) -> dict:
    return {k: -c for k, c in f.items()}


def pscale(f: dict, c: int) -> dict:
    if c == 0:
        return {}
    if c == 1:
        return dict(f)
    return {k: c * v for k, v in f.items()}


def pmul(f: dict, g: dict) -> dict:
    if not f or not g:
        return {}
    if len(f) > len(g):
        f, g = g, f
    if len(f) == 1:
        (k0, c0), = f.items()
        return {k0 + k: c0 * c for k, c in g.items()}
    h: dict = {}
    get = h.get
    for kf, cf in f.items():
        for kg, cg in g.items():
            k = kf + kg
            s = get(k, 0) + cf * cg
            if s:
                h[k] = s
            elif k in h:
                del h[k]
    return h


def pmul_term(f: dict, key: int, coeff: int) -> dict:
    if not f or coeff == 0:
        return {}
    return {k + key: c * coeff for k, c in f.items()}


def ppow(f: dict, n: int) -> dict:
    if n == 0:
        return {0: 1}
    result = f
    for _ in range(n - 1):
        result = pmul(result, f)
    return result


def plc(f: dict) -> tuple[int, int]:
    """(leading monomial key, leading coefficient) under graded lex."""
    k = max(f)
    return k, f[k]


def pcontent(f: dict) -> int:
    c = 0
    for v in f.values():
        c = igcd(c, v)
        if c == 1:
            return 1
    return c


def pprimitive(f: dict) -> tuple[int, dict]:
    """(content, primitive part); content >= 0, pp keeps the sign of f."""
    if not f:
        return 0, {}
    c = pcontent(f)
    if c == 1:
        return 1, f
    return c, {k: v // c for k, v in f.items()}


def pdiv_exact(f: dict, g: dict, T: MonomialTable) -> dict | None:
    """Exact quotient f/g over the integers, or None if g does not divide f."""
    if not g:
        raise ZeroDivisionError("polynomial division by zero")
    if not f:
        return {}
    if len(g) == 1:
        (kg, cg), = g.items()
        q = {}
        div = T.div
        for k, c in f.items():
            kq = div(k, kg)
            if kq is None or c % cg:
                return None
            q[kq] = c // cg
        return q
    kg, cg = plc(g)
    rest = [(k, c) for k, c in g.items() if k != kg]
    r = dict(f)
    q: dict = {}
    div = T.div
    while r:
        kr = max(r)
        kq = div(kr, kg)
        if kq is None:
            return None
        cr = r[kr]
        if cr % cg:
            return None
        cq = cr // cg
        q[kq] = cq
        del r[kr]
        for k, c in rest:
            kk = k + kq
            s = r.get(kk, 0) - c * cq
            if s:
                r[kk] = s
            elif kk in r:
                del r[kk]
    return q


def pdiff(f: dict, i: int, T: MonomialTable) -> dict:
    shift = T._shifts[i]
    mask = T.mask
    dkey = T.var_key(i, 1)
    h = {}
    for k, c in f.items():
        e = (k >> shift) & mask
        if e:
            h[k - dkey] = c * e
    return h


def peval(f: dict, vals, T: MonomialTable):
    """Evaluate at a point; vals[i] may be Fraction or int."""
    total = 0
    for k, c in f.items():
        term = c
        for i, e in enumerate(T.unpack(k)):
            if e:
                term = term * vals[i] ** e
        total = total + term
    return total


def peval_var(f: dict, i: int, value: int, T: MonomialTable) -> dict:
    """Substitute an integer for variable i, keeping the other variables."""
    shift = T._shifts[i]
    mask = T.mask
    powers = {0: 1}
    h: dict = {}
    for k, c in f.items():
        e = (k >> shift) & mask
        p = powers.get(e)
        if p is None:
            p = value ** e
            powers[e] = p
        kk = k - T.var_key(i, e)
        s = h.get(kk, 0) + c * p
        if s:
            h[kk] = s
        elif kk in h:
            del h[kk]
    return h


def pvars(f: dict, T: MonomialTable) -> list[int]:
    """Sorted indices of variables that actually occur in f."""
    seen = 0
    for k in f:
        seen |= k
    out = []
    mask = T.mask
    for i, s in enumerate(T._shifts):
        if (seen >> s) & mask:
            out.append(i)
    return out


def pdegree_var(f: dict, i: int, T: MonomialTable) -> int:
    shift = T._shifts[i]
    mask = T.mask
    d = 0
    for k in f:
        e = (k >> shift) & mask
        if e > d:
            d = e
    return d


def pmax_norm(f: dict) -> int:
    return max(abs(c) for c in f.values()) if f else 0


# -- gcd ---------------------------------------------------------------------

def pgcd(f: dict, g: dict, T: MonomialTable) -> dict:
    """gcd in Z[x]; the result has positive leading coefficient."""
    if not f:
        return _pos_lc(g)
    if not g:
        return _pos_lc(f)
    if len(f) == 1 or len(g) == 1:
        return _monomial_gcd(f, g, T)
    cf, fp = pprimitive(f)
    cg, gp = pprimitive(g)
    c = igcd(cf, cg)
    if fp == gp or fp == pneg(gp):
        h = _pos_lc(fp)
    else:
        vars_ = sorted(set(pvars(fp, T)) | set(pvars(gp, T)))
        if not vars_:
            h = {0: 1}
        else:
            try:
                h = _heugcd(fp, gp, T, vars_)
            except HeuristicFailed:
                h = _prs_gcd(fp, gp, T, vars_)
        h = _pos_lc(h)
    return pscale(h, c) if c != 1 else h


def _pos_lc(f: dict) -> dict:
    if f and plc(f)[1] < 0:
        return pneg(f)
    return dict(f)


def _monomial_gcd(f: dict, g: dict, T: MonomialTable) -> dict:
    # gcd when at least one argument is a single term: common coefficient gcd
    # times the componentwise-minimum monomial.
    c = igcd(pcontent(f), pcontent(g))
    exps = None
    for poly in (f, g):
        lo = None
        for k in poly:
            e = T.unpack(k)
            lo = e if lo is None else tuple(map(min, lo, e))
        exps = lo if exps is None else tuple(map(min, exps, lo))
    return {T.pack(exps): c}


def _balanced(c: int, xi: int) -> int:
    r = c % xi
    if 2 * r > xi:
        r -= xi
    return r


def _heugcd(f: dict, g: dict, T: MonomialTable, vars_: list[int]) -> dict:
    """Heuristic gcd of primitive f, g; every candidate is verified by exact
    division, so a successful return is always correct."""
    v = vars_[-1]
    xi = 2 * min(pmax_norm(f), pmax_norm(g)) + 29
    for _ in range(6):
        ff = peval_var(f, v, xi, T)
        gg = peval_var(g, v, xi, T)
        if ff and gg:
            cf, fp = pprimitive(ff)
            cg, gp = pprimitive(gg)
            sub = sorted(set(pvars(fp, T)) | set(pvars(gp, T)))
            if not sub:
                h_e = {0: igcd(cf * fp.get(0, 0), cg * gp.get(0, 0))}
            else:
                try:
                    inner = _heugcd(fp, gp, T, sub)
                except HeuristicFailed:
                    inner = _prs_gcd(fp, gp, T, sub)
                h_e = pscale(inner, igcd(cf, cg))
            h = _interpolate(h_e, v, xi, T)
            h = pprimitive(h)[1]
            h = _pos_lc(h)
            if h and pdiv_exact(f, h, T) is not None and pdiv_exact(g, h, T) is not None:
                return h
        xi = 73794 * xi // 27011 + 47
    raise HeuristicFailed


def _interpolate(h_e: dict, v: int, xi: int, T: MonomialTable) -> dict:
    """Recover polynomial coefficients of v from their xi-adic mix."""
    h: dict = {}
    i = 0
    while h_e:
        digit = {}
        nxt = {}
        for k, c in h_e.items():
            r = _balanced(c, xi)
            if r:
                digit[k] = r
            c = (c - r) // xi
            if c:
                nxt[k] = c
        if digit:
            if i:
                vk = T.var_key(v, i)
                for k, c in digit.items():
                    h[k + vk] = c
            else:
                h.update(digit)
        h_e = nxt
        i += 1
    return h


# -- primitive PRS fallback ---------------------------------------------------

def _to_univ(f: dict, v: int, T: MonomialTable) -> dict:
    """View f as univariate in v: dict deg_v -> coefficient polynomial."""
    shift = T._shifts[v]
    mask = T.mask
    out: dict = {}
    for k, c in f.items():
        e = (k >> shift) & mask
        out.setdefault(e, {})[k - T.var_key(v, e)] = c
    return out


def _from_univ(F: dict, v: int, T: MonomialTable) -> dict:
    out: dict = {}
    for e, poly in F.items():
        vk = T.var_key(v, e)
        for k, c in poly.items():
            out[k + vk] = c
    return out


def _univ_content(F: dict, T: MonomialTable) -> dict:
    c: dict = {}
    for poly in F.values():
        c = pgcd(c, poly, T)
        if c == {0: 1}:
            break
    return c


def _univ_div_content(F: dict, c: dict, T: MonomialTable) -> dict:
    if c == {0: 1}:
        return F
    return {e: pdiv_exact(poly, c, T) for e, poly in F.items()}


def _univ_prem(F: dict, G: dict, T: MonomialTable) -> dict:
    """Pseudo-remainder of F by G, both univariate-in-v with poly coefficients."""
    df = max(F)
    dg = max(G)
    lg = G[dg]
    R = {e: dict(p) for e, p in F.items()}
    n = df - dg + 1
    while R and max(R) >= dg:
        dr = max(R)
        lr = R[dr]
        # R = lg*R - lr * v^(dr-dg) * G
        newR: dict = {}
        for e, p in R.items():
            if e != dr:
                newR[e] = pmul(p, lg)
        for e, p in G.items():
            if e != dg:
                ee = e + dr - dg
                t = pmul(lr, p)
                newR[ee] = psub(newR.get(ee, {}), t)
        R = {e: p for e, p in newR.items() if p}
        n -= 1
    # match the standard prem normalization lg^(df-dg+1) * F mod G
    if n > 0 and R:
        scale = ppow(lg, n)
        R = {e: pmul(p, scale) for e, p in R.items()}
    return R


def _prs_gcd(f: dict, g: dict, T: MonomialTable, vars_: list[int]) -> dict:
    """Primitive pseudo-remainder sequence gcd; correct, used as fallback."""
    v = vars_[-1]
    F = _to_univ(f, v, T)
    G = _to_univ(g, v, T)
    if max(F) < max(G):
        F, G = G, F
    contF = _univ_content(F, T)
    contG = _univ_content(G, T)
    cont = pgcd(contF, contG, T)
    F = _univ_div_content(F, contF, T)
    G = _univ_div_content(G, contG, T)
    while True:
        R = _univ_prem(F, G, T)
        if not R:
            break
        if max(R) == 0:
            G = {0: {0: 1}}
            break
        R = _univ_div_content(R, _univ_content(R, T), T)
        F, G = G, R
    h = _from_univ(G, v, T)
    h = pprimitive(h)[1]
    return pmul(h, cont) if cont != {0: 1} else h
