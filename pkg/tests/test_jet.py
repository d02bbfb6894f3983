"""Jet-layer tests on small generic systems; the canonical dataset has its own
test modules."""

import random

import pytest

from hamhydro.kernel import KernelError, Workspace
from hamhydro.jet import (
    CotangentSystem, EvolutionSystem, JetSpace, U, adjoint_linearize, euler,
    euler_full, linearize, total_x, total_x_n, variational_derivative,
)


def small_system(nc=2, seed=0, rational=False):
    rng = random.Random(seed)
    ws = Workspace([f"u{i}" for i in range(1, nc + 1)])
    space = JetSpace(ws, [f"u{i}" for i in range(1, nc + 1)])
    fluxes = []
    for _ in range(nc):
        f = ws.const(rng.randint(-3, 3))
        for s in ws.symbols:
            f = f + rng.randint(-3, 3) * ws.var(s.name)
            f = f + rng.randint(-2, 2) * ws.var(s.name) * ws.var(rng.choice(ws.symbols).name)
        if rational:
            f = f / (ws.var("u1") + 2)
        fluxes.append(f)
    return EvolutionSystem(space, fluxes)


def rand_jetexpr(space, rng, max_order=2):
    e = space.zero
    for _ in range(rng.randint(1, 4)):
        t = space.const(rng.randint(-4, 4))
        t = t * space.ws.var(rng.choice(space.ws.symbols).name)
        for _ in range(rng.randint(0, 2)):
            t = t * space.var(U, rng.randrange(space.n), rng.randint(1, max_order))
        e = e + t
    return e


class TestTotalX:
    def test_constant(self):
        sys = small_system()
        assert total_x(sys.space.const(5)).is_zero

    def test_coordinate(self):
        sys = small_system()
        space = sys.space
        assert total_x(space.var(U, 0)) == space.var(U, 0, 1)

    def test_leibniz(self):
        sys = small_system(3, seed=5)
        rng = random.Random(9)
        for _ in range(8):
            a, b = rand_jetexpr(sys.space, rng), rand_jetexpr(sys.space, rng)
            assert total_x(a * b) == total_x(a) * b + a * total_x(b)


class TestTotalT:
    def test_definitional_identity(self):
        # D_t u^i - D_x V^i vanishes by construction
        sys = small_system(3, seed=1, rational=True)
        space = sys.space
        for i in range(space.n):
            lhs = sys.total_t(space.var(U, i))
            rhs = total_x(space.const(sys.fluxes[i]))
            assert (lhs - rhs).is_zero

    @pytest.mark.parametrize("seed", [2, 3])
    def test_commutator_with_total_x(self, seed):
        sys = small_system(2, seed=seed, rational=(seed % 2 == 0))
        rng = random.Random(seed + 100)
        for _ in range(6):
            e = rand_jetexpr(sys.space, rng)
            lhs = sys.total_t(total_x(e))
            rhs = total_x(sys.total_t(e))
            assert (lhs - rhs).is_zero

    def test_commutator_on_cotangent_covering(self):
        sys = small_system(2, seed=11)
        cot = CotangentSystem(sys)
        rng = random.Random(12)
        for _ in range(4):
            e = rand_jetexpr(sys.space, rng)
            e = e * cot.p(rng.randrange(2), rng.randint(0, 1))
            lhs = cot.total_t(cot.total_x(e))
            rhs = cot.total_x(cot.total_t(e))
            assert (lhs - rhs).is_zero

    def test_unresolvable_without_covering(self):
        sys = small_system(2, seed=4)
        cot = CotangentSystem(sys)
        with pytest.raises(KernelError):
            sys.total_t(cot.p(0))


class TestEuler:
    def test_constant(self):
        sys = small_system()
        assert euler(sys.space.const(3), 0).is_zero
        assert euler_full(sys.space.const(3), 0).is_zero

    def test_quadratic_density(self):
        # h = (b1_x)^2 / 2, written in relabelled jets as (u1)^2/2
        from fractions import Fraction
        sys = small_system(2, seed=6)
        space = sys.space
        u1 = space.const(space.ws.var("u1"))
        h = (u1 * u1) * Fraction(1, 2)
        assert euler_full(h, 0) == -space.var(U, 0, 1)   # -b1_xx
        assert euler(h, 0) == -u1                        # -b1_x

    def test_euler_annihilates_total_derivatives(self):
        sys = small_system(2, seed=7)
        rng = random.Random(8)
        for _ in range(6):
            e = rand_jetexpr(sys.space, rng)
            d = total_x(e)
            for k in range(sys.space.n):
                assert variational_derivative(d, k).is_zero


class TestLinearize:
    def test_zero(self):
        sys = small_system(2, seed=13)
        zeros = [sys.space.zero] * 2
        assert all(v.is_zero for v in linearize(sys, zeros))

    def test_system_is_its_own_symmetry(self):
        sys = small_system(3, seed=14, rational=True)
        phi = [sys.space.const(f) for f in sys.fluxes]
        assert all(v.is_zero for v in linearize(sys, phi))

    def test_x_translation_is_a_symmetry(self):
        # in potential labels the x-translation of b^i is b^i_x, i.e. the
        # order-0 coordinate u^i after relabelling
        sys = small_system(3, seed=15, rational=True)
        phi = [sys.space.var(U, i, 0) for i in range(3)]
        assert all(v.is_zero for v in linearize(sys, phi))

    def test_lagrange_identity(self):
        # <psi, l(phi)> - <l*(psi), phi> = D_t(psi.phi) - D_x(psi.V'.phi)
        sys = small_system(2, seed=16)
        cot = CotangentSystem(sys)
        rng = random.Random(17)
        phi = [rand_jetexpr(sys.space, rng, max_order=1) for _ in range(2)]
        psi = [cot.p(k) for k in range(2)]
        lin = linearize(cot, phi)
        adj = adjoint_linearize(cot, psi)
        lhs = sys.space.zero
        inner = sys.space.zero
        cross = sys.space.zero
        for k in range(2):
            lhs = lhs + psi[k] * lin[k] - adj[k] * phi[k]
            inner = inner + psi[k] * phi[k]
            for j in range(2):
                cross = cross + psi[k] * phi[j] * sys.d1(k, j)
        rhs = cot.total_t(inner) - cot.total_x(cross)
        assert (lhs - rhs).is_zero
