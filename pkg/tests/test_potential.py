"""Discrete Dirichlet machinery: energy, harmonic solves, Royden splits,
capacities, and the random-walk boundary-limit estimator."""

import numpy as np
import pytest

from doublepack.maps import (
    Truncation,
    boundary_truncation,
    build_map,
    truncate,
)
from doublepack.potential import (
    RoydenSplit,
    VertexFunction,
    capacity,
    capacity_to_json,
    energy,
    escape_capacity,
    inner_product,
    load_vertex_function_csv,
    quasi_asymptotic_profile,
    royden_project,
    solve_dirichlet,
    vertex_function_to_csv,
    walk_limit_estimate,
)
from doublepack.tilings import generate_grid, generate_tiling

K4 = [[1, 2, 3], [2, 0, 3], [0, 1, 3], [0, 2, 1]]
PATH3 = [[1], [0, 2], [1]]


def k4_energy_oracle(phi, cond):
    """Direct sum over the six unoriented K4 edges, no dart machinery."""
    total = 0.0
    for (a, b), c in cond.items():
        total += c * (phi[a] - phi[b]) ** 2
    return total


def path_truncation():
    """a - b - c with the endpoints grounded; one interior vertex."""
    return Truncation(build_map(PATH3), boundary_ids=[0, 2], root=1, radius=1)


def star_truncation():
    """K_{1,3}: center 0, grounded leaves 1..3."""
    return Truncation(build_map([[1, 2, 3], [0], [0], [0]]),
                      boundary_ids=[1, 2, 3], root=0, radius=1)


def grid_trunc(n):
    return boundary_truncation(generate_grid(n, n))


def mc_escape_probability(trunc, start, samples, seed, max_steps=100_000):
    """Monte Carlo estimate of P_start(hit boundary before returning to start)
    for the unit-conductance walk; written against neighbor lists only.

    Returns (p_hat, stderr).  Walks step uniformly; the first step always
    leaves ``start``, after which hitting ``start`` again counts as a return.
    """
    g = trunc.graph
    deg = g.degrees
    pad = np.zeros((g.n_vertices, deg.max()), dtype=np.int64)
    for v in range(g.n_vertices):
        pad[v, :deg[v]] = g.neighbors(v)
    rng = np.random.default_rng(seed)
    cur = np.full(samples, start, dtype=np.int64)
    escaped = np.zeros(samples, dtype=bool)
    active = np.ones(samples, dtype=bool)
    for step in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        at = cur[idx]
        pick = (rng.random(idx.size) * deg[at]).astype(np.int64)
        nxt = pad[at, pick]
        cur[idx] = nxt
        hit_boundary = trunc.is_boundary[nxt]
        # the forced first step out of ``start`` is never a return
        returned = (nxt == start) if step > 0 else np.zeros(idx.size, bool)
        done = hit_boundary | returned
        escaped[idx[hit_boundary]] = True
        active[idx[done]] = False
    assert not active.any(), "walks failed to absorb"
    p = escaped.mean()
    return p, np.sqrt(p * (1 - p) / samples)


class TestEnergy:
    def test_constant_is_zero(self):
        g = generate_grid(4, 4)
        assert energy(g, np.full(g.n_vertices, 2.75)) == 0.0

    def test_path_two_unit_gaps(self):
        assert energy(build_map(PATH3), [0.0, 1.0, 2.0]) == pytest.approx(2.0)

    def test_k4_matches_edge_resummation(self):
        rng = np.random.default_rng(7)
        cond = {(0, 1): 1.5, (0, 2): 0.25, (0, 3): 2.0,
                (1, 2): 0.75, (1, 3): 1.0, (2, 3): 3.0}
        g = build_map(K4, [[a, b, c] for (a, b), c in cond.items()])
        for _ in range(5):
            phi = rng.normal(size=4)
            assert energy(g, phi) == pytest.approx(
                k4_energy_oracle(phi, cond), rel=1e-12)

    def test_nonconstant_is_positive(self):
        g = generate_grid(3, 3)
        phi = np.zeros(g.n_vertices)
        phi[4] = 1e-3
        assert energy(g, phi) > 0

    def test_domain_mismatch(self):
        with pytest.raises(ValueError, match="9 vertices"):
            energy(generate_grid(3, 3), np.zeros(5))


class TestInnerProduct:
    def test_constant_gives_square(self):
        g = generate_grid(3, 3)
        a = np.full(g.n_vertices, 1.7)
        assert inner_product(g, a, a, o=4) == pytest.approx(1.7 ** 2)

    def test_symmetric_and_bilinear(self):
        g = generate_tiling(7, 3, 2)
        rng = np.random.default_rng(3)
        phi, psi, chi = rng.normal(size=(3, g.n_vertices))
        assert inner_product(g, phi, psi, 0) == pytest.approx(
            inner_product(g, psi, phi, 0))
        assert inner_product(g, 2 * phi + psi, chi, 0) == pytest.approx(
            2 * inner_product(g, phi, chi, 0) + inner_product(g, psi, chi, 0))

    def test_positive_definite(self):
        g = build_map(PATH3)
        rng = np.random.default_rng(11)
        for _ in range(20):
            phi = rng.normal(size=3)
            if np.allclose(phi, 0):
                continue
            assert inner_product(g, phi, phi, 1) > 0

    def test_root_change_keeps_norms_equivalent(self):
        # The two roots sit at graph distance 2; ratios of squared norms stay
        # inside a modest band (measured max ~2.6 over this sample).
        g = generate_tiling(7, 3, 2)
        rng = np.random.default_rng(19)
        worst = 0.0
        for _ in range(200):
            phi = rng.normal(size=g.n_vertices)
            a = inner_product(g, phi, phi, 0)
            b = inner_product(g, phi, phi, 9)
            worst = max(worst, a / b, b / a)
        assert worst < 4.0


class TestSolveDirichlet:
    def test_path_midpoint(self):
        t = path_truncation()
        h = solve_dirichlet(t, {0: 0.0, 2: 1.0})
        assert h.values[1] == pytest.approx(0.5)

    def test_constant_boundary_data(self):
        for t in (grid_trunc(5), truncate(generate_tiling(7, 3, 4), 0, 3)):
            h = solve_dirichlet(t, np.full(t.boundary.size, 3.25))
            assert np.allclose(h.values, 3.25, atol=1e-12)

    def test_grid_x_coordinate_is_exact(self):
        # x is grid-harmonic: at an interior lattice point the four neighbor
        # values average to the center value.  Verify the oracle property
        # first, then that the solver reproduces x from its boundary trace.
        t = grid_trunc(5)
        x = np.arange(t.n_vertices, dtype=float) % 5
        for v in t.interior:
            nb = t.graph.neighbors(v)
            assert np.mean(x[nb]) == pytest.approx(x[v])
        h = solve_dirichlet(t, x[t.boundary])
        assert np.allclose(h.values, x, atol=1e-10)

    def test_linear_in_boundary_data(self):
        t = truncate(generate_tiling(6, 3, 3), 0, 2)
        rng = np.random.default_rng(2)
        g1, g2 = rng.normal(size=(2, t.boundary.size))
        lhs = solve_dirichlet(t, 0.5 * g1 - 2.0 * g2).values
        rhs = 0.5 * solve_dirichlet(t, g1).values - 2.0 * solve_dirichlet(t, g2).values
        assert np.allclose(lhs, rhs, atol=1e-9)

    def test_maximum_principle(self):
        t = truncate(generate_tiling(7, 3, 4), 0, 3)
        rng = np.random.default_rng(23)
        bv = rng.uniform(-5, 5, size=t.boundary.size)
        h = solve_dirichlet(t, bv).values
        assert h[t.interior].min() >= bv.min() - 1e-12
        assert h[t.interior].max() <= bv.max() + 1e-12

    def test_weighted_harmonicity_residual(self):
        pm = generate_tiling(7, 3, 3)
        rng = np.random.default_rng(5)
        pm = pm.copy_with_conductance(rng.uniform(0.2, 3.0, pm.n_darts // 2))
        t = truncate(pm, 0, 2)
        h = solve_dirichlet(t, rng.normal(size=t.boundary.size)).values
        g = t.graph
        flow = g.conductance * (h[g.origin] - h[g.target])
        net = np.abs(np.bincount(g.origin, weights=flow, minlength=g.n_vertices))
        assert net[t.interior].max() < 1e-10 * max(1.0, np.abs(h).max())

    def test_wrong_boundary_length(self):
        with pytest.raises(ValueError, match="boundary"):
            solve_dirichlet(grid_trunc(5), np.zeros(3))


class TestRoydenProject:
    def test_harmonic_input_has_zero_d0(self):
        t = grid_trunc(5)
        x = np.arange(t.n_vertices, dtype=float) % 5
        split = royden_project(t, x)
        assert np.allclose(split.d0_part.values, 0.0, atol=1e-10)

    def test_interior_spike_is_pure_d0(self):
        t = grid_trunc(5)
        phi = np.zeros(t.n_vertices)
        phi[t.root] = 4.0
        split = royden_project(t, phi)
        assert np.allclose(split.harmonic_part.values, 0.0)
        assert np.allclose(split.d0_part.values, phi)

    def test_parts_sum_and_energies_add(self):
        pm = generate_tiling(7, 3, 3)
        rng = np.random.default_rng(13)
        pm = pm.copy_with_conductance(rng.uniform(0.5, 2.0, pm.n_darts // 2))
        t = truncate(pm, 0, 2)
        phi = rng.normal(size=t.n_vertices)
        split = royden_project(t, phi)
        g = t.graph
        assert np.allclose(split.harmonic_part.values + split.d0_part.values, phi)
        assert np.allclose(split.d0_part.values[t.boundary], 0.0)
        total = energy(g, phi)
        parts = energy(g, split.harmonic_part.values) + energy(g, split.d0_part.values)
        assert parts == pytest.approx(total, rel=1e-8)

    def test_idempotent(self):
        t = truncate(generate_tiling(6, 3, 3), 0, 2)
        phi = np.random.default_rng(29).normal(size=t.n_vertices)
        split = royden_project(t, phi)
        again = royden_project(t, split.harmonic_part.values)
        assert np.allclose(again.harmonic_part.values,
                           split.harmonic_part.values, atol=1e-10)
        assert np.allclose(again.d0_part.values, 0.0, atol=1e-10)
        d0_again = royden_project(t, split.d0_part.values)
        assert np.allclose(d0_again.harmonic_part.values, 0.0, atol=1e-10)


class TestCapacity:
    def test_star_center(self):
        t = star_truncation()
        est = capacity(t, [0])
        assert est.value == pytest.approx(3.0)
        assert np.allclose(est.equilibrium_potential.values, [1.0, 0, 0, 0])
        assert escape_capacity(t, [0]) == pytest.approx(3.0)

    def test_whole_interior_gives_cut_conductance(self):
        t = grid_trunc(5)
        est = capacity(t, t.interior)
        assert est.value == pytest.approx(12.0)
        # and with non-unit conductances the cut total
        rng = np.random.default_rng(31)
        pm = t.graph.copy_with_conductance(rng.uniform(0.1, 2.0, t.graph.n_darts // 2))
        t2 = Truncation(pm, t.boundary, t.root, t.radius)
        cut = sum(pm.conductance[e] for e in range(pm.n_darts)
                  if t.is_boundary[pm.origin[e]] != t.is_boundary[pm.target[e]]) / 2
        assert capacity(t2, t2.interior).value == pytest.approx(cut, rel=1e-12)

    def test_monotone_under_inclusion(self):
        t = truncate(generate_tiling(7, 3, 3), 0, 2)
        rng = np.random.default_rng(37)
        for _ in range(5):
            small = rng.choice(t.interior, size=3, replace=False)
            extra = np.setdiff1d(t.interior, small)
            big = np.concatenate([small, rng.choice(extra, size=4, replace=False)])
            assert capacity(t, small).value <= capacity(t, big).value + 1e-12

    def test_escape_formula_agrees(self):
        rng = np.random.default_rng(41)
        cases = [(grid_trunc(7), [24]),
                 (truncate(generate_tiling(7, 3, 4), 0, 3), [0, 1, 2])]
        pm = generate_tiling(6, 3, 3)
        pm = pm.copy_with_conductance(rng.uniform(0.3, 3.0, pm.n_darts // 2))
        cases.append((truncate(pm, 0, 2), [0, 3]))
        for t, A in cases:
            e = capacity(t, A).value
            p = escape_capacity(t, A)
            assert p == pytest.approx(e, rel=1e-6)

    def test_grid_center_against_walk_oracle(self):
        t = grid_trunc(7)
        est = capacity(t, [t.root])
        p_hat, se = mc_escape_probability(t, t.root, samples=100_000, seed=97)
        c_root = t.graph.vertex_conductance[t.root]
        assert abs(c_root * p_hat - est.value) <= 3 * c_root * se

    def test_potential_invariants(self):
        t = truncate(generate_tiling(7, 3, 3), 0, 2)
        A = [0, 1]
        est = capacity(t, A)
        q = est.equilibrium_potential.values
        assert np.allclose(q[A], 1.0)
        assert np.allclose(q[t.boundary], 0.0)
        assert ((q >= -1e-12) & (q <= 1 + 1e-12)).all()
        assert est.value == pytest.approx(energy(t.graph, q), rel=1e-8)

    def test_boundary_vertex_rejected(self):
        t = grid_trunc(5)
        with pytest.raises(ValueError, match="interior"):
            capacity(t, [int(t.boundary[0])])

    def test_empty_target(self):
        t = grid_trunc(5)
        est = capacity(t, [])
        assert est.value == 0.0
        assert np.allclose(est.equilibrium_potential.values, 0.0)


class TestWalkLimit:
    def test_constant_function(self):
        t = grid_trunc(5)
        mean, se = walk_limit_estimate(t, np.full(t.n_vertices, 2.5), t.root,
                                       samples=200, seed=1)
        assert mean == pytest.approx(2.5)
        assert se == 0.0

    def test_path_symmetry(self):
        t = path_truncation()
        phi = np.array([0.0, 0.0, 1.0])
        mean, se = walk_limit_estimate(t, phi, 1, samples=4000, seed=8)
        assert se > 0
        assert abs(mean - 0.5) <= 3 * se

    def test_matches_harmonic_part_on_grid(self):
        t = grid_trunc(7)
        rng = np.random.default_rng(55)
        phi = rng.uniform(-1, 1, t.n_vertices)
        target = royden_project(t, phi).harmonic_part.values[t.root]
        mean, se = walk_limit_estimate(t, phi, t.root, samples=20_000, seed=3)
        assert abs(mean - target) <= 3 * se

    def test_seed_reproducibility(self):
        t = truncate(generate_tiling(7, 3, 3), 0, 2)
        phi = np.random.default_rng(0).normal(size=t.n_vertices)
        a = walk_limit_estimate(t, phi, t.root, samples=500, seed=42)
        b = walk_limit_estimate(t, phi, t.root, samples=500, seed=42)
        c = walk_limit_estimate(t, phi, t.root, samples=500, seed=43)
        assert a == b
        assert a != c

    def test_conductance_bias(self):
        # Tilt the path's two edges 3:1; the walk from the middle should land
        # right with probability 3/4.
        pm = build_map(PATH3, [[0, 1, 1.0], [1, 2, 3.0]])
        t = Truncation(pm, [0, 2], 1, 1)
        phi = np.array([0.0, 0.0, 1.0])
        mean, se = walk_limit_estimate(t, phi, 1, samples=8000, seed=12)
        assert abs(mean - 0.75) <= 3 * se


class TestProfile:
    def test_zero_function(self):
        seq = [truncate(generate_tiling(7, 3, 4), 0, r) for r in (2, 3)]
        fam = [np.zeros(t.n_vertices) for t in seq]
        prof = quasi_asymptotic_profile(seq, fam, eps=0.5)
        assert prof.values == [0.0, 0.0]
        assert prof.classification == "bounded"

    def test_constant_one_grows(self):
        seq = [truncate(generate_tiling(7, 3, 5), 0, r) for r in (2, 3, 4)]
        fam = [np.ones(t.n_vertices) for t in seq]
        prof = quasi_asymptotic_profile(seq, fam, eps=0.5)
        assert prof.radii == [2, 3, 4]
        assert prof.values[0] > 0
        assert prof.values[2] > prof.values[1] > prof.values[0]
        assert prof.classification == "growing"

    def test_equilibrium_potential_is_bounded(self):
        eps = 0.3
        seq = [truncate(generate_tiling(7, 3, 5), 0, r) for r in (2, 3, 4)]
        fam = [capacity(t, [t.root]).equilibrium_potential for t in seq]
        prof = quasi_asymptotic_profile(seq, fam, eps=eps)
        for t, vf, val in zip(seq, fam, prof.values):
            assert val <= energy(t.graph, vf.values) / eps ** 2 + 1e-12
        assert prof.classification == "bounded"

    def test_needs_two_entries(self):
        t = truncate(generate_tiling(7, 3, 3), 0, 2)
        with pytest.raises(ValueError, match="two"):
            quasi_asymptotic_profile([t], [np.ones(t.n_vertices)], eps=0.5)


class TestSerialization:
    def test_csv_round_trip(self):
        t = grid_trunc(5)
        vf = VertexFunction(t, np.random.default_rng(6).normal(size=t.n_vertices))
        text = vertex_function_to_csv(vf)
        back = load_vertex_function_csv(t, text)
        assert np.array_equal(back.values, vf.values)

    def test_csv_shape(self):
        t = path_truncation()
        text = vertex_function_to_csv(VertexFunction(t, np.array([0.0, 0.5, 1.0])))
        lines = text.strip().splitlines()
        assert lines[0] == "vertex_id,value"
        assert lines[1].startswith("0,")
        assert len(lines) == 4

    def test_capacity_report_fields(self):
        t = grid_trunc(5)
        report = capacity_to_json(t, capacity(t, [t.root]))
        assert set(report) == {"value", "residual", "tolerance"}
        assert report["value"] > 0
        assert report["residual"] <= report["tolerance"]

    def test_vertex_function_validates(self):
        t = path_truncation()
        with pytest.raises(ValueError):
            VertexFunction(t, np.array([1.0, np.nan, 0.0]))
        with pytest.raises(ValueError):
            VertexFunction(t, np.zeros(7))
