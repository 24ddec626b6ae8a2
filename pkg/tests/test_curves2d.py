import math

import numpy as np
import pytest

from rhlab import curves2d as c2
from rhlab.ensembles import EnsembleSpec, HomogeneousPolynomial, multi_indices, sample


def conic(terms):
    E = multi_indices(3, 2)
    idx = {tuple(r): i for i, r in enumerate(E)}
    c = np.zeros(len(E))
    for k, v in terms.items():
        c[idx[k]] = v
    return HomogeneousPolynomial(3, 2, c)


EMPTY_CONIC = conic({(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})
OVAL_CONIC = conic({(0, 2, 0): 1, (0, 0, 2): 1, (2, 0, 0): -0.3})
LINE = HomogeneousPolynomial(3, 1, np.array([1.0, 0.0, 0.0]))


class TestSphericalGrid:
    def test_counts_and_antipode(self):
        for L in (0, 2, 4):
            g = c2.spherical_grid(L)
            assert g.n_triangles == 20 * 4**L
            np.testing.assert_array_equal(g.antipode[g.antipode], np.arange(g.n_vertices))
            np.testing.assert_allclose(g.vertices[g.antipode], -g.vertices, atol=0)

    def test_unit_vertices(self):
        g = c2.spherical_grid(3)
        np.testing.assert_allclose(np.linalg.norm(g.vertices, axis=1), 1.0, rtol=1e-14)

    def test_edge_shrinks_with_level(self):
        edges = [c2.spherical_grid(L).max_edge for L in (2, 3, 4, 5)]
        ratios = [a / b for a, b in zip(edges, edges[1:])]
        assert all(1.8 < r < 2.2 for r in ratios)

    def test_required_level(self):
        for d in (1, 4, 8, 16):
            L = c2.required_level(d)
            assert c2.spherical_grid(L).max_edge <= 1 / (4 * d)
            assert L == 2 or c2.spherical_grid(L - 1).max_edge > 1 / (4 * d)

    def test_degree_cap(self):
        with pytest.raises(c2.InsufficientResolution):
            c2.required_level(10_000)


class TestExtractTopology:
    def test_empty_curve(self):
        t = c2.extract_topology(EMPTY_CONIC, c2.spherical_grid(4))
        assert t.b0 == 0 and t.n_noncontractible == 0

    def test_single_oval(self):
        t = c2.extract_topology(OVAL_CONIC, c2.spherical_grid(4))
        assert t.b0 == 1 and t.n_noncontractible == 0
        assert t.components[0][1] is True  # contractible

    def test_projective_line_is_pseudoline(self):
        t = c2.extract_topology(LINE, c2.spherical_grid(4))
        assert t.b0 == 1 and t.n_noncontractible == 1

    def test_zero_polynomial_rejected(self):
        Q = HomogeneousPolynomial(3, 2, np.zeros(6))
        with pytest.raises(ValueError):
            c2.extract_topology(Q, c2.spherical_grid(2))

    def test_pseudoline_parity_random(self):
        for d, L in ((3, 5), (4, 5)):
            grid = c2.spherical_grid(L)
            spec = EnsembleSpec("kostlan", 3, d, seed=10 + d)
            for t in range(25):
                topo = c2.extract_topology(sample(spec, t), grid)
                if topo.flagged:
                    continue
                assert topo.n_noncontractible == d % 2
                assert topo.b0 <= c2.harnack_bound(d)

    def test_grid_refinement_stability(self):
        d = 6
        L = c2.required_level(d)
        ga, gb = c2.spherical_grid(L), c2.spherical_grid(L + 1)
        spec = EnsembleSpec("kostlan", 3, d, seed=77)
        stable = 0
        total = 0
        for t in range(60):
            Qa = sample(spec, t)
            ta = c2.extract_topology(Qa, ga)
            if ta.flagged:
                continue
            tb = c2.extract_topology(Qa, gb)
            total += 1
            stable += ta.b0 == tb.b0
        assert total > 40
        assert stable / total >= 0.99


class TestBettiStatistics:
    def test_degree_one_exact(self):
        st = c2.betti_statistics(1, 40, seed=1)
        assert st.mean_b0 == 1.0 and st.std_error == 0.0

    def test_conics_have_at_most_one_oval(self):
        st = c2.betti_statistics(2, 60, seed=2)
        assert st.mean_b0 < 1.0
        assert st.max_b0_observed <= 1

    def test_harnack_recorded(self):
        st = c2.betti_statistics(4, 30, seed=3)
        assert st.harnack_bound == 4
        assert st.max_b0_observed <= 4


class TestPlaneComponents:
    def grid(self, f, lo=-2.0, hi=2.0, res=90):
        lin = np.linspace(lo, hi, res)
        X, Y = np.meshgrid(lin, lin, indexing="ij")
        return f(X, Y), lin

    def test_circle_closed(self):
        vals, lin = self.grid(lambda x, y: x * x + y * y - 1.0)
        comps = c2.plane_curve_components(vals, lin, lin)
        closed = [c for c in comps if c.closed]
        assert len(closed) == 1
        r = np.linalg.norm(closed[0].points, axis=1)
        assert np.abs(r - 1).max() < 0.05

    def test_line_open(self):
        vals, lin = self.grid(lambda x, y: x - 0.1 * y)
        comps = c2.plane_curve_components(vals, lin, lin)
        assert len(comps) == 1 and not comps[0].closed

    def test_two_disjoint_circles(self):
        vals, lin = self.grid(
            lambda x, y: ((x - 0.9) ** 2 + y**2 - 0.36) * ((x + 0.9) ** 2 + y**2 - 0.36)
        )
        comps = c2.plane_curve_components(vals, lin, lin)
        assert c2.nesting_signature(comps) == (0, 0)

    def test_nested_circles(self):
        vals, lin = self.grid(lambda x, y: (x * x + y * y - 0.25) * (x * x + y * y - 1.0))
        comps = c2.plane_curve_components(vals, lin, lin)
        assert c2.nesting_signature(comps) == (0, 1)

    def test_domain_mask_opens_chains(self):
        vals, lin = self.grid(lambda x, y: x * x + y * y - 1.0)
        X, Y = np.meshgrid(lin, lin, indexing="ij")
        half = X < 0.2  # the circle crosses the mask boundary
        comps = c2.plane_curve_components(vals, lin, lin, half)
        assert all(not c.closed for c in comps)


class TestCensus:
    def test_counts_and_bound_by_b0(self):
        d = 8
        res = c2.component_census_in_balls(d, 10, 2.0, seed=4)
        assert set(res.counts) == {"one_oval", "two_nonnested", "two_nested"}
        assert res.n_balls >= 1
        # disjoint balls: catalog hits in one trial cannot exceed that trial's b0
        grid = c2.spherical_grid(c2.required_level(d))
        spec = EnsembleSpec("kostlan", 3, d, seed=4)
        total_b0 = sum(
            c2.extract_topology(sample(spec, t), grid).b0 for t in range(10)
        )
        assert sum(res.counts.values()) <= total_b0

    def test_empty_catalog(self):
        res = c2.component_census_in_balls(6, 3, 2.0, seed=5, catalog={})
        assert res.counts == {}
