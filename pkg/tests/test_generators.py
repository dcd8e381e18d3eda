import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gabprate.dominance import Classification, classify, spectral_certificate
from gabprate.errors import GenerationFailed
from gabprate.generators import (
    EXAMPLE1_A,
    EXAMPLE2_A,
    GeneratorSpec,
    generate,
    heavy_tailed_edges,
)
from gabprate.system import build_induced_graph


def mean_row_mass(sys):
    A = sys.to_dense()
    return np.mean(np.abs(A - np.diag(np.diag(A))).sum(axis=1))


class TestSpec:
    def test_parse(self):
        spec = GeneratorSpec.parse("example3_style:n=20,mean_degree=2.5,rho_target=0.9")
        assert spec.kind == "example3_style" and spec.n == 20
        assert spec.params == {"mean_degree": 2.5, "rho_target": 0.9}

    def test_defaults(self):
        assert GeneratorSpec("example4_style").n == 1000
        assert GeneratorSpec.parse("tree").n == 20

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown generator kind"):
            GeneratorSpec("grid")

    def test_fixed_size(self):
        with pytest.raises(ValueError):
            GeneratorSpec("example2", 6)

    def test_bad_parameter(self):
        with pytest.raises(ValueError):
            GeneratorSpec.parse("tree:n")


class TestFixedExamples:
    def test_example1(self):
        sys = generate(GeneratorSpec("example1"))
        np.testing.assert_array_equal(sys.to_dense(), EXAMPLE1_A)
        np.testing.assert_array_equal(sys.b, [1, 2, 3])

    def test_example2(self):
        sys = generate(GeneratorSpec("example2"), seed=99)
        np.testing.assert_array_equal(sys.to_dense(), EXAMPLE2_A)
        np.testing.assert_array_equal(sys.b, [1, 2, 3, 4, 5])


class TestRandomKinds:
    @pytest.mark.parametrize("kind", ["tree", "single_loop", "example3_style", "weakly_dominant"])
    def test_deterministic_per_seed(self, kind):
        a, b = generate(GeneratorSpec(kind), 5), generate(GeneratorSpec(kind), 5)
        assert np.array_equal(a.vals, b.vals) and np.array_equal(a.rows, b.rows)
        c = generate(GeneratorSpec(kind), 6)
        assert not (c.vals.size == a.vals.size and np.array_equal(c.vals, a.vals))

    @given(st.integers(0, 10_000), st.integers(2, 40))
    def test_tree(self, seed, n):
        sys = generate(GeneratorSpec("tree", n), seed)
        g = build_induced_graph(sys)
        assert g.is_acyclic() and len(g.components()) == 1
        assert classify(sys, spectral=False).satisfies(Classification.WeaklyDScaledDD)
        np.testing.assert_array_equal(sys.b, np.arange(1, n + 1))

    @given(st.integers(0, 10_000), st.integers(3, 30))
    def test_single_loop(self, seed, n):
        g = build_induced_graph(generate(GeneratorSpec("single_loop", n), seed))
        assert g.num_edges == n and all(len(nb) == 2 for nb in g.neighbors)

    @given(st.integers(0, 10_000))
    def test_example3_style_recipe(self, seed):
        sys = generate(GeneratorSpec("example3_style"), seed)
        g = build_induced_graph(sys)
        A = sys.to_dense()
        np.testing.assert_array_equal(np.diag(A), g.degree)
        off = A[~np.eye(sys.n, dtype=bool)]
        off = off[off != 0]
        assert np.all((off > -1.2) & (off < -0.2))
        assert classify(sys, spectral=False).satisfies(Classification.WeaklyDScaledDD)

    @given(st.integers(0, 1000))
    def test_example3_style_rho_target(self, seed):
        sys = generate(GeneratorSpec.parse("example3_style:rho_target=0.9586"), seed)
        assert spectral_certificate(sys).rho == pytest.approx(0.9586, abs=1e-8)
        np.testing.assert_array_equal(np.diag(sys.to_dense()), build_induced_graph(sys).degree)

    def test_example4_style_small(self):
        sys = generate(GeneratorSpec("example4_style", 200), 7)
        assert spectral_certificate(sys).rho < 1
        assert mean_row_mass(sys) == pytest.approx(0.4, abs=0.05)
        np.testing.assert_array_equal(sys.diag, np.ones(200))
        assert len(build_induced_graph(sys).components()) == 1

    def test_example4_style_signs_and_degree(self):
        sys = generate(GeneratorSpec("example4_style", 1000), 7)
        g = build_induced_graph(sys)
        off = sys.vals[sys.rows != sys.cols]
        assert np.mean(off > 0) == pytest.approx(0.8, abs=0.03)
        assert np.mean(g.degree) == pytest.approx(7.772, abs=0.01)
        assert mean_row_mass(sys) == pytest.approx(0.4, abs=1e-12)

    def test_weakly_dominant_kind(self):
        sys = generate(GeneratorSpec("weakly_dominant", 15), 3)
        assert spectral_certificate(sys).rho < 1

    def test_generation_failed(self):
        spec = GeneratorSpec.parse("example3_style:n=10,low=-5.0,high=-4.0")
        with pytest.raises(GenerationFailed):
            generate(spec, 0)

    def test_custom_rhs_not_altered_by_kind(self):
        assert generate(GeneratorSpec("tree", 5), 0).b.tolist() == [1, 2, 3, 4, 5]


class TestHeavyTailedEdges:
    @given(st.integers(0, 1000), st.integers(10, 200))
    def test_connected_with_exact_count(self, seed, n):
        edges = heavy_tailed_edges(n, 4.0, 2.65, np.random.default_rng(seed))
        assert len(edges) == round(4.0 * n / 2)
        assert len(set(edges)) == len(edges)
        assert all(i < j for i, j in edges)
        assert nx.is_connected(nx.Graph(edges))
