import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmetrix.measures import (
    GmSearchConfig,
    Measure,
    alternating_overlap_ascent,
    binary_entropy,
    bipartitions,
    entropy_bipartite,
    ggm,
    ggm_two_qubit_closed,
    gm,
)
from qmetrix.states import ProbeState


def two_qubit_weights():
    return st.lists(st.floats(1e-6, 1.0), min_size=4, max_size=4).map(
        lambda ws: np.array(ws) / np.sum(ws)
    )


def state(w, n=2, d=2):
    return ProbeState(np.asarray(w, dtype=float), n, d)


CAT = state([0.5, 0, 0, 0.5])
UNIFORM = state(np.full(4, 0.25))
GHZ3 = state([0.5, 0, 0, 0, 0, 0, 0, 0.5], n=3)


class TestBipartitions:
    def test_counts(self):
        assert len(bipartitions(2)) == 1
        assert len(bipartitions(3)) == 3
        assert len(bipartitions(4)) == 7
        assert len(bipartitions(5)) == 15

    def test_all_contain_party_zero(self):
        assert all(cut[0] == 0 for cut in bipartitions(5))

    def test_single_party_rejected(self):
        with pytest.raises(ValueError):
            bipartitions(1)


class TestGgm:
    def test_cat(self):
        assert ggm(CAT).value == pytest.approx(0.5, abs=1e-12)

    def test_uniform_product(self):
        assert ggm(UNIFORM).value == pytest.approx(0.0, abs=1e-12)

    def test_ghz3(self):
        val, report = ggm(GHZ3, return_report=True)
        assert val.value == pytest.approx(0.5, abs=1e-12)
        # every cut ties at 1/2; the lexicographically first one is reported
        assert report.partition == (0,)
        assert report.max_schmidt_sq == pytest.approx(0.5, abs=1e-12)

    def test_single_party_rejected(self):
        with pytest.raises(ValueError):
            ggm(ProbeState([0.4, 0.6], 1, 2))

    def test_qudit_range(self):
        diag = np.zeros(9)
        diag[[0, 4, 8]] = 1 / 3
        val = ggm(state(diag, d=3)).value
        assert val == pytest.approx(2 / 3, abs=1e-12)

    @given(two_qubit_weights())
    def test_matches_closed_form(self, w):
        assert ggm(state(w)).value == pytest.approx(
            ggm_two_qubit_closed(w), abs=1e-12
        )

    @given(two_qubit_weights())
    def test_party_swap_invariance(self, w):
        swapped = np.asarray(w).reshape(2, 2).T.ravel()
        assert ggm(state(w)).value == pytest.approx(
            ggm(state(swapped)).value, abs=1e-12
        )


class TestClosedForm:
    def test_examples(self):
        assert ggm_two_qubit_closed([0.5, 0, 0, 0.5]) == pytest.approx(0.5)
        assert ggm_two_qubit_closed([0.25] * 4) == pytest.approx(0.0, abs=1e-12)
        assert ggm_two_qubit_closed([0.4, 0.1, 0.1, 0.4]) == pytest.approx(
            0.1, abs=1e-12
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            ggm_two_qubit_closed([0.5, -0.2, 0.4, 0.3])
        with pytest.raises(ValueError):
            ggm_two_qubit_closed([0.1, 0.1, 0.1, 0.1])


class TestEntropy:
    def test_examples(self):
        assert entropy_bipartite(CAT).value == pytest.approx(1.0, abs=1e-12)
        assert entropy_bipartite(UNIFORM).value == pytest.approx(0.0, abs=1e-12)

    def test_qutrit_diagonal(self):
        diag = np.zeros(9)
        diag[[0, 4, 8]] = 1 / 3
        assert entropy_bipartite(state(diag, d=3)).value == pytest.approx(
            np.log2(3), abs=1e-12
        )

    def test_bipartite_only(self):
        with pytest.raises(ValueError):
            entropy_bipartite(GHZ3)

    @given(two_qubit_weights())
    def test_party_swap_invariance(self, w):
        swapped = np.asarray(w).reshape(2, 2).T.ravel()
        assert entropy_bipartite(state(w)).value == pytest.approx(
            entropy_bipartite(state(swapped)).value, abs=1e-12
        )


class TestBinaryEntropy:
    def test_values(self):
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=1e-12)

    @given(st.floats(0.0, 1.0))
    def test_symmetric(self, p):
        assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.1)
        with pytest.raises(ValueError):
            binary_entropy(1.1)


class TestGm:
    CFG = GmSearchConfig(restarts=8, max_sweeps=200, seed=11)

    def test_product_state_zero(self):
        res = gm(UNIFORM, self.CFG)
        assert res.value.measure == Measure.GM
        assert res.value.value == pytest.approx(0.0, abs=1e-9)

    def test_two_qubit_cat(self):
        assert gm(CAT, self.CFG).value.value == pytest.approx(0.5, abs=1e-9)

    def test_ghz3(self):
        assert gm(GHZ3, self.CFG).value.value == pytest.approx(0.5, abs=1e-9)

    def test_matches_ggm_bipartite(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            w = rng.uniform(size=4)
            w /= w.sum()
            s = state(w)
            assert gm(s, self.CFG).value.value == pytest.approx(
                ggm(s).value, abs=1e-6
            )

    def test_never_below_ggm(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            w = rng.uniform(size=8)
            w /= w.sum()
            s = state(w, n=3)
            assert gm(s, self.CFG).value.value >= ggm(s).value - 1e-6

    def test_monotone_ascent(self):
        rng = np.random.default_rng(6)
        w = rng.uniform(size=8)
        w /= w.sum()
        tensors = np.sqrt(w).reshape(1, 2, 2, 2)
        vecs = [
            v / np.linalg.norm(v, axis=1, keepdims=True)
            for v in rng.normal(size=(3, 1, 2))
        ]
        trace: list[np.ndarray] = []
        alternating_overlap_ascent(tensors, list(vecs), 50, 1e-15, trace=trace)
        overlaps = np.array([t[0] for t in trace])
        assert np.all(np.diff(overlaps) >= -1e-12)

    def test_three_qubit_grid_oracle(self):
        # dense real product-state grid as an independent check
        rng = np.random.default_rng(7)
        theta = np.linspace(0, np.pi, 120, endpoint=False)
        basis = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        for _ in range(5):
            w = rng.uniform(size=8)
            w /= w.sum()
            psi = np.sqrt(w).reshape(2, 2, 2)
            grid = np.einsum("ijk,ai,bj,ck->abc", psi, basis, basis, basis)
            oracle = 1.0 - float(np.max(grid**2))
            found = gm(state(w, n=3), self.CFG).value.value
            assert found <= oracle + 1e-9  # search cannot beat the true optimum
            assert found == pytest.approx(oracle, abs=2e-3)  # grid error budget

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        w = rng.uniform(size=8)
        w /= w.sum()
        s = state(w, n=3)
        assert gm(s, self.CFG).value.value == gm(s, self.CFG).value.value

    def test_nonconvergence_flag(self):
        cfg = GmSearchConfig(restarts=2, max_sweeps=1, seed=0)
        res = gm(GHZ3, cfg)
        assert res.sweeps_used == 1
        assert isinstance(res.converged, bool)


class TestOptimalFamilyRelation:
    @settings(max_examples=20)
    @given(st.floats(0.001, 0.499))
    def test_entropy_equals_binary_entropy_of_ggm(self, g_target):
        from qmetrix.laws import optimal_state_ggm

        s = optimal_state_ggm(g_target, 2)
        entropy = entropy_bipartite(s).value
        gval = ggm(s).value
        assert entropy == pytest.approx(binary_entropy(gval), abs=1e-9)
