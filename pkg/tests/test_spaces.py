import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwsos import (Coupling, MetricMeasureSpace, ValidationError,
                   build_cost_tensor, lipschitz_constant, load_space,
                   merge_coincident_points, normalize_diameter,
                   product_coupling)
from gwsos.spaces import space_to_dict

from conftest import random_space


def make(dist, weights):
    n = len(weights)
    return MetricMeasureSpace(labels=[str(i) for i in range(n)],
                              dist=np.asarray(dist, float),
                              weights=np.asarray(weights, float))


class TestValidation:
    def test_valid_space_roundtrips(self):
        sp = make([[0, 1], [1, 0]], [0.5, 0.5])
        assert sp.size == 2
        assert sp.diameter == 1.0

    def test_asymmetry_rejected_with_indices(self):
        with pytest.raises(ValidationError, match=r"\(0, 1\)"):
            make([[0, 1], [0.9, 0]], [0.5, 0.5])

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValidationError, match="diagonal"):
            make([[0.1, 1], [1, 0]], [0.5, 0.5])

    def test_negative_distance_rejected(self):
        with pytest.raises(ValidationError, match="negative distance"):
            make([[0, -1], [-1, 0]], [0.5, 0.5])

    def test_triangle_violation_rejected(self):
        d = [[0, 1, 3], [1, 0, 1], [3, 1, 0]]
        with pytest.raises(ValidationError, match="triangle"):
            make(d, [1 / 3] * 3)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="negative weight"):
            make([[0, 1], [1, 0]], [1.5, -0.5])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum"):
            make([[0, 1], [1, 0]], [0.5, 0.6])

    def test_empty_space_rejected(self):
        with pytest.raises(ValidationError):
            MetricMeasureSpace(labels=[], dist=np.zeros((0, 0)),
                               weights=np.zeros(0))

    def test_zero_weights_allowed_and_reported(self):
        sp = make([[0, 1], [1, 0]], [1.0, 0.0])
        assert sp.zero_weight_indices == [1]

    def test_arrays_read_only(self):
        sp = make([[0, 1], [1, 0]], [0.5, 0.5])
        with pytest.raises(ValueError):
            sp.dist[0, 1] = 2.0
        with pytest.raises(ValueError):
            sp.weights[0] = 0.0


class TestLoadSpace:
    DOC = {"labels": ["a", "b"], "dist": [[0, 1], [1, 0]],
           "weights": [0.5, 0.5], "name": "pair"}

    def test_from_dict(self):
        sp = load_space(self.DOC)
        assert sp.name == "pair"

    def test_from_json_string(self):
        sp = load_space(json.dumps(self.DOC))
        assert sp.labels == ("a", "b")

    def test_from_path(self, tmp_path):
        path = tmp_path / "sp.json"
        path.write_text(json.dumps(self.DOC))
        sp = load_space(str(path))
        assert sp.size == 2

    def test_from_file_object(self, tmp_path):
        path = tmp_path / "sp.json"
        path.write_text(json.dumps(self.DOC))
        with open(path) as fh:
            sp = load_space(fh)
        assert sp.size == 2

    def test_unknown_field_warns(self):
        doc = dict(self.DOC, color="blue")
        with pytest.warns(UserWarning, match="color"):
            load_space(doc)

    def test_missing_field_raises(self):
        doc = {k: v for k, v in self.DOC.items() if k != "weights"}
        with pytest.raises(ValidationError, match="weights"):
            load_space(doc)

    def test_dict_roundtrip(self):
        sp = load_space(self.DOC)
        again = load_space(space_to_dict(sp))
        assert np.array_equal(sp.dist, again.dist)
        assert np.array_equal(sp.weights, again.weights)


class TestNormalizeAndMerge:
    def test_normalize_records_scale(self):
        sp = make([[0, 4], [4, 0]], [0.5, 0.5])
        ns = normalize_diameter(sp)
        assert ns.diameter == 1.0
        assert ns.scale == 4.0

    def test_normalize_singleton_passthrough(self):
        sp = make([[0.0]], [1.0])
        assert normalize_diameter(sp) is sp

    def test_merge_sums_weights(self):
        d = [[0, 0, 1], [0, 0, 1], [1, 1, 0]]
        sp = make(d, [0.25, 0.25, 0.5])
        merged = merge_coincident_points(sp)
        assert merged.size == 2
        assert merged.weights[0] == pytest.approx(0.5)

    def test_merge_noop_when_separated(self):
        sp = make([[0, 1], [1, 0]], [0.5, 0.5])
        assert merge_coincident_points(sp) is sp


class TestCostTensor:
    def test_formula_entrywise(self, rng):
        X = random_space(rng, 3)
        Y = random_space(rng, 2)
        for p, q in [(1, 1), (2, 1), (1, 2), (2, 2)]:
            cost = build_cost_tensor(X, Y, p, q)
            for i in range(3):
                for j in range(2):
                    for k in range(3):
                        for l in range(2):
                            want = abs(X.dist[i, k] ** q
                                       - Y.dist[j, l] ** q) ** p
                            assert cost.entries[i, j, k, l] == \
                                pytest.approx(want, abs=1e-15)

    def test_rejects_unnormalized(self):
        big = make([[0, 2], [2, 0]], [0.5, 0.5])
        unit = make([[0, 1], [1, 0]], [0.5, 0.5])
        with pytest.raises(ValidationError, match="diameter"):
            build_cost_tensor(big, unit, 1, 1)

    def test_rejects_exponents_below_one(self):
        unit = make([[0, 1], [1, 0]], [0.5, 0.5])
        with pytest.raises(ValidationError, match=">= 1"):
            build_cost_tensor(unit, unit, 0.5, 1)

    def test_swapped_transposes_roles(self, rng):
        X = random_space(rng, 3)
        Y = random_space(rng, 2)
        cost = build_cost_tensor(X, Y, 2, 1)
        back = cost.swapped()
        assert back.m == 2 and back.n == 3
        assert np.array_equal(back.entries,
                              cost.entries.transpose(1, 0, 3, 2))

    @settings(max_examples=25, deadline=None)
    @given(p=st.sampled_from([1.0, 1.5, 2.0]),
           q=st.sampled_from([1.0, 2.0]),
           seed=st.integers(0, 10 ** 6))
    def test_lipschitz_bound_holds(self, p, q, seed):
        # |c(i,j,k,l) - c(i',j',k',l')| <= pq * (dX(i,i') + dY(j,j')
        #                                        + dX(k,k') + dY(l,l'))
        r = np.random.default_rng(seed)
        X = random_space(r, 3)
        Y = random_space(r, 3)
        c = build_cost_tensor(X, Y, p, q).entries
        L = lipschitz_constant(p, q)
        idx = r.integers(0, 3, size=(20, 8))
        for i, j, k, l, i2, j2, k2, l2 in idx:
            move = (X.dist[i, i2] + Y.dist[j, j2]
                    + X.dist[k, k2] + Y.dist[l, l2])
            assert abs(c[i, j, k, l] - c[i2, j2, k2, l2]) <= \
                L * move + 1e-12


class TestCoupling:
    def test_product_coupling_marginals(self, rng):
        mu = rng.dirichlet(np.ones(3))
        nu = rng.dirichlet(np.ones(4))
        cp = product_coupling(mu, nu)
        assert np.allclose(cp.pi.sum(axis=1), mu)
        assert np.allclose(cp.pi.sum(axis=0), nu)

    def test_marginal_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="marginal"):
            Coupling(pi=np.array([[0.5, 0.0], [0.0, 0.5]]),
                     mu=np.array([0.4, 0.6]),
                     nu=np.array([0.5, 0.5]))

    def test_negative_entry_rejected(self):
        with pytest.raises(ValidationError, match="negative"):
            Coupling(pi=np.array([[0.6, -0.1], [0.0, 0.5]]),
                     mu=np.array([0.5, 0.5]),
                     nu=np.array([0.6, 0.4]))
