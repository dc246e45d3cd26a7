import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qais.statevector import (AnsatzSpec, apply_entangler_layer, apply_two_qubit_rotation,
                              apply_u3, basis_state, init_uniform, load_params,
                              probabilities, qubit_pairs, run_ansatz, sample, save_params)

from oracles import dense_ansatz, dense_u3, embed, expm_pauli_pair


class TestInit:
    def test_one_qubit(self):
        assert np.allclose(init_uniform(1), [2 ** -0.5, 2 ** -0.5])

    def test_three_qubits(self):
        psi = init_uniform(3)
        assert np.allclose(psi, 8 ** -0.5) and math.isclose(np.vdot(psi, psi).real, 1.0)

    @pytest.mark.parametrize("n", [1, 4, 10])
    def test_uniform_pmf(self, n):
        assert np.allclose(probabilities(init_uniform(n)), 2.0 ** -n)

    def test_too_many_qubits(self):
        with pytest.raises(ValueError):
            init_uniform(40)


class TestTwoQubitRotation:
    @pytest.mark.parametrize("theta", [0.3, 1.7, -2.2])
    def test_z_keeps_probabilities(self, theta):
        for k in range(8):
            psi = apply_two_qubit_rotation(basis_state(3, k), "Z", 0, 2, theta)
            assert np.allclose(probabilities(psi), probabilities(basis_state(3, k)))

    def test_x_half_pi_flips(self):
        psi = apply_two_qubit_rotation(basis_state(2, 0), "X", 0, 1, math.pi / 2)
        assert np.allclose(psi, [0, 0, 0, -1j])

    def test_x_quarter_pi_splits(self):
        p = probabilities(apply_two_qubit_rotation(basis_state(2, 0), "X", 0, 1, math.pi / 4))
        assert np.allclose(p, [0.5, 0, 0, 0.5])

    @pytest.mark.parametrize("axis", ["X", "Y", "Z"])
    def test_matches_dense(self, axis):
        rng = np.random.default_rng(3)
        n = 4
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.linalg.norm(psi)
        for i, j in [(0, 1), (1, 3), (0, 3), (3, 0)]:
            want = expm_pauli_pair(axis, i, j, 0.7, n) @ psi
            got = apply_two_qubit_rotation(psi.copy(), axis, i, j, 0.7)
            assert np.max(np.abs(got - want)) < 1e-12

    @pytest.mark.parametrize("i, j", [(0, 0), (0, 5), (-1, 1)])
    def test_invalid_pair(self, i, j):
        with pytest.raises(ValueError):
            apply_two_qubit_rotation(init_uniform(3), "X", i, j, 0.1)


class TestU3:
    def test_identity(self):
        psi = init_uniform(3) * np.exp(0.3j)
        assert np.allclose(apply_u3(psi.copy(), 1, 0, 0, 0), psi)

    def test_y_flip(self):
        p = probabilities(apply_u3(basis_state(1, 0), 0, math.pi / 2, 0, 0))
        assert np.allclose(p, [0, 1])

    def test_diagonal_when_alpha_zero(self):
        rng = np.random.default_rng(0)
        psi = rng.normal(size=8) + 0j
        psi /= np.linalg.norm(psi)
        out = apply_u3(psi.copy(), 2, 0.0, 1.3, -0.4)
        assert np.allclose(probabilities(out), probabilities(psi))

    def test_gamma_acts_first(self):
        a, b, g = 0.4, 1.1, -0.6
        psi = apply_u3(basis_state(2, 1), 1, a, b, g)
        assert np.allclose(psi, embed({1: dense_u3(a, b, g)}, 2) @ basis_state(2, 1))


class TestAnsatz:
    @pytest.mark.parametrize("n, layers, count", [
        (5, "EZ,R", 25), (16, "EZ,R,EX,R", 336), (19, "EZ,R,EX,R", 456), (16, "EZ,R", 168),
    ])
    def test_parameter_counts(self, n, layers, count):
        assert AnsatzSpec.parse(layers).n_params(n) == count

    def test_zero_params_uniform(self):
        spec = AnsatzSpec.parse("EZ,R,EY,R,EX,R")
        psi = run_ansatz(spec, 5, np.zeros(spec.n_params(5)))
        assert np.allclose(probabilities(psi), 1 / 32)

    def test_aliases(self):
        assert AnsatzSpec.parse("zz u3 x").layers == ("EZ", "R", "EX")

    def test_bad_layer(self):
        with pytest.raises(ValueError):
            AnsatzSpec.parse("EZ,Q")

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            run_ansatz(AnsatzSpec.parse("R"), 3, np.zeros(8))

    @pytest.mark.parametrize("seed", range(50))
    def test_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        layers = rng.choice(["EX", "EY", "EZ", "R"], size=int(rng.integers(1, 5)))
        spec = AnsatzSpec(tuple(layers))
        params = rng.uniform(-math.pi, math.pi, spec.n_params(n))
        err = np.max(np.abs(run_ansatz(spec, n, params) - dense_ansatz(spec, n, params)))
        assert err < 1e-10

    @pytest.mark.parametrize("axis", ["EX", "EY", "EZ"])
    def test_layer_equals_pairwise(self, axis):
        n = 5
        rng = np.random.default_rng(1)
        theta = rng.uniform(-1, 1, n * (n - 1) // 2)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        want = psi.copy()
        for t, (i, j) in zip(theta, qubit_pairs(n)):
            apply_two_qubit_rotation(want, axis[1], i, j, t)
        assert np.max(np.abs(apply_entangler_layer(psi, axis, theta) - want)) < 1e-12

    def test_norm_drift_over_100_gates(self):
        rng = np.random.default_rng(7)
        n = 8
        psi = init_uniform(n)
        for _ in range(100):
            if rng.random() < 0.5:
                i, j = rng.choice(n, 2, replace=False)
                apply_two_qubit_rotation(psi, "XYZ"[rng.integers(3)], int(i), int(j), rng.normal())
            else:
                apply_u3(psi, int(rng.integers(n)), *rng.normal(size=3))
        assert abs(probabilities(psi).sum() - 1.0) < 1e-12

    @given(st.integers(2, 7), st.lists(st.floats(-3, 3), min_size=21, max_size=21))
    @settings(max_examples=40, deadline=None)
    def test_z_entangler_keeps_probabilities(self, n, values):
        rng = np.random.default_rng(n)
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi /= np.linalg.norm(psi)
        out = apply_entangler_layer(psi, "EZ", np.array(values[: n * (n - 1) // 2]))
        assert np.max(np.abs(probabilities(out) - probabilities(psi))) < 1e-12

    @given(st.integers(1, 10), st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_random_circuits_preserve_norm(self, n, seed):
        rng = np.random.default_rng(seed)
        spec = AnsatzSpec(("EZ", "R", "EY", "R", "EX", "R"))
        psi = run_ansatz(spec, n, rng.uniform(-4, 4, spec.n_params(n)))
        assert abs(np.vdot(psi, psi).real - 1.0) < 1e-12


class TestSample:
    def test_indicator(self):
        shots = sample(probabilities(basis_state(3, 5)), 1000, 0)
        assert shots.as_dict() == {5: 1000}

    def test_binomial(self):
        n = 10 ** 6
        shots = sample(np.array([0.5, 0.5]), n, 11)
        assert shots.total == n
        assert np.all(np.abs(shots.counts - n / 2) < 5 * math.sqrt(n * 0.25))

    def test_reproducible(self):
        pmf = probabilities(run_ansatz(AnsatzSpec.parse("R"), 4, np.arange(12) * 0.1))
        a, b = sample(pmf, 5000, 42), sample(pmf, 5000, 42)
        assert np.array_equal(a.indices, b.indices) and np.array_equal(a.counts, b.counts)
        assert a.n_states <= min(5000, 16) and np.all(np.diff(a.indices) > 0)

    def test_unnormalized(self):
        with pytest.raises(ValueError):
            sample(np.array([0.5, 0.6]), 10, 0)


def test_param_file_roundtrip(tmp_path):
    spec = AnsatzSpec.parse("EZ,R")
    params = np.random.default_rng(0).normal(size=spec.n_params(4))
    path = tmp_path / "p.json"
    save_params(path, n=4, qubits=(2, 2), ansatz=spec, params=params, seed=3, final_kl=0.125)
    doc = load_params(path)
    assert np.array_equal(doc["params"], params)
    assert doc["qubits"] == [2, 2] and doc["ansatz"] == spec and doc["final_kl"] == 0.125
    raw = json.loads(path.read_text())
    assert set(raw) == {"n", "qubits", "layers", "params", "seed", "final_kl"}
    first = path.read_bytes()
    save_params(path, n=4, qubits=(2, 2), ansatz=spec, params=params, seed=3, final_kl=0.125)
    assert path.read_bytes() == first
