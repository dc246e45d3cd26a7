import math

import mpmath as mp
import numpy as np
import pytest

from qais.estimator import plain_mc_estimate
from qais.grid import GridSpec, linear_to_coords, cell_bounds
from qais.target import (REFERENCE_P11, PentagonKinematics, build_target_pmf,
                         causal_sum, causal_terms, constant_integrand, gauss2_integrand,
                         gauss2_norm, load_kinematics, loop_momentum, multipeak_integrand,
                         p11_kinematics, pentagon_ltd_integrand,
                         pentagon_zero_momentum_reference, phantom_peak_count,
                         ring_integrand, ring_reference, single_cut_sum)


def mp_single_cut(kin, ell, dps=50, eps=0):
    """Residue sum in extended precision; ``eps`` > 0 keeps the -i0 term finite."""
    with mp.workdps(dps):
        k = [[mp.mpf(float(c)) for c in row] for row in kin.k]
        m = [mp.mpf(float(x)) for x in kin.m]
        l3 = [mp.mpf(float(c)) for c in ell]
        E = [mp.sqrt(sum((l3[a] + k[i][a + 1]) ** 2 for a in range(3)) + m[i] ** 2)
             for i in range(5)]
        total = mp.mpc(0)
        for i in range(5):
            term = 1 / (2 * E[i])
            for j in range(5):
                if j != i:
                    e = E[i] + k[j][0] - k[i][0]
                    term /= (e * e - E[j] ** 2 + 1j * mp.mpf(eps))
            total += term
        return -total


class TestBenchmarks:
    def test_gauss2_peak_value(self):
        f = gauss2_integrand()
        raw = f(np.array([[0.23, 0.23]]))[0] / gauss2_norm()
        assert raw == pytest.approx(1 + math.exp(-200 * 2 * 0.51 ** 2), rel=1e-14)

    def test_gauss2_normalised(self):
        # exact 1D Gaussian masses in extended precision
        with mp.workdps(30):
            mass = lambda r: mp.quad(lambda x: mp.exp(-200 * (x - r) ** 2), [0, r, 1])
            total = mass(mp.mpf("0.23")) ** 2 + mass(mp.mpf("0.74")) ** 2
        assert gauss2_norm() == pytest.approx(float(1 / total), rel=1e-12)
        est, std = plain_mc_estimate(gauss2_integrand(), 10 ** 6, seed=1)
        assert abs(est - 1.0) < 4 * std

    def test_ring_values(self):
        f = ring_integrand()
        ang = np.linspace(0, 2 * math.pi, 7)
        on = 0.5 + 0.35 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        assert np.allclose(f(on), 1.0)
        assert f(np.array([[0.5, 0.5]]))[0] == pytest.approx(math.exp(-200 * 0.1225), rel=1e-12)

    def test_ring_reference(self):
        ref = ring_reference()
        assert ref == pytest.approx(0.2754708736, rel=1e-9)
        est, std = plain_mc_estimate(ring_integrand(), 2 * 10 ** 6, seed=2)
        assert abs(est - ref) < 4 * std

    def test_multipeak_value(self):
        f = multipeak_integrand(2)
        want = 1 + math.exp(-50 * 0.16 * math.sqrt(2)) + math.exp(-50 * 0.51 * math.sqrt(2))
        assert f(np.array([[0.23, 0.23]]))[0] == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("d", [1, 7])
    def test_multipeak_domain(self, d):
        with pytest.raises(ValueError):
            multipeak_integrand(d)

    def test_phantom_counts(self):
        assert phantom_peak_count(3, 2) == 6 and phantom_peak_count(3, 3) == 24

    @pytest.mark.parametrize("f", [gauss2_integrand(), ring_integrand(), multipeak_integrand(3),
                                   pentagon_ltd_integrand()], ids=lambda f: f.label)
    def test_finite_and_deterministic(self, f):
        x = np.random.default_rng(0).random((10 ** 6, f.d))
        a, b = f(x), f(x)
        assert np.all(np.isfinite(a)) and np.array_equal(a, b)

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            gauss2_integrand()(np.zeros((3, 3)))


class TestPentagon:
    def test_p11_fixture(self):
        kin = p11_kinematics()
        assert kin.m == (5.01213,) * 5
        assert kin.p[0] == (33.74515, 45.72730, 31.15254, -7.47943)
        assert np.all(kin.k[4] == 0)

    def test_invariants_spacelike(self):
        k = p11_kinematics().k
        for i in range(5):
            for j in range(i + 1, 5):
                dk = k[j] - k[i]
                assert dk[0] ** 2 - dk[1:] @ dk[1:] < 0

    def test_load_file(self, tmp_path):
        path = tmp_path / "k.cfg"
        path.write_text("[kinematics]\n" + "".join(f"p{i} = 1, 0, 0, {i}\n" for i in range(1, 5))
                        + "".join(f"m{i} = 2\n" for i in range(1, 6)))
        kin = load_kinematics(path)
        assert kin.k[3].tolist() == [4.0, 0.0, 0.0, 10.0]

    def test_bad_kinematics(self, tmp_path):
        with pytest.raises(ValueError):
            PentagonKinematics(((0.0,) * 4,) * 4, (1.0, 1.0, 1.0, 1.0, 0.0))
        with pytest.raises(FileNotFoundError):
            load_kinematics(tmp_path / "missing.cfg")

    def test_measure(self):
        ell, meas = loop_momentum(np.array([[0.5, 1.0, 0.0]]))
        assert np.allclose(ell, [[0, 0, 1]])
        assert meas[0] == pytest.approx(4 * 2 * 2 * math.pi / (2 * math.pi) ** 3)

    def test_extended_precision_oracle(self):
        kin = p11_kinematics()
        u = np.random.default_rng(5).uniform(0.01, 0.99, (100, 3))
        ell, _ = loop_momentum(u)
        got = single_cut_sum(kin, ell)
        got_causal = causal_sum(kin, ell)
        for row, g, gc in zip(ell, got, got_causal):
            ref = mp_single_cut(kin, row)
            assert abs(g - float(ref.real)) <= 1e-8 * abs(float(ref.real))
            assert abs(gc - float(ref.real)) <= 1e-8 * abs(float(ref.real))

    def test_imaginary_part_vanishes_in_real_limit(self):
        kin = p11_kinematics()
        ell, _ = loop_momentum(np.random.default_rng(6).uniform(0.01, 0.99, (100, 3)))
        for row in ell:
            v = mp_single_cut(kin, row, eps=mp.mpf("1e-30"))
            assert abs(v.imag / v.real) < 1e-8

    def test_causal_expansion_size(self):
        terms = causal_terms(5)
        assert len(terms) == 70
        assert all(len(pairs) == 4 for _, pairs in terms)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_causal_small_n(self, n):
        # random on-shell energies: causal form equals the residue sum
        rng = np.random.default_rng(n)
        E = rng.uniform(1, 3, n)
        k0 = rng.uniform(-0.3, 0.3, n)
        res = sum(1 / (2 * E[i]) * math.prod(
            1 / ((E[i] + k0[j] - k0[i]) ** 2 - E[j] ** 2) for j in range(n) if j != i)
            for i in range(n))
        causal = sum(c * math.prod(1 / (E[i] + E[j] + k0[j] - k0[i]) for i, j in pairs)
                     for c, pairs in causal_terms(n)) / math.prod(2 * E)
        assert causal == pytest.approx(res, rel=1e-10)

    def test_zero_momentum_closed_form(self):
        f = pentagon_ltd_integrand(PentagonKinematics.zero(1.0), form="causal")
        est, std = plain_mc_estimate(f, 10 ** 6, seed=3)
        ref = pentagon_zero_momentum_reference(1.0)
        assert ref == pytest.approx(-5.27714e-4, rel=1e-5)
        assert abs(est - ref) < 4 * std

    def test_p11_plain_mc(self):
        est, std = plain_mc_estimate(pentagon_ltd_integrand(), 10 ** 6, seed=4)
        assert abs(est - REFERENCE_P11) < 4 * std


class TestTargetPMF:
    def test_constant_uniform(self):
        spec = GridSpec((3, 2))
        t = build_target_pmf(spec, constant_integrand(2.5, spec.bounds), 4)
        assert np.allclose(t.probabilities, 1 / 32) and t.probabilities.sum() == pytest.approx(1)

    def test_gauss2_argmax(self):
        spec = GridSpec((5, 5))
        t = build_target_pmf(spec, gauss2_integrand(), 8)
        box = cell_bounds(spec, linear_to_coords(spec, int(np.argmax(t.probabilities))))
        assert any(all(a <= c <= b for (a, b), c in zip(box, r)) for r in [(0.23,) * 2, (0.74,) * 2])
        assert t.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_center_placement_matches_direct_map(self):
        spec = GridSpec((4, 3, 2))
        f = multipeak_integrand(3)
        t = build_target_pmf(spec, f, 1, placement="center")
        coords = linear_to_coords(spec, np.arange(spec.n_cells))
        centres = np.array([[(a + b) / 2 for a, b in cell_bounds(spec, c)] for c in coords])
        direct = f(centres)
        assert np.allclose(t.probabilities, direct / direct.sum(), rtol=1e-13, atol=0)

    def test_cached(self):
        spec = GridSpec((4, 4))
        f = ring_integrand()
        build_target_pmf(spec, f, 3, seed=9)
        calls = f.n_calls
        build_target_pmf(spec, f, 3, seed=9)
        assert f.n_calls == calls

    def test_signed_uses_abs(self):
        spec = GridSpec((2, 2, 2))
        t = build_target_pmf(spec, pentagon_ltd_integrand(), 2)
        assert np.all(t.probabilities >= 0) and np.any(t.cell_means < 0)

    def test_negative_unsigned_rejected(self):
        from qais.target import Integrand
        f = Integrand(lambda x: x[:, 0] - 0.5, ((0.0, 1.0),), "lin")
        with pytest.raises(ValueError):
            build_target_pmf(GridSpec((3,)), f, 2)
