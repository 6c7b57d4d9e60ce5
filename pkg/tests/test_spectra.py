import math

import numpy as np
import pytest

from homolock import OPOParams, ParameterError
from homolock.spectra import (
    FsrValidityWarning,
    InconsistentEfficiency,
    from_db,
    infer_efficiency,
    infer_efficiency_amplitude,
    spectrum_trace,
    to_db,
    transfer_coefficients,
    variance,
    variance_db,
)


class TestTransferCoefficients:
    def test_perfect_reflection(self):
        p = OPOParams.normalized(chi=0.0)
        c_s, c_l = transfer_coefficients(p, 0.0, "+")
        assert c_s == pytest.approx(1.0)
        assert c_l == pytest.approx(0.0)

    def test_passive_cavity_preserves_the_noise_limit(self):
        # chi = 0: |c_s|^2 + |c_l|^2 = 1 for any omega and splitting
        rng = np.random.default_rng(21)
        for _ in range(100):
            ks = rng.uniform(0.05, 1.0)
            kl = rng.uniform(0.0, 1.0)
            p = OPOParams.normalized(chi=0.0, kappa_s=ks, kappa_l=kl)
            omega = rng.uniform(-5, 5) * p.kappa
            for quad in ("+", "-"):
                c_s, c_l = transfer_coefficients(p, omega, quad)
                assert abs(c_s) ** 2 + abs(c_l) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_derived_minus_quadrature_magnitude_one_third(self):
        p = OPOParams.normalized(chi=0.5)
        c_s, c_l = transfer_coefficients(p, 0.0, "-")
        assert abs(c_s) == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert c_l == 0.0

    def test_requires_resonance(self):
        p = OPOParams.normalized(chi=0.1, detuning=0.2)
        with pytest.raises(ParameterError):
            transfer_coefficients(p, 0.0, "-")

    def test_warns_beyond_fsr_guard(self):
        p = OPOParams(kappa_s=1.0, kappa_l=0.0, chi=0.0, tau=1.0)  # fsr = 1 Hz
        with pytest.warns(FsrValidityWarning):
            transfer_coefficients(p, 0.2 * 2 * math.pi * 1.0 * 10, "-")


class TestVariance:
    def test_qnl_for_zero_chi(self):
        rng = np.random.default_rng(22)
        omegas = np.linspace(-8, 8, 301)
        for _ in range(20):
            p = OPOParams.normalized(chi=0.0, kappa_s=rng.uniform(0.05, 1),
                                     kappa_l=rng.uniform(0, 1))
            eta = rng.uniform(0.1, 1.0)
            for quad in ("+", "-"):
                v = variance(p, omegas * p.kappa, quad, eta)
                np.testing.assert_allclose(v, 1.0, atol=1e-12)

    def test_derived_one_ninth_at_half_threshold(self):
        p = OPOParams.normalized(chi=0.5)
        assert variance(p, 0.0, "-") == pytest.approx(1.0 / 9.0, rel=1e-12)

    def test_efficiency_map(self):
        p = OPOParams.normalized(chi=0.5)
        v_ideal = variance(p, 0.0, "-")
        eta = 0.7
        assert variance(p, 0.0, "-", eta) == pytest.approx(1 - eta * (1 - v_ideal), rel=1e-14)

    def test_even_in_omega(self):
        p = OPOParams.normalized(chi=0.6, kappa_s=0.7, kappa_l=0.3)
        omegas = np.linspace(0.1, 6.0, 50)
        for quad in ("+", "-"):
            np.testing.assert_allclose(variance(p, omegas, quad),
                                       variance(p, -omegas, quad), rtol=1e-14)

    def test_minimum_of_squeezing_at_zero_frequency(self):
        p = OPOParams.normalized(chi=0.5)
        omegas = np.linspace(-8.0, 8.0, 4001)
        v = variance(p, omegas, "-")
        assert int(np.argmin(v)) == 2000

    def test_monotone_in_chi_at_zero_frequency(self):
        chis = np.linspace(0.0, 0.95, 40)
        values = [variance(OPOParams.normalized(chi=c), 0.0, "-") for c in chis]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_uncertainty_product_at_least_one(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            ks = rng.uniform(0.05, 1.0)
            kl = rng.uniform(0.0, 1.0)
            chi = rng.uniform(0.0, 0.95) * (ks + kl)
            p = OPOParams.normalized(chi=chi, kappa_s=ks, kappa_l=kl)
            omega = rng.uniform(-5, 5) * p.kappa
            prod = variance(p, omega, "+") * variance(p, omega, "-")
            assert prod >= 1.0 - 1e-12

    def test_purity_for_lossless_cavity(self):
        omegas = np.linspace(-8, 8, 301)
        for chi in (0.1, 0.5, 0.9):
            p = OPOParams.normalized(chi=chi)
            prod = variance(p, omegas, "+") * variance(p, omegas, "-")
            np.testing.assert_allclose(prod, 1.0, atol=1e-12)

    def test_eta_bounds(self):
        p = OPOParams.normalized(chi=0.5)
        with pytest.raises(ParameterError):
            variance(p, 0.0, "-", eta=0.0)
        with pytest.raises(ParameterError):
            variance(p, 0.0, "-", eta=1.2)


class TestDbHelpers:
    def test_unity_is_zero_db(self):
        assert to_db(1.0) == 0.0

    def test_one_ninth_is_minus_9_542_db(self):
        assert to_db(1.0 / 9.0) == pytest.approx(-9.542425094393, rel=1e-12)

    def test_minus_two_db_level(self):
        assert to_db(0.631) == pytest.approx(-2.0, abs=0.01)
        assert from_db(-2.0) == pytest.approx(0.6309573444801932, rel=1e-14)

    def test_variance_db_wrapper(self):
        p = OPOParams.normalized(chi=0.5)
        assert variance_db(p, 0.0, "-") == pytest.approx(10 * math.log10(1 / 9), rel=1e-12)


class TestInferEfficiency:
    def test_equal_levels_give_unity(self):
        assert infer_efficiency(2.6, 2.6) == pytest.approx(1.0, rel=1e-14)

    def test_vanishing_detection_gives_zero(self):
        assert infer_efficiency(0.0, 2.6) == pytest.approx(0.0, abs=1e-14)

    def test_reference_levels_give_0_82(self):
        eta = infer_efficiency(2.0, 2.6)
        assert eta == pytest.approx(0.82, abs=0.01)
        assert eta == pytest.approx(0.8192589162976895, rel=1e-12)

    def test_amplitude_convention_variant(self):
        eta = infer_efficiency_amplitude(2.0, 2.6)
        assert eta == pytest.approx(0.7950518269838565, rel=1e-12)

    def test_detected_better_than_ideal_is_inconsistent(self):
        with pytest.raises(InconsistentEfficiency):
            infer_efficiency(3.0, 2.6)


class TestSpectrumTrace:
    def test_symmetric_grid_symmetric_trace(self):
        p = OPOParams.normalized(chi=0.4)
        omegas = np.linspace(-3.0, 3.0, 401)
        tr = spectrum_trace(p, omegas, eta=1.0)
        np.testing.assert_allclose(tr.variance_minus, tr.variance_minus[::-1], rtol=1e-13)
        np.testing.assert_allclose(tr.variance_plus, tr.variance_plus[::-1], rtol=1e-13)

    def test_minimum_at_zero_and_absolute_frequencies(self):
        p = OPOParams(kappa_s=2 * math.pi * 6e6, kappa_l=0.0, chi=2 * math.pi * 0.89e6,
                      tau=1.0 / 199e6)
        omegas = np.linspace(-3 * p.kappa, 3 * p.kappa, 801)
        tr = spectrum_trace(p, omegas, eta=1.0)
        i_min = int(np.argmin(tr.variance_minus))
        assert tr.frequencies[i_min] == pytest.approx(0.0, abs=1e-9)
        assert tr.absolute_frequencies_hz[i_min] == pytest.approx(199e6, rel=1e-12)
        assert np.all(tr.variance_minus < 1.0)

    def test_grid_limit_enforced(self):
        p = OPOParams.normalized(chi=0.4)
        with pytest.raises(ParameterError):
            spectrum_trace(p, np.linspace(-20, 20, 11), eta=1.0)
