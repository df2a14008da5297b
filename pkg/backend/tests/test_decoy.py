"""
Decoy-grenser
=============
Totaler, G-koeffisienter, Y2^L, E_X^U og paritetsvekter.

Kjør: pytest tests/test_decoy.py -v
"""

import logging

import numpy as np
import pytest

from app.core.decoy import (
    IntensityTotals,
    forward_gain_series,
    g_coefficients,
    parity_weights,
    phase_error_upper,
    poisson_weight,
    totals,
    y2_lower,
)
from app.core.errors import DecoyInfeasibleError, ParameterError, UndefinedQuantityError
from app.core.keyrate import finite_key_rate
from app.models.schemas import PartySource


def _source(mu, nu, omega):
    return PartySource(mu=mu, nu=nu, omega=omega, p_mu=0.8, p_nu=0.1, p_omega=0.1)


class TestTotals:

    # -------------------------------------------------------------------------
    # TEST 1: Summerte intensiteter
    # -------------------------------------------------------------------------
    def test_record_totals(self, sources_25):
        t = totals(*sources_25)
        assert t.mu_tot == pytest.approx(0.1472)
        assert t.nu_tot == pytest.approx(0.0770)
        assert t.omega_tot == pytest.approx(0.003812)
        assert t.ratio_deviation < 5e-2

    def test_ratio_mismatch_rejected(self):
        """KRAV: Avvik i nu/mu over 5 % mellom partene er ugyldig."""
        with pytest.raises(DecoyInfeasibleError, match="ratio"):
            totals(_source(0.1, 0.05, 0.002), _source(0.1, 0.08, 0.002), _source(0.1, 0.05, 0.002))

    def test_small_mismatch_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="app.core.decoy"):
            totals(_source(0.1, 0.05, 0.002), _source(0.1, 0.051, 0.002), _source(0.1, 0.05, 0.002))
        assert "avviker" in caplog.text

    def test_zero_omega_total(self):
        s = PartySource(mu=0.1, nu=0.05, omega=0.0, p_mu=0.8, p_nu=0.1, p_omega=0.1)
        with pytest.raises(DecoyInfeasibleError, match="omega_tot"):
            totals(s, s, s)


class TestGCoefficients:

    # -------------------------------------------------------------------------
    # TEST 2: G-verdier for {25,25,25}
    # -------------------------------------------------------------------------
    def test_record_values(self, sources_25):
        g = g_coefficients(totals(*sources_25))
        assert g.g == pytest.approx(2.4509e-9, rel=1e-3)
        assert g.g_nu == pytest.approx(1.0105e-6, rel=1e-3)
        assert g.g_mu == pytest.approx(1.5487e-7, rel=1e-3)
        assert g.g_omega == pytest.approx(1.3789e-5, rel=1e-3)


class TestTwoPhotonBound:

    # -------------------------------------------------------------------------
    # TEST 3: Eksakt gjenvinning for tre-ledds systemer
    # -------------------------------------------------------------------------
    @pytest.mark.parametrize("y1, y2, y3", [(0.3, 0.5, 0.2), (0.01, 0.02, 0.9), (1.0, 1.0, 1.0)])
    def test_exact_recovery(self, y1, y2, y3):
        """KRAV: Uten Y0 og Yk (k>=4) er Y2^L nøyaktig Y2."""
        t = IntensityTotals(0.15, 0.08, 0.004)
        yields = [0.0, y1, y2, y3] + [0.0] * 8
        q = [forward_gain_series(yields, x) for x in t.as_tuple()]
        bound = y2_lower(*q, t)
        assert bound.raw == pytest.approx(y2, rel=1e-9)

    # -------------------------------------------------------------------------
    # TEST 4: Sunnhet på tilfeldige yield-vektorer
    # -------------------------------------------------------------------------
    def test_soundness_random(self):
        """KRAV: Y2^L <= sann Y2 for 1000 tilfeldige yield-vektorer og totaler."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            mu = rng.uniform(0.02, 0.6)
            nu = mu * rng.uniform(0.1, 0.9)
            om = nu * rng.uniform(0.01, 0.9)
            t = IntensityTotals(mu, nu, om)
            yields = rng.uniform(0, 1, size=12)
            q = [forward_gain_series(yields, x) for x in t.as_tuple()]
            bound = y2_lower(*q, t)
            assert bound.value <= yields[2] + 1e-12

    def test_vacuous_flag(self):
        t = IntensityTotals(0.15, 0.08, 0.004)
        bound = y2_lower(0.5, 0.0, 0.5, t)
        assert bound.vacuous and bound.value == 0.0

    def test_invalid_gain(self):
        with pytest.raises(ParameterError):
            y2_lower(1.5, 0.1, 0.1, IntensityTotals(0.15, 0.08, 0.004))

    def test_short_yield_vector(self):
        with pytest.raises(ParameterError):
            forward_gain_series([0.1] * 5, 0.1)

    def test_asymptotic_record_value(self, record_25, dataset):
        """KRAV: {25,25,25} med ubegrensede gains gir Y2^L ≈ 1.78e-2 og E_X ≈ 10.3 %."""
        report = finite_key_rate(
            record_25.block, record_25.sources, record_25.config(dataset.constants), 16
        )
        assert report.y2_lower_asymptotic == pytest.approx(1.7788e-2, rel=5e-3)
        assert report.ex_upper_asymptotic == pytest.approx(0.1031, abs=1e-3)


class TestPhaseError:

    def test_poisson_weight(self):
        assert poisson_weight(2, 0.1472) == pytest.approx(9.351e-3, rel=1e-3)

    def test_zero_y2_gives_one(self):
        assert phase_error_upper(0.0, 1e-4, 0.15) == 1.0

    def test_clamped_at_zero(self):
        assert phase_error_upper(1.0, 1e-6, 0.15) == 0.0

    def test_undefined_reference(self):
        with pytest.raises(UndefinedQuantityError):
            phase_error_upper(0.01, 0.0, 0.15)


class TestParity:

    def test_record_weights(self):
        p_even, p_odd = parity_weights(0.1472)
        assert p_odd == pytest.approx(0.127511, rel=1e-3)
        assert p_even + p_odd == pytest.approx(1.0)

    def test_zero_intensity(self):
        assert parity_weights(0.0) == (1.0, 0.0)


class TestProperties:

    # -------------------------------------------------------------------------
    # TEST 5: Egenskaper på tilfeldige totaler
    # -------------------------------------------------------------------------
    def test_g_coefficients_positive(self):
        """KRAV: mu_tot > nu_tot > omega_tot > 0 gir G, G_nu, G_0, G_mu, G_omega > 0."""
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            mu = float(rng.uniform(1e-3, 3.0))
            nu = mu * float(rng.uniform(0.01, 0.99))
            om = nu * float(rng.uniform(0.01, 0.99))
            g = g_coefficients(IntensityTotals(mu, nu, om))
            assert g.g > 0 and g.g_nu > 0 and g.g_0 > 0
            assert g.g_mu > 0 and g.g_omega > 0

    def test_phase_error_monotone(self):
        """KRAV: E_X^U avtar i Y2^L og øker i referanse-gain."""
        y2s = np.linspace(0.0, 0.05, 26)
        by_y2 = [phase_error_upper(float(y), 1e-3, 0.15) for y in y2s]
        assert all(a >= b for a, b in zip(by_y2, by_y2[1:]))
        refs = np.geomspace(1e-5, 1e-1, 25)
        by_ref = [phase_error_upper(0.02, float(q), 0.15) for q in refs]
        assert all(a <= b for a, b in zip(by_ref, by_ref[1:]))


class TestForwardSeries:

    def test_unit_yields(self):
        """KRAV: Alle Y_k = 1 gir Q = 1 + t*e^(-t) (dobbel Y1-koeffisient)."""
        for t in (0.01, 0.1472, 0.5, 2.0):
            q = forward_gain_series([1.0] * 25, t)
            assert q == pytest.approx(1 + t * np.exp(-t), rel=1e-12)

    def test_two_photon_only(self):
        """KRAV: Bare Y2 = 1 ved t = 0.1 gir e^(-0.1) * 0.1^2 / 2 ≈ 4.524e-3."""
        yields = [0.0, 0.0, 1.0] + [0.0] * 9
        assert forward_gain_series(yields, 0.1) == pytest.approx(4.524e-3, rel=1e-3)
