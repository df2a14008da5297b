"""
Domenetyper og validering
=========================
Tester for PartySource, StarChannel, ProtocolConfig, ObservedBlock,
samlet validering og innstillinger fra miljøet.

Kjør: pytest tests/test_schemas.py -v
"""

import pytest
from pydantic import ValidationError

from app.core.errors import ParameterError
from app.core.validation import collect_violations, transmittance_from_distance, validate
from app.models.config import get_settings
from app.models.schemas import ObservedBlock, PartySource, ProtocolConfig, StarChannel, Tier


GOOD_SOURCE = {"mu": 0.1, "nu": 0.05, "omega": 0.002, "p_mu": 0.8, "p_nu": 0.1, "p_omega": 0.1}
GOOD_CHANNEL = {"eta_A": 0.2, "eta_B": 0.3, "eta_C": 0.3, "eta_d": 0.6, "p_d": 2.4e-8}


class TestPartySource:

    # -------------------------------------------------------------------------
    # TEST 1: Gyldig kilde
    # -------------------------------------------------------------------------
    def test_valid_source(self):
        """KRAV: Oppslag per nivå gir riktige verdier."""
        s = PartySource(**GOOD_SOURCE)
        assert s.intensity(Tier.NU) == 0.05
        assert s.probability(Tier.OMEGA) == 0.1
        assert s.probabilities == (0.8, 0.1, 0.1)

    # -------------------------------------------------------------------------
    # TEST 2: Alle brudd rapporteres samtidig
    # -------------------------------------------------------------------------
    def test_all_violations_reported(self):
        """
        KRAV: omega > nu og sannsynligheter som ikke summerer til 1
        gir begge meldingene, ikke bare den første.
        """
        with pytest.raises(ValidationError) as exc:
            PartySource(mu=0.1, nu=0.05, omega=0.06, p_mu=0.5, p_nu=0.1, p_omega=0.1)
        text = str(exc.value)
        assert "omega < nu violated" in text
        assert "probabilities must sum to 1" in text

    def test_zero_probability_rejected(self):
        with pytest.raises(ValidationError):
            PartySource(mu=0.1, nu=0.05, omega=0.002, p_mu=0.9, p_nu=0.1, p_omega=0.0)


class TestStarChannel:

    # -------------------------------------------------------------------------
    # TEST 3: D må være partall
    # -------------------------------------------------------------------------
    def test_odd_slices_rejected(self):
        with pytest.raises(ValidationError, match="D must be even"):
            StarChannel(**GOOD_CHANNEL, D=15)

    def test_alice_factor(self):
        assert StarChannel(**GOOD_CHANNEL).alice_factor == 0.5
        assert StarChannel(**GOOD_CHANNEL, alice_split_in_eta=True).alice_factor == 1.0

    # -------------------------------------------------------------------------
    # TEST 4: Kanal fra avstander
    # -------------------------------------------------------------------------
    def test_from_distances(self):
        """KRAV: 25 km ved 0.175 dB/km gir eta = 10^(-0.4375) = 0.36517."""
        ch = StarChannel.from_distances(25, 25, 100, 0.175, eta_d=0.6, p_d=2.4e-8)
        assert ch.eta_A == pytest.approx(0.36517, rel=1e-4)
        assert ch.eta_C == pytest.approx(0.017783, rel=1e-4)
        assert ch.e_d == 0.03 and ch.D == 16

    def test_alice_extra_loss(self):
        ch = StarChannel.from_distances(25, 25, 25, 0.175, alice_extra_loss_db=3.0, eta_d=0.6, p_d=0)
        assert ch.eta_A == pytest.approx(ch.eta_B * 10 ** -0.3)

    def test_with_distances_keeps_detector(self):
        ch = StarChannel.from_distances(25, 25, 25, 0.175, eta_d=0.6, p_d=1e-7, e_d=0.01, D=8)
        far = ch.with_distances(50, 50, 50, 0.175)
        assert (far.eta_d, far.p_d, far.e_d, far.D) == (0.6, 1e-7, 0.01, 8)
        assert far.eta_B < ch.eta_B


class TestTransmittance:

    def test_zero_distance(self):
        assert transmittance_from_distance(0, 0.2) == 1.0

    def test_multiplicative(self):
        """KRAV: eta(d1+d2) = eta(d1) * eta(d2), strengt avtagende i d."""
        for d1, d2 in ((10, 15), (0.5, 99.5), (40, 120)):
            joint = transmittance_from_distance(d1 + d2, 0.175)
            split = transmittance_from_distance(d1, 0.175) * transmittance_from_distance(d2, 0.175)
            assert joint == pytest.approx(split, rel=1e-12)
        values = [transmittance_from_distance(d, 0.175) for d in (0, 1, 25, 100, 300)]
        assert values == sorted(values, reverse=True)

    def test_invalid_inputs_listed(self):
        with pytest.raises(ParameterError) as exc:
            transmittance_from_distance(-1, 0)
        assert len(exc.value.violations) == 2


class TestConfigAndBlock:

    def test_per_bound_epsilon(self):
        assert ProtocolConfig(N=10).per_bound_epsilon == 1e-10
        assert ProtocolConfig(N=10, global_budget=True).per_bound_epsilon == pytest.approx(1e-10 / 6)

    def test_block_counts_checked(self):
        with pytest.raises(ValidationError, match="m_nu <= n_nu violated"):
            ObservedBlock(n_mu=10, n_nu=1, n_omega=1, m_mu=1, m_nu=2, m_omega=0, ez_ab=0, ez_ac=0)

    def test_block_counts_lookup(self):
        b = ObservedBlock(n_mu=10, n_nu=5, n_omega=4, m_mu=3, m_nu=2, m_omega=1, ez_ab=0, ez_ac=0)
        assert b.counts(Tier.OMEGA) == (1, 4)


class TestValidate:

    # -------------------------------------------------------------------------
    # TEST 5: Samlet validering
    # -------------------------------------------------------------------------
    def test_collects_everything(self):
        """
        KRAV: Ugyldig kilde, kanal og konfigurasjon gir én ParameterError
        med felt-prefiks på hvert brudd.
        """
        bad_source = {**GOOD_SOURCE, "omega": 0.07}
        bad_channel = {**GOOD_CHANNEL, "D": 7}
        with pytest.raises(ParameterError) as exc:
            validate((bad_source, GOOD_SOURCE, GOOD_SOURCE), bad_channel, {"N": 0})
        violations = exc.value.violations
        assert any(v.startswith("source_a") and "omega < nu violated" in v for v in violations)
        assert any(v.startswith("channel.D") for v in violations)
        assert any(v.startswith("config.N") for v in violations)

    def test_valid_bundle(self):
        bundle = validate((GOOD_SOURCE,) * 3, GOOD_CHANNEL, {"N": 1000})
        assert bundle.config.N == 1000
        assert isinstance(bundle.sources[2], PartySource)
        assert collect_violations((GOOD_SOURCE,) * 3, GOOD_CHANNEL, {"N": 1000}) == []

    def test_published_columns_valid(self, dataset):
        """KRAV: Alle ni publiserte parameterkolonner godtas uendret."""
        for record in dataset.records:
            channel = record.channel(dataset.constants).model_dump()
            sources = tuple(s.model_dump() for s in record.sources)
            assert collect_violations(sources, channel, {"N": round(record.N)}) == [], record.name


class TestSettings:

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("PMQCC_THREADS", "3")
        monkeypatch.setenv("PMQCC_LOG_LEVEL", "debug")
        settings = get_settings()
        assert settings.threads == 3
        assert settings.log_level == "DEBUG"

    def test_invalid_log_level(self, monkeypatch):
        monkeypatch.setenv("PMQCC_LOG_LEVEL", "LOUD")
        with pytest.raises(ValidationError):
            get_settings()

    def test_singleton(self):
        assert get_settings() is get_settings()
