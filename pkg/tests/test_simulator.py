import json
import math

import numpy as np
import pytest

from ofdmdfe.channel import ChannelTaps, fig1_channel, fig3_channel, freq_response, subcarrier_snrs
from ofdmdfe.exceptions import DomainError
from ofdmdfe.schemes import dfe_snr
from ofdmdfe.simulator import (
    SimConfig,
    design_mmse_dfe,
    genie_feedback,
    simulate_ofdm,
    simulate_scdfe_genie,
)

FLAT = ChannelTaps([1.0])


def db(x):
    return 10 * np.log10(x)


class TestConfig:
    def test_defaults(self):
        cfg = SimConfig(fig3_channel(), 64, 10.0)
        assert cfg.fb_len == 4
        assert cfg.symbol_power == 10.0

    @pytest.mark.parametrize("kwargs", [
        dict(N=4), dict(n_blocks=0), dict(fb_len=-1), dict(fb_len=64), dict(gamma=0.0), dict(M=8),
    ])
    def test_invalid(self, kwargs):
        base = dict(channel=fig3_channel(), N=64, gamma=10.0)
        base.update(kwargs)
        with pytest.raises(DomainError):
            SimConfig(**base)


class TestDesign:
    def test_flat(self):
        d = design_mmse_dfe(np.ones(16), 10.0, 3)
        assert np.allclose(d.b, 0, atol=1e-15)
        assert np.allclose(d.Q, 10 / 11)
        assert d.predicted_unbiased_snr == pytest.approx(10.0, rel=1e-12)

    def test_linear_closed_form(self):
        # gamma_k = [3, 1]: S = [1/4, 1/2]
        H = np.sqrt([3.0, 1.0])
        d = design_mmse_dfe(H, 1.0, 0)
        assert d.b.size == 0
        assert d.predicted_unbiased_snr == pytest.approx(5 / 3, rel=1e-12)

    def test_mmse_positive(self):
        d = design_mmse_dfe(freq_response(fig3_channel(), 64), 100.0, 4, symbol_power=10.0)
        assert d.predicted_mmse > 0
        assert d.predicted_unbiased_snr == pytest.approx(10.0 / d.predicted_mmse - 1, rel=1e-12)

    def test_fig3_matches_geometric_mean(self):
        H = freq_response(fig3_channel(), 512)
        g = 10 ** 1.1
        d = design_mmse_dfe(H, g, 4)
        target = dfe_snr(subcarrier_snrs(H, g))
        assert abs(db(d.predicted_unbiased_snr) - db(target)) <= 0.05

    def test_finite_n_residual_small(self):
        # the Fig-3 profile is an all-pole spectrum of order 4, so four
        # feedback taps are exact once N is large enough
        g = 10.0
        for N in (64, 512):
            H = freq_response(fig3_channel(), N)
            d = design_mmse_dfe(H, g, 4)
            assert abs(db(d.predicted_unbiased_snr) - db(dfe_snr(subcarrier_snrs(H, g)))) < 1e-9

    def test_feedback_helps(self):
        H = freq_response(fig1_channel(), 64)
        snrs = [design_mmse_dfe(H, 30.0, f).predicted_unbiased_snr for f in range(4)]
        assert all(b >= a - 1e-12 for a, b in zip(snrs, snrs[1:]))

    def test_fb_len_too_large(self):
        with pytest.raises(DomainError):
            design_mmse_dfe(np.ones(4), 1.0, 4)


class TestGenieFeedback:
    def test_lags_start_at_one(self):
        x = np.zeros(8, dtype=complex)
        x[3] = 1.0
        fb = genie_feedback(x, [0.5, 0.25])
        assert fb[3] == 0
        assert fb[4] == 0.5 and fb[5] == 0.25

    def test_circular_wrap(self):
        x = np.zeros(4, dtype=complex)
        x[3] = 1.0
        assert genie_feedback(x, [2.0])[0] == 2.0

    def test_empty(self):
        assert np.all(genie_feedback(np.ones(4), []) == 0)


class TestOfdm:
    def test_flat(self):
        res = simulate_ofdm(SimConfig(FLAT, 16, 10.0, n_blocks=20000, seed=1))
        assert res.sample_count == 16 * 20000
        assert np.max(np.abs(db(res.measured_snr) - 10.0)) <= 0.1

    def test_fig1(self):
        g = 10 ** 1.1
        res = simulate_ofdm(SimConfig(fig1_channel(), 8, g, n_blocks=100000, seed=2))
        assert np.allclose(res.predicted, g * np.abs(freq_response(fig1_channel(), 8)) ** 2)
        assert np.max(np.abs(db(res.measured_snr) - db(res.predicted))) <= 0.1

    def test_noiseless(self):
        # min |H_k|^2 is 0.2, so gamma = 1e12 leaves every subcarrier above 110 dB
        ch = ChannelTaps([1.0, 0.5])
        res = simulate_ofdm(SimConfig(ch, 8, 1e12, n_blocks=50, seed=3))
        strong = np.abs(freq_response(ch, 8)) ** 2 > 1e-6
        assert np.all(db(res.measured_snr[strong]) >= 100)

    def test_near_noiseless_tracks_prediction(self):
        res = simulate_ofdm(SimConfig(fig1_channel(), 8, 1e12, n_blocks=2000, seed=3))
        assert np.max(np.abs(db(res.measured_snr) - db(res.predicted))) <= 0.2

    def test_noise_scaling(self):
        a = simulate_ofdm(SimConfig(FLAT, 16, 20.0, n_blocks=20000, seed=4)).measured_snr
        b = simulate_ofdm(SimConfig(FLAT, 16, 10.0, n_blocks=20000, seed=4)).measured_snr
        assert np.mean(db(a) - db(b)) == pytest.approx(3.0103, abs=0.1)


class TestScDfe:
    def test_flat(self):
        res = simulate_scdfe_genie(SimConfig(FLAT, 16, 10.0, n_blocks=20000, seed=5))
        assert abs(db(res.measured_snr) - 10.0) <= 0.1

    def test_fig3_geometric_mean(self):
        g = 10 ** 1.1
        res = simulate_scdfe_genie(SimConfig(fig3_channel(), 512, g, n_blocks=2000, seed=6))
        target = dfe_snr(subcarrier_snrs(freq_response(fig3_channel(), 512), g))
        assert abs(db(res.measured_snr) - db(target)) <= 0.1
        assert res.extra["dfe_snr_formula_db"] == pytest.approx(db(target))

    def test_linear_closed_form(self):
        g = 10.0
        H = freq_response(fig3_channel(), 64)
        S = 1 / (1 + g * np.abs(H) ** 2)
        res = simulate_scdfe_genie(SimConfig(fig3_channel(), 64, g, n_blocks=4000, seed=7, fb_len=0))
        assert abs(db(res.measured_snr) - db(1 / S.mean() - 1)) <= 0.1

    @pytest.mark.parametrize("channel", [fig1_channel(), fig3_channel(), ChannelTaps([1, 0.5j, -0.3])])
    def test_ordering_and_matched_filter_bound(self, channel):
        g = 30.0
        dfe = simulate_scdfe_genie(SimConfig(channel, 64, g, n_blocks=2000, seed=8)).measured_snr
        lin = simulate_scdfe_genie(SimConfig(channel, 64, g, n_blocks=2000, seed=8, fb_len=0)).measured_snr
        mfb = np.mean(g * np.abs(freq_response(channel, 64)) ** 2)
        assert db(dfe) >= db(lin) - 0.05
        assert db(dfe) <= db(mfb) + 0.1 and db(lin) <= db(mfb) + 0.1

    def test_noise_scaling(self):
        a = simulate_scdfe_genie(SimConfig(FLAT, 16, 20.0, n_blocks=20000, seed=9)).measured_snr
        b = simulate_scdfe_genie(SimConfig(FLAT, 16, 10.0, n_blocks=20000, seed=9)).measured_snr
        # unbiased SNR of a flat channel is gamma itself
        assert db(a) - db(b) == pytest.approx(3.0103, abs=0.1)


class TestDeterminism:
    def test_same_seed_identical(self):
        cfg = SimConfig(fig3_channel(), 64, 10.0, n_blocks=600, seed=42)
        assert simulate_scdfe_genie(cfg).measured_snr == simulate_scdfe_genie(cfg).measured_snr
        assert np.array_equal(simulate_ofdm(cfg).measured_snr, simulate_ofdm(cfg).measured_snr)

    def test_seed_changes_result(self):
        a = simulate_ofdm(SimConfig(fig3_channel(), 64, 10.0, n_blocks=50, seed=1)).measured_snr
        b = simulate_ofdm(SimConfig(fig3_channel(), 64, 10.0, n_blocks=50, seed=2)).measured_snr
        assert not np.array_equal(a, b)

    def test_prefix_consistency(self):
        # chunk substreams make the first chunk independent of the total count
        a = simulate_ofdm(SimConfig(FLAT, 8, 10.0, n_blocks=256, seed=3))
        b = simulate_ofdm(SimConfig(FLAT, 8, 10.0, n_blocks=512, seed=3))
        assert a.sample_count * 2 == b.sample_count
        assert not np.array_equal(a.measured_snr, b.measured_snr)


class TestResultJson:
    def test_to_dict(self):
        cfg = SimConfig(fig3_channel(), 64, 10.0, n_blocks=10, seed=5)
        doc = simulate_scdfe_genie(cfg).to_dict(cfg)
        text = json.dumps(doc)
        back = json.loads(text)
        assert back["samples"] == 640 and back["seed"] == 5
        assert back["config"]["N"] == 64 and len(back["config"]["channel"]) == 5
        assert math.isfinite(back["measured_snr_db"][0])
