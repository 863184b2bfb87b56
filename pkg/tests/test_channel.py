import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdmdfe.channel import (
    FIG3_TAPS,
    ChannelTaps,
    fig1_channel,
    fig3_channel,
    freq_response,
    from_zeros,
    load_channel,
    normalize,
    parse_channel,
    random_channel,
    subcarrier_snrs,
)
from ofdmdfe.exceptions import DomainError


class TestNormalize:
    def test_examples(self):
        assert np.allclose(normalize([2, 0]).taps, [1, 0])
        assert np.allclose(normalize([1, 1]).taps, [1 / math.sqrt(2)] * 2)

    def test_fig1_taps_by_hand(self):
        # norm^2 = 1 + 1.80701^2 + 0.9025^2 = 5.07980...
        taps = normalize([1, 1.80701, 0.9025]).taps.real
        assert np.allclose(taps, [0.44369, 0.80175, 0.40043], atol=5e-6)

    def test_zero_channel(self):
        with pytest.raises(DomainError):
            normalize([0, 0])

    def test_unit_norm(self, rng):
        for L in range(1, 17):
            assert normalize(rng.standard_normal(L) + 1j).energy == pytest.approx(1.0, abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            ChannelTaps([1.0, np.nan])


class TestFromZeros:
    def test_origin(self):
        assert np.allclose(from_zeros([0]).taps, [1, 0])

    def test_unit_zero(self):
        assert np.allclose(from_zeros([1]).taps, np.array([1, -1]) / math.sqrt(2))

    def test_conjugate_pair(self):
        z = 0.95 * np.exp(0.9j * np.pi)
        ch = from_zeros([z, z.conjugate()])
        middle = -2 * 0.95 * math.cos(0.9 * math.pi)
        assert middle == pytest.approx(1.80701, abs=1e-5)
        assert ch.is_real()
        assert np.allclose(ch.taps, normalize([1, middle, 0.9025]).taps, atol=1e-14)

    def test_empty(self):
        with pytest.raises(DomainError):
            from_zeros([])

    def test_root_round_trip(self, rng):
        done = 0
        while done < 30:
            n = int(rng.integers(1, 7))
            z = rng.uniform(0, 0.99, n) * np.exp(2j * np.pi * rng.random(n))
            if n > 1 and np.min(np.abs(z[:, None] - z[None, :]) + 10 * np.eye(n)) < 0.05:
                continue
            roots = np.roots(from_zeros(z).taps)
            # match each original zero to its nearest recovered root
            assert np.all(np.min(np.abs(z[:, None] - roots[None, :]), axis=1) < 1e-8)
            done += 1


class TestFreqResponse:
    def test_flat(self):
        assert np.allclose(freq_response([1.0], 8), np.ones(8))

    def test_two_tap(self):
        H = freq_response([1 / math.sqrt(2)] * 2, 2)
        assert np.allclose(H, [math.sqrt(2), 0], atol=1e-15)

    def test_fig3_parseval(self):
        H = freq_response(fig3_channel(), 512)
        assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, abs=1e-6)

    def test_too_short(self):
        with pytest.raises(DomainError):
            freq_response([1, 1, 1], 2)

    def test_parseval_random(self, rng):
        for _ in range(100):
            L = int(rng.integers(1, 17))
            h = rng.standard_normal(L) + 1j * rng.standard_normal(L)
            for N in (16, 64, 512):
                H = freq_response(h, N)
                assert np.mean(np.abs(H) ** 2) == pytest.approx(np.sum(np.abs(h) ** 2), rel=1e-10)

    @given(st.integers(1, 8), st.sampled_from([8, 16, 64]), st.integers(0, 2**32 - 1))
    def test_grid_nesting(self, L, half, seed):
        h = np.random.default_rng(seed).standard_normal(L)
        if half < L:
            return
        full = freq_response(h, 2 * half)
        assert np.allclose(full[::2], freq_response(h, half), atol=1e-12, rtol=0)


class TestSubcarrierSnrs:
    def test_flat(self):
        p = subcarrier_snrs(np.ones(4), 12.589)
        assert np.all(p.gamma_k == 12.589)

    def test_two_tap(self):
        p = subcarrier_snrs([math.sqrt(2), 0], 1.0)
        assert np.allclose(p.gamma_k, [2, 0])

    def test_fig1_mean(self):
        g = 10 ** 1.1
        p = subcarrier_snrs(freq_response(fig1_channel(), 8), g)
        assert p.N == 8
        assert np.mean(p.gamma_k) == pytest.approx(g, abs=1e-9)

    def test_negative(self):
        with pytest.raises(DomainError):
            subcarrier_snrs([1.0], -1.0)


class TestBuiltins:
    def test_fig3_printed_taps_nearly_unit(self):
        assert sum(t * t for t in FIG3_TAPS) == pytest.approx(1.0, abs=1e-3)

    def test_fig3_symmetric(self):
        t = fig3_channel().taps
        assert np.allclose(t, t[::-1])
        assert fig3_channel().energy == pytest.approx(1.0, abs=1e-12)

    def test_fig1_shape(self):
        t = fig1_channel().taps
        assert t.size == 3
        assert fig1_channel().is_real()
        assert not np.allclose(t, t[::-1])

    def test_random_channel_unit(self, rng):
        assert random_channel(rng, 5).energy == pytest.approx(1.0, abs=1e-12)


class TestChannelFile:
    def test_complex_pairs(self, tmp_path):
        path = tmp_path / "ch.json"
        path.write_text(json.dumps({"taps": [[1, 1], [0, 1]]}))
        ch = load_channel(path)
        assert np.allclose(ch.taps, np.array([1 + 1j, 1j]) / math.sqrt(3))

    def test_bare_real_list(self):
        assert np.allclose(parse_channel([3, 4]).taps, [0.6, 0.8])

    def test_no_normalize(self):
        ch = parse_channel({"taps": [2, 0], "normalize": False})
        assert np.allclose(ch.taps, [2, 0])

    @pytest.mark.parametrize("bad", [{}, {"taps": []}, {"taps": [[1, 2, 3]]}, "x"])
    def test_invalid(self, bad):
        with pytest.raises(DomainError):
            parse_channel(bad)
