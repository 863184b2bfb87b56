"""Monte-Carlo cyclic-prefix block transmission.

Two receivers are simulated over the same CP channel model:

* OFDM with a one-tap (zero-forcing) equaliser per subcarrier;
* single-carrier transmission with a frequency-domain MMSE feedforward
  filter and a genie-aided feedback filter that subtracts the *true*
  previous symbols (no error propagation).  Feedback wraps circularly
  inside the block, which is what the CP structure allows when the block
  tail is assumed known.

Symbols are unnormalised square QAM (odd-integer levels on each axis), so the
complex symbol power is ``2 (M - 1) / 3`` and the complex noise variance is
that power divided by ``gamma``.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter

from ._validation import check_positive_int, check_snr, linear_to_db
from .channel import ChannelTaps, freq_response
from .exceptions import DomainError
from .qam_capacity import as_constellation
from .schemes import dfe_snr

# Blocks drawn from one RNG substream; fixed so results do not depend on how
# the work is split up.
CHUNK_BLOCKS = 256


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelTaps
    N: int
    gamma: float
    M: int = 16
    n_blocks: int = 1000
    seed: int = 0
    fb_len: int = None

    def __post_init__(self):
        if not isinstance(self.channel, ChannelTaps):
            object.__setattr__(self, "channel", ChannelTaps(self.channel))
        check_positive_int(self.N, "N")
        check_positive_int(self.n_blocks, "n_blocks")
        as_constellation(self.M)
        check_snr(self.gamma, strict=True)
        if self.N <= self.channel.L - 1:
            raise DomainError("N must exceed the channel memory L-1")
        if self.fb_len is None:
            object.__setattr__(self, "fb_len", self.channel.memory)
        check_positive_int(self.fb_len, "fb_len", minimum=0)
        if self.fb_len >= self.N:
            raise DomainError("fb_len must be < N")

    @property
    def symbol_power(self):
        """Complex QAM symbol power 2 (M - 1) / 3."""
        return 2.0 * as_constellation(self.M).sigma_x2

    def describe(self):
        d = asdict(self)
        d["channel"] = [[float(t.real), float(t.imag)] for t in self.channel.taps]
        return d


@dataclass(frozen=True)
class DfeDesign:
    """Frequency-domain feedforward taps and time-domain feedback taps.

    ``predicted_mmse`` is normalised to unit symbol power; multiply by the
    symbol power for absolute units.
    """

    Q: np.ndarray
    b: np.ndarray
    predicted_mmse: float
    predicted_unbiased_snr: float

    @property
    def monic(self):
        return np.concatenate(([1.0 + 0j], self.b))


@dataclass
class SimResult:
    measured_snr: object
    sample_count: int
    predicted: object
    extra: dict = field(default_factory=dict)

    def to_dict(self, config):
        measured = np.atleast_1d(self.measured_snr)
        predicted = np.atleast_1d(self.predicted)
        out = {
            "measured_snr_db": _db_list(measured),
            "predicted_snr_db": _db_list(predicted),
            "samples": int(self.sample_count),
            "seed": int(config.seed),
            "config": config.describe(),
        }
        for key, value in self.extra.items():
            out[key] = value
        return out


def _db_list(x):
    return [None if not math.isfinite(v) else float(v) for v in linear_to_db(x)]


def design_mmse_dfe(H, gamma, fb_len, symbol_power=1.0):
    """Unbiased-MMSE DFE for the circulant channel with frequency samples ``H``.

    For a monic feedback polynomial ``b'`` the optimal feedforward filter is
    the per-subcarrier Wiener filter times ``B'_k``, leaving an error power of
    ``mean(S_k |B'_k|^2)`` with ``S_k = 1 / (1 + gamma |H_k|^2)``.  Minimising
    that over ``fb_len`` feedback taps is a Hermitian Toeplitz solve on the
    circular autocorrelation of ``S``.

    Parameters
    ----------
    H : array_like
        N complex frequency samples (circulant eigenvalues).
    gamma : float
        Linear SNR, ``> 0``.
    fb_len : int
        Number of feedback taps, at lags ``1 .. fb_len``.
    symbol_power : float
        Scales ``predicted_mmse``; the SNRs do not depend on it.
    """
    H = np.asarray(H, dtype=complex)
    N = H.size
    gamma = float(check_snr(gamma, strict=True))
    fb_len = check_positive_int(fb_len, "fb_len", minimum=0)
    if fb_len >= N:
        raise DomainError("fb_len must be < N")
    S = 1.0 / (1.0 + gamma * np.abs(H) ** 2)
    # rho_m = (1/N) sum_k S_k exp(+j 2 pi k m / N)
    rho = np.fft.ifft(S)[: fb_len + 1]
    e0 = np.zeros(fb_len + 1)
    e0[0] = 1.0
    a = solve_toeplitz((rho, rho.conj()), e0)
    if not np.all(np.isfinite(a)) or a[0].real <= 0:
        raise ArithmeticError("singular Toeplitz system in DFE design")
    monic = a / a[0]
    B = np.fft.fft(monic, N)
    Q = B * H.conj() / (np.abs(H) ** 2 + 1.0 / gamma)
    a0 = float(a[0].real)
    mmse = symbol_power / a0
    return DfeDesign(Q=Q, b=monic[1:], predicted_mmse=mmse,
                     predicted_unbiased_snr=symbol_power / mmse - 1.0)


def _chunk_rngs(seed, n_blocks):
    n_chunks = -(-n_blocks // CHUNK_BLOCKS)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    for i, seq in enumerate(seqs):
        size = min(CHUNK_BLOCKS, n_blocks - i * CHUNK_BLOCKS)
        yield np.random.default_rng(seq), size


def _draw(rng, size, N, levels, noise_var, cp, L):
    """QAM blocks and complex noise for the CP-extended received samples."""
    idx = rng.integers(0, levels.size, size=(size, N, 2))
    x = levels[idx[..., 0]] + 1j * levels[idx[..., 1]]
    shape = (size, N + cp + L - 1)
    noise = math.sqrt(noise_var / 2.0) * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )
    return x, noise


def _channel_output(s, taps, noise, cp):
    """Prepend the CP, convolve linearly, add noise and strip the CP."""
    N = s.shape[1]
    with_cp = np.concatenate([s[:, N - cp:], s], axis=1) if cp else s
    padded = np.pad(with_cp, ((0, 0), (0, taps.size - 1)))
    r = lfilter(taps, [1.0], padded, axis=1) + noise
    return r[:, cp: cp + N]


def simulate_ofdm(config):
    """Per-subcarrier output SNR of OFDM with a one-tap equaliser.

    The measured SNR of subcarrier ``k`` is the symbol power over the mean
    squared error of the equalised symbols; the prediction is
    ``gamma * |H_k|^2``.
    """
    taps = config.channel.taps
    N, cp = config.N, config.channel.memory
    H = freq_response(config.channel, N)
    levels = as_constellation(config.M).levels
    power = config.symbol_power
    noise_var = power / config.gamma
    err = np.zeros(N)
    with np.errstate(divide="ignore", invalid="ignore"):
        for rng, size in _chunk_rngs(config.seed, config.n_blocks):
            x, noise = _draw(rng, size, N, levels, noise_var, cp, taps.size)
            s = np.fft.ifft(x, axis=1, norm="ortho")
            r = _channel_output(s, taps, noise, cp)
            y = np.fft.fft(r, axis=1, norm="ortho")
            x_hat = y / H
            err += np.sum(np.abs(x_hat - x) ** 2, axis=0)
        measured = power / (err / config.n_blocks)
    return SimResult(measured_snr=measured, sample_count=N * config.n_blocks,
                     predicted=config.gamma * np.abs(H) ** 2)


def genie_feedback(x, b):
    """Circular feedback sum ``sum_{m=1}^{len(b)} b_m x[(n - m) mod N]``.

    Only lags >= 1 enter; the current symbol is never part of its own sum.
    """
    fb = np.zeros_like(x, dtype=complex)
    for m, bm in enumerate(b, start=1):
        fb += bm * np.roll(x, m, axis=-1)
    return fb


def simulate_scdfe_genie(config, design=None):
    """Unbiased output SNR of the genie-aided SC-DFE.

    Reports the measured ``symbol_power / MSE - 1`` with the design's
    prediction as ``predicted`` and the geometric-mean formula value in
    ``extra["dfe_snr_formula"]``.
    """
    taps = config.channel.taps
    N, cp = config.N, config.channel.memory
    H = freq_response(config.channel, N)
    power = config.symbol_power
    if design is None:
        design = design_mmse_dfe(H, config.gamma, config.fb_len, symbol_power=power)
    levels = as_constellation(config.M).levels
    noise_var = power / config.gamma
    sq_err = 0.0
    for rng, size in _chunk_rngs(config.seed, config.n_blocks):
        x, noise = _draw(rng, size, N, levels, noise_var, cp, taps.size)
        r = _channel_output(x, taps, noise, cp)
        z = np.fft.ifft(design.Q * np.fft.fft(r, axis=1), axis=1)
        x_tilde = z - genie_feedback(x, design.b)
        sq_err += float(np.sum(np.abs(x_tilde - x) ** 2))
    mse = sq_err / (N * config.n_blocks)
    gamma_k = config.gamma * np.abs(H) ** 2
    return SimResult(
        measured_snr=power / mse - 1.0,
        sample_count=N * config.n_blocks,
        predicted=design.predicted_unbiased_snr,
        extra={
            "dfe_snr_formula_db": float(linear_to_db(dfe_snr(gamma_k))),
            "measured_mse": mse,
            "fb_len": config.fb_len,
        },
    )
