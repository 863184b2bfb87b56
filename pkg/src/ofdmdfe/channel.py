"""FIR channels, their DFT-sampled frequency response and subcarrier SNRs.

The frequency response on an N-point grid is the sequence of eigenvalues of
the N x N circulant channel matrix, i.e. the *unnormalised* DFT of the taps:
``H_k = sum_n h_n exp(-j 2 pi n k / N)``.  With unit-norm taps this gives
``mean(|H_k|^2) == 1``, so the per-subcarrier SNRs ``gamma * |H_k|^2``
average to ``gamma``.
"""

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from ._validation import check_positive_int, check_snr
from .exceptions import DomainError


@dataclass(frozen=True)
class ChannelTaps:
    """Complex FIR impulse response ``h_0 ... h_{L-1}``."""

    taps: np.ndarray
    label: str = ""

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex)).copy()
        if taps.ndim != 1 or taps.size == 0:
            raise DomainError("taps must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(taps)):
            raise DomainError("taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def L(self):
        return self.taps.size

    @property
    def memory(self):
        return self.taps.size - 1

    @property
    def energy(self):
        return float(np.sum(np.abs(self.taps) ** 2))

    def is_real(self):
        return bool(np.all(self.taps.imag == 0))

    def __eq__(self, other):
        if not isinstance(other, ChannelTaps):
            return NotImplemented
        return np.array_equal(self.taps, other.taps)

    def __hash__(self):
        return hash(self.taps.tobytes())


@dataclass(frozen=True)
class SubcarrierProfile:
    """Frequency samples ``H`` and per-subcarrier SNRs at average SNR ``gamma``."""

    H: np.ndarray
    gamma: float
    gamma_k: np.ndarray

    @property
    def N(self):
        return self.H.size


def _as_taps(channel):
    if isinstance(channel, ChannelTaps):
        return channel
    return ChannelTaps(channel)


def normalize(taps):
    """Scale taps to unit energy."""
    ch = _as_taps(taps)
    energy = ch.energy
    if energy == 0.0:
        raise DomainError("cannot normalise an all-zero channel")
    return ChannelTaps(ch.taps / np.sqrt(energy), ch.label)


def from_zeros(zeros, label=""):
    """Unit-norm channel ``prod(1 - z_i z^-1)`` with the given zeros.

    Conjugate-symmetric zero sets give real taps; residual imaginary parts
    below 1e-12 are dropped.
    """
    zeros = np.atleast_1d(np.asarray(zeros, dtype=complex))
    if zeros.size == 0:
        raise DomainError("need at least one zero")
    taps = np.poly(zeros)
    if np.all(np.abs(taps.imag) < 1e-12):
        taps = taps.real
    return normalize(ChannelTaps(taps, label))


def freq_response(channel, N):
    """N samples of the channel's DTFT at ``omega_k = 2 pi k / N``."""
    ch = _as_taps(channel)
    N = check_positive_int(N, "N")
    if N < ch.L:
        raise DomainError(f"DFT size N={N} must be at least the channel length L={ch.L}")
    return np.fft.fft(ch.taps, N)


def subcarrier_snrs(H, gamma):
    """Per-subcarrier SNRs ``gamma * |H_k|^2``."""
    H = np.asarray(H, dtype=complex)
    gamma = float(check_snr(gamma))
    gamma_k = gamma * np.abs(H) ** 2
    return SubcarrierProfile(H=H, gamma=gamma, gamma_k=gamma_k)


def profile(channel, N, gamma):
    """Shorthand for ``subcarrier_snrs(freq_response(channel, N), gamma)``."""
    return subcarrier_snrs(freq_response(channel, N), gamma)


def fig1_channel():
    """Three-tap channel with zeros at ``0.95 exp(+-j 0.9 pi)``."""
    z = 0.95 * np.exp(1j * 0.9 * np.pi)
    return from_zeros([z, np.conj(z)], label="fig1")


FIG3_TAPS = (0.1624, 0.4546, 0.7307, 0.4546, 0.1624)


def fig3_channel():
    """Five-tap linear-phase channel used for the 1024-QAM ratio curve."""
    return normalize(ChannelTaps(FIG3_TAPS, label="fig3"))


BUILTIN_CHANNELS = {
    "fig1": fig1_channel,
    "fig3": fig3_channel,
    "flat": lambda: ChannelTaps([1.0], label="flat"),
}


def random_channel(rng, L):
    """Unit-norm channel with i.i.d. circular complex Gaussian taps."""
    taps = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    return normalize(taps)


def parse_channel(data):
    """Build a channel from the decoded JSON channel document.

    Accepts ``{"taps": [[re, im], ...], "normalize": bool}`` or a bare list
    of real taps.  Taps are normalised unless ``"normalize": false``.
    """
    do_normalize = True
    if isinstance(data, dict):
        if "taps" not in data:
            raise DomainError('channel document needs a "taps" field')
        do_normalize = bool(data.get("normalize", True))
        raw = data["taps"]
    else:
        raw = data
    if not isinstance(raw, list) or not raw:
        raise DomainError("taps must be a non-empty list")
    taps = []
    for t in raw:
        if isinstance(t, (list, tuple)):
            if len(t) != 2:
                raise DomainError("complex taps must be [re, im] pairs")
            taps.append(complex(float(t[0]), float(t[1])))
        else:
            taps.append(complex(float(t)))
    ch = ChannelTaps(taps)
    return normalize(ch) if do_normalize else ch


def load_channel(path):
    """Read a channel JSON file; see :func:`parse_channel`."""
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    return parse_channel(data)


def channel_to_json(channel, normalize_on_load=False):
    ch = _as_taps(channel)
    return {
        "taps": [[float(t.real), float(t.imag)] for t in ch.taps],
        "normalize": normalize_on_load,
    }
