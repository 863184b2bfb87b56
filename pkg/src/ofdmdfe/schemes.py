"""OFDM and ideal SC-DFE capacities over a subcarrier SNR profile.

Capacities are in bits per complex symbol.  The per-real-dimension
formulation of the Gaussian-input capacities is half of these values.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from .channel import freq_response, subcarrier_snrs
from ._validation import db_to_linear
from .exceptions import DomainError
from .qam_capacity import as_constellation, awgn_qam_capacity

LOG2E = math.log2(math.e)


def _gamma_k(profile):
    return np.asarray(getattr(profile, "gamma_k", profile), dtype=float)


def ofdm_capacity_gaussian(profile):
    """Average of ``log2(1 + gamma_k)`` over subcarriers."""
    g = _gamma_k(profile)
    return float(np.mean(np.log1p(g)) * LOG2E)


def dfe_snr(profile):
    """Unbiased MMSE-DFE output SNR ``exp(mean(log(1 + gamma_k))) - 1``."""
    g = _gamma_k(profile)
    return float(np.expm1(np.mean(np.log1p(g))))


def dfe_capacity_gaussian(profile):
    return float(np.log1p(dfe_snr(profile)) * LOG2E)


def ofdm_capacity_qam(profile, constellation):
    """Mean of the per-subcarrier M-QAM capacities."""
    return float(np.mean(awgn_qam_capacity(_gamma_k(profile), constellation)))


def dfe_capacity_qam(profile, constellation):
    """M-QAM capacity evaluated at the DFE output SNR.

    Residual interference at the equaliser output is treated as Gaussian.
    """
    return float(awgn_qam_capacity(dfe_snr(profile), constellation))


def per_subcarrier_capacities(profile, constellation):
    """List of ``(k, gamma_k, capacity_k)`` tuples."""
    g = _gamma_k(profile)
    caps = np.atleast_1d(awgn_qam_capacity(g, constellation))
    return [(k, float(gk), float(c)) for k, (gk, c) in enumerate(zip(g, caps))]


@dataclass
class CapacityCurve:
    """OFDM and SC-DFE capacities across an SNR sweep.

    ``ratio`` is NaN where the OFDM capacity is zero; such points are
    listed in :attr:`undefined` and ignored by the ratio statistics.
    """

    channel_id: str
    M: object
    N: int
    snr_db: np.ndarray
    c_ofdm: np.ndarray
    c_dfe: np.ndarray
    ratio: np.ndarray = field(init=False)

    def __post_init__(self):
        self.snr_db = np.asarray(self.snr_db, dtype=float)
        self.c_ofdm = np.asarray(self.c_ofdm, dtype=float)
        self.c_dfe = np.asarray(self.c_dfe, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio = np.where(self.c_ofdm > 0, self.c_dfe / self.c_ofdm, np.nan)

    @property
    def undefined(self):
        return np.flatnonzero(np.isnan(self.ratio))

    @property
    def points(self):
        return list(zip(self.snr_db.tolist(), self.c_ofdm.tolist(),
                        self.c_dfe.tolist(), self.ratio.tolist()))

    def min_ratio(self):
        return float(np.nanmin(self.ratio))

    def max_ratio(self):
        return float(np.nanmax(self.ratio))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "c_ofdm_bits", "c_dfe_bits", "ratio"])
        for row in self.points:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({
            "channel_id": self.channel_id,
            "M": self.M,
            "N": self.N,
            "points": [
                {"snr_db": s, "c_ofdm_bits": o, "c_dfe_bits": d,
                 "ratio": None if math.isnan(r) else r}
                for s, o, d, r in self.points
            ],
        }, indent=2)


def _check_grid(snr_db_grid):
    grid = np.asarray(snr_db_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("SNR grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("SNR grid must be strictly increasing")
    return grid


def capacity_ratio_sweep(channel, N, constellation, snr_db_grid, executor=None):
    """Sweep both capacities over ``snr_db_grid`` (dB).

    ``constellation`` may be ``"gaussian"`` for the unconstrained input.
    ``executor`` (any object with an order-preserving ``map``) lets the
    points be evaluated concurrently.
    """
    grid = _check_grid(snr_db_grid)
    H = freq_response(channel, N)
    gaussian = constellation in (None, "gaussian")
    const = None if gaussian else as_constellation(constellation)

    def point(snr_db):
        prof = subcarrier_snrs(H, float(db_to_linear(snr_db)))
        if gaussian:
            return ofdm_capacity_gaussian(prof), dfe_capacity_gaussian(prof)
        return ofdm_capacity_qam(prof, const), dfe_capacity_qam(prof, const)

    mapper = map if executor is None else executor.map
    results = list(mapper(point, grid))
    label = getattr(channel, "label", "") or "custom"
    return CapacityCurve(
        channel_id=label,
        M="gaussian" if gaussian else const.M,
        N=int(N),
        snr_db=grid,
        c_ofdm=[r[0] for r in results],
        c_dfe=[r[1] for r in results],
    )
