"""Small input-checking helpers shared by the public functions."""

import math

import numpy as np

from .exceptions import DomainError


def check_snr(gamma, name="gamma", strict=False):
    """Return ``gamma`` as a float64 array after checking it is a valid linear SNR."""
    arr = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if strict and np.any(arr <= 0):
        raise DomainError(f"{name} must be > 0")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value:
        raise DomainError(f"{name} must be an integer")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}")
    return value


def db_to_linear(snr_db):
    """Power ratio from decibels."""
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def linear_to_db(snr):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(snr, dtype=float))


def is_power_of_four(m):
    if m < 4:
        return False
    k = round(math.log(m, 4))
    return 4**k == m
