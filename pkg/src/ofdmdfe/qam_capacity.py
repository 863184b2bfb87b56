"""Constellation-constrained AWGN capacity of square M-QAM.

A square M-QAM symbol is a pair of independent sqrt(M)-PAM symbols, so its
capacity is twice the capacity of one PAM dimension.  All capacities
returned here are in **bits per complex symbol** (multiply a per-real-dimension
value by 2 to get these units).

The PAM levels are the odd integers ``-(sqrt(M)-1), ..., -1, +1, ..., sqrt(M)-1``
and the per-dimension symbol power is ``sigma_x2 = (M-1)/3``, so the linear
SNR ``gamma`` is the ratio of that power to the per-dimension noise variance.

The mutual information is the differential entropy of the Gaussian-mixture
output density minus that of the noise.  The entropy integral is evaluated
with composite Gauss-Legendre quadrature in one of two equivalent layouts,
whichever is cheaper for the given SNR:

* received domain: integrate over ``u = r / sigma_n`` on the union of the
  components' +-12 sigma supports (best when components overlap);
* per level: write ``r = a_i + sigma_n * n`` for each transmitted level and
  integrate the log-partition against the standard normal on ``[-12, 12]``
  (best when components are well separated, where interior levels share
  one integrand).

The rule is refined by panel halving until two successive estimates agree
to ``REFINE_TOL`` bits.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from ._validation import check_snr, is_power_of_four
from .exceptions import AccuracyError, ConditioningError, DomainError

SUPPORTED_ORDERS = (4, 16, 64, 256, 1024, 4096)

LOG2E = math.log2(math.e)

# Standard-normal truncation of the quadrature; tail mass beyond is < 1e-32.
_HALF_RANGE = 12.0
_GL_NODES = 16
_FIRST_PANEL = 1.0
_MAX_REFINEMENTS = 4
REFINE_TOL = 1e-11

# Neighbours further than this (in noise standard deviations) contribute
# terms below exp(-320) and are dropped.
_NEIGHBOUR_CUTOFF = 40.0

# Finite-difference settings for the second derivative of tau.
DEFAULT_STEP = 0.02
_CAPACITY_NOISE = 1e-12
_MAX_FD_NOISE = 1e-6

# Peaks of tau'' below this are indistinguishable from quadrature noise.
RESOLUTION_FLOOR = 2e-6


@dataclass(frozen=True)
class Constellation:
    """Square M-QAM described through its per-dimension PAM levels."""

    M: int

    def __post_init__(self):
        m = self.M
        if isinstance(m, bool) or int(m) != m or not is_power_of_four(int(m)):
            raise DomainError(
                f"unsupported modulation order {m!r}; supported orders are "
                + ", ".join(str(o) for o in SUPPORTED_ORDERS)
            )
        object.__setattr__(self, "M", int(m))

    @property
    def points_per_dim(self):
        return math.isqrt(self.M)

    @property
    def levels(self):
        p = self.points_per_dim
        return np.arange(-(p - 1), p, 2, dtype=float)

    @property
    def sigma_x2(self):
        """Per-dimension symbol power, the mean of the squared levels."""
        return (self.M - 1) / 3.0

    @property
    def max_bits(self):
        return math.log2(self.M)

    def points(self):
        """All M complex constellation points (row-major in the I/Q levels)."""
        lv = self.levels
        return (lv[:, None] + 1j * lv[None, :]).ravel()


def as_constellation(value):
    """Accept a :class:`Constellation` or a bare modulation order."""
    if isinstance(value, Constellation):
        return value
    return Constellation(value)


def mixture_pdf(r, gamma, constellation):
    """Output density of one PAM dimension at linear SNR ``gamma``.

    Equal-weight mixture of Gaussians centred on the PAM levels, each with
    variance ``sigma_x2 / gamma``.
    """
    const = as_constellation(constellation)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("r must be finite")
    gamma = float(check_snr(gamma, strict=True))
    var = const.sigma_x2 / gamma
    z = (r[..., None] - const.levels) ** 2 / (2.0 * var)
    return np.exp(-z).sum(axis=-1) / (const.points_per_dim * math.sqrt(2.0 * math.pi * var))


@lru_cache(maxsize=None)
def _legendre():
    return np.polynomial.legendre.leggauss(_GL_NODES)


@lru_cache(maxsize=None)
def _standard_normal_rule(panel):
    """Composite Gauss-Legendre nodes on [-12, 12] with weights times phi(n)."""
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    n_panels = int(round(2 * _HALF_RANGE / panel))
    left = -_HALF_RANGE + panel * np.arange(n_panels)
    nodes = (left[:, None] + 0.5 * panel * (x + 1.0)).ravel()
    weights = np.tile(0.5 * panel * w, n_panels)
    weights = weights * np.exp(-0.5 * nodes**2) / math.sqrt(2.0 * math.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _neighbour_classes(p, window):
    """Group PAM levels by how many neighbours they have on each side.

    Levels with the same (left, right) neighbour counts inside the window
    give identical expectations; mirror-image pairs do too.
    """
    counts = {}
    for i in range(p):
        key = tuple(sorted((min(i, window), min(p - 1 - i, window))))
        counts[key] = counts.get(key, 0) + 1
    return counts


def _exponents(gamma, const):
    """Log posterior ratios of every in-window neighbour against the sent level.

    Returns ``(offsets, mask, multiplicity, sigma_n)`` where ``offsets`` is the
    signed level-index offset grid and ``mask[c, k]`` flags which offsets
    exist for neighbour class ``c``.
    """
    p = const.points_per_dim
    sigma_n = math.sqrt(const.sigma_x2 / gamma)
    spacing = 2.0 / sigma_n
    window = min(p - 1, int(_NEIGHBOUR_CUTOFF / spacing))
    classes = _neighbour_classes(p, window)
    offsets = np.arange(-window, window + 1)
    offsets = offsets[offsets != 0]
    mask = np.zeros((len(classes), offsets.size), dtype=bool)
    mult = np.empty(len(classes))
    for c, ((left, right), count) in enumerate(classes.items()):
        mask[c] = (offsets >= -left) & (offsets <= right)
        mult[c] = count
    return offsets, mask, mult, sigma_n


def _log_partition(d, nodes, mask):
    """log(1 + sum_k exp(-(d_k^2 + 2 d_k n)/2)) over in-window neighbours.

    Shapes: ``d`` (K,), ``nodes`` (Q,), ``mask`` (C, K); result (C, Q).
    """
    e = -0.5 * (d[:, None] ** 2 + 2.0 * d[:, None] * nodes[None, :])
    e = np.where(mask[:, :, None], e[None, :, :], -np.inf)
    top = np.maximum(e.max(axis=1), 0.0)
    total = np.exp(-top) + np.exp(e - top[:, None, :]).sum(axis=1)
    return top + np.log(total)


def _received_rule(centres, panel):
    """Composite Gauss-Legendre rule on u >= 0 covering every mixture component.

    Components are truncated at +-12 standard deviations; overlapping
    supports are merged into one run of panels.
    """
    x, w = _legendre()
    lo = np.maximum(centres - _HALF_RANGE, 0.0)
    hi = centres + _HALF_RANGE
    order = np.argsort(lo)
    runs = []
    for a, b in zip(lo[order], hi[order]):
        if runs and a <= runs[-1][1]:
            runs[-1][1] = max(runs[-1][1], b)
        else:
            runs.append([a, b])
    nodes, weights = [], []
    for a, b in runs:
        n_pan = max(1, int(math.ceil((b - a) / panel)))
        width = (b - a) / n_pan
        left = a + width * np.arange(n_pan)
        nodes.append((left[:, None] + 0.5 * width * (x + 1.0)).ravel())
        weights.append(np.tile(0.5 * width * w, n_pan))
    return np.concatenate(nodes), np.concatenate(weights)


def _use_received_domain(gamma, const):
    """Pick the cheaper of the two equivalent quadrature layouts."""
    offsets, mask, _, sigma_n = _exponents(gamma, const)
    p = const.points_per_dim
    per_level = mask.shape[0] * max(offsets.size, 1) * 2 * _HALF_RANGE
    centres = const.levels[const.levels > 0] / sigma_n
    extent = min(centres.max() + _HALF_RANGE, centres.size * 2 * _HALF_RANGE)
    # the received layout carries more per-call overhead
    return 4 * p * extent < per_level


def _log_mixture(u, centres):
    """log sum_m exp(-(u - c_m)^2 / 2) and the posterior component weights."""
    e = -0.5 * (u[:, None] - centres[None, :]) ** 2
    top = e.max(axis=1)
    w = np.exp(e - top[:, None])
    z = w.sum(axis=1)
    return top + np.log(z), w / z[:, None]


def _received_terms(gamma, const, panel):
    sigma_n = math.sqrt(const.sigma_x2 / gamma)
    centres = const.levels / sigma_n
    u, w = _received_rule(centres[centres > 0], panel)
    lse, post = _log_mixture(u, centres)
    dens = np.exp(lse) / (const.points_per_dim * math.sqrt(2.0 * math.pi))
    # even integrands: the rule covers u >= 0 only
    return 2.0 * w * dens, lse, post


def _pam_information(gamma, const, panel):
    """Mutual information of one PAM dimension, in nats."""
    p = const.points_per_dim
    if _use_received_domain(gamma, const):
        w, lse, _ = _received_terms(gamma, const, panel)
        # mixture entropy minus unit-variance noise entropy; log(2 pi)/2 cancels
        return math.log(p) - 0.5 - float(w @ lse)
    offsets, mask, mult, sigma_n = _exponents(gamma, const)
    if offsets.size == 0:
        return math.log(p)
    nodes, weights = _standard_normal_rule(panel)
    d = -2.0 * offsets / sigma_n
    g = _log_partition(d, nodes, mask)
    return math.log(p) - float(mult @ (g @ weights)) / p


def _pam_mmse(gamma, const, panel):
    """Expected posterior variance of one PAM dimension, divided by sigma_x2."""
    if _use_received_domain(gamma, const):
        w, _, post = _received_terms(gamma, const, panel)
        lv = const.levels
        mean = post @ lv
        var = np.maximum(post @ lv**2 - mean**2, 0.0)
        return float(w @ var) / const.sigma_x2
    offsets, mask, mult, sigma_n = _exponents(gamma, const)
    if offsets.size == 0:
        return 0.0
    nodes, weights = _standard_normal_rule(panel)
    d = -2.0 * offsets / sigma_n
    e = -0.5 * (d[:, None] ** 2 + 2.0 * d[:, None] * nodes[None, :])
    e = np.where(mask[:, :, None], e[None, :, :], -np.inf)
    top = np.maximum(e.max(axis=1), 0.0)
    w_self = np.exp(-top)
    w = np.exp(e - top[:, None, :])
    z = w_self + w.sum(axis=1)
    shift = 2.0 * offsets[None, :, None]
    mean = (w * shift).sum(axis=1) / z
    second = (w * shift**2).sum(axis=1) / z
    var = np.maximum(second - mean**2, 0.0)
    return float(mult @ (var @ weights)) / const.points_per_dim / const.sigma_x2


def _refine(fn, gamma, const, scale):
    panel = _FIRST_PANEL
    prev = fn(gamma, const, panel)
    for _ in range(_MAX_REFINEMENTS):
        panel /= 2.0
        cur = fn(gamma, const, panel)
        if abs(cur - prev) * scale < REFINE_TOL:
            return cur
        prev = cur
    raise AccuracyError(
        f"quadrature did not converge to {REFINE_TOL:g} at gamma={gamma!r}, M={const.M}"
    )


@lru_cache(maxsize=1 << 17)
def _capacity_scalar(gamma, m):
    if gamma == 0.0:
        return 0.0
    const = Constellation(m)
    nats = _refine(_pam_information, gamma, const, 2.0 * LOG2E)
    return min(max(2.0 * LOG2E * nats, 0.0), const.max_bits)


def awgn_qam_capacity(gamma, constellation):
    """Capacity of square M-QAM on an AWGN channel, bits per complex symbol.

    Parameters
    ----------
    gamma : float or array_like
        Linear SNR, ``>= 0``.  ``gamma == 0`` gives exactly 0.
    constellation : Constellation or int
        The constellation or its order M.

    Returns
    -------
    float or ndarray
        Same shape as ``gamma``.

    Raises
    ------
    DomainError
        If any ``gamma`` is negative or not finite.
    AccuracyError
        If the quadrature fails to converge.
    """
    const = as_constellation(constellation)
    arr = check_snr(gamma)
    if arr.ndim == 0:
        return _capacity_scalar(float(arr), const.M)
    uniq, inverse = np.unique(arr, return_inverse=True)
    vals = np.array([_capacity_scalar(float(g), const.M) for g in uniq])
    return vals[inverse].reshape(arr.shape)


def gaussian_capacity(gamma):
    """Gaussian-input capacity log2(1 + gamma), bits per complex symbol."""
    arr = check_snr(gamma)
    out = np.log1p(arr) * LOG2E
    return float(out) if out.ndim == 0 else out


def pam_mmse(gamma, constellation):
    """Normalised MMSE of a uniform PAM symbol observed in Gaussian noise.

    Returns the expected posterior variance divided by ``sigma_x2``, a value
    in (0, 1] that decreases with ``gamma`` (it underflows to 0 once the
    symbol-error events fall below double precision).  Its derivative relation to the
    capacity is ``dC/dgamma = log2(e) * pam_mmse(gamma)`` (bits per complex
    symbol).
    """
    const = as_constellation(constellation)
    g = float(check_snr(gamma, strict=True))
    return _refine(_pam_mmse, g, const, 1.0)


def _capacity_fn(constellation):
    if constellation is None or constellation == "gaussian":
        return gaussian_capacity
    const = as_constellation(constellation)
    return lambda g: awgn_qam_capacity(g, const)


def tau(x, constellation):
    """Capacity as a function of ``x = log(1 + gamma)`` (natural log).

    ``constellation`` may also be ``"gaussian"`` (or None) for the
    unconstrained input, for which tau(x) = x * log2(e).
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("x must be finite and >= 0")
    return _capacity_fn(constellation)(np.expm1(arr))


def _check_step(step):
    if not step > 0:
        raise DomainError("step must be > 0")
    # Richardson weights amplify the h/2 difference by 4/3 and the h one by 1/3.
    noise = 4.0 * _CAPACITY_NOISE * (16.0 + 1.0) / 3.0 / step**2
    if noise > _MAX_FD_NOISE:
        raise ConditioningError(
            f"step {step:g} amplifies capacity roundoff to {noise:.2g} > {_MAX_FD_NOISE:g}"
        )


def _richardson(t_m2, t_m1, t_0, t_p1, t_p2, step):
    """Combine tau at x-h, x-h/2, x, x+h/2, x+h into tau''(x)."""
    coarse = (t_p2 - 2.0 * t_0 + t_m2) / step**2
    fine = (t_p1 - 2.0 * t_0 + t_m1) / (step / 2.0) ** 2
    return (4.0 * fine - coarse) / 3.0


def tau_second_derivative(x, constellation, step=DEFAULT_STEP):
    """Second derivative of :func:`tau`, by Richardson-extrapolated central differences.

    Central differences with steps ``step`` and ``step/2`` are combined to
    cancel the leading truncation term.  Requires ``x - 2*step > 0``.
    """
    _check_step(step)
    x = float(x)
    if not (math.isfinite(x) and x - 2.0 * step > 0):
        raise DomainError(f"need x - 2*step > 0, got x={x}, step={step}")
    pts = x + step * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    t = np.asarray(tau(pts, constellation), dtype=float)
    return float(_richardson(*t, step))


def tau_second_derivative_grid(xs, constellation, step=DEFAULT_STEP):
    """Vectorised :func:`tau_second_derivative` over an array of ``x``.

    All stencil points are evaluated in one batch so shared abscissae are
    computed once.
    """
    _check_step(step)
    xs = np.asarray(xs, dtype=float)
    if xs.size and not (np.all(np.isfinite(xs)) and xs.min() - 2.0 * step > 0):
        raise DomainError("need x - 2*step > 0 for every x")
    offs = step * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    pts = np.round(xs[:, None] + offs[None, :], 12)
    t = np.asarray(tau(pts, constellation), dtype=float)
    return _richardson(t[:, 0], t[:, 1], t[:, 2], t[:, 3], t[:, 4], step)


@dataclass(frozen=True)
class ConvexityInterval:
    """A maximal run of ``x`` where tau'' is positive."""

    start: float
    stop: float
    max_value: float
    argmax: float


@dataclass
class ConvexityReport:
    """Positive-curvature intervals plus the grid scan they were found on."""

    intervals: list
    below_resolution: list
    x: np.ndarray = None
    second_derivative: np.ndarray = None

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __getitem__(self, i):
        return self.intervals[i]


def _bisect_boundary(f, lo, hi, f_lo, tol):
    """Sign change of ``f`` in [lo, hi]; ``f_lo`` is the value at ``lo``."""
    lo_pos = f_lo > 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == lo_pos:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def convexity_intervals(constellation, x_min=0.05, x_max=25.0, grid_step=0.01,
                        step=DEFAULT_STEP, xtol=1e-4):
    """Locate every interval of ``[x_min, x_max]`` on which tau'' > 0.

    tau'' is scanned on a uniform grid; each sign change is refined by
    bisection to ``xtol``.  Intervals whose peak lies below the numerical
    noise floor (``RESOLUTION_FLOOR``) are moved to ``below_resolution``.

    Returns
    -------
    ConvexityReport
        Iterable of :class:`ConvexityInterval`; empty when tau'' <= 0 on the
        whole grid.
    """
    if not 0 < x_min < x_max:
        raise DomainError("need 0 < x_min < x_max")
    if not 0 < grid_step <= 0.01:
        raise DomainError("grid_step must be in (0, 0.01]")
    n = int(math.floor((x_max - x_min) / grid_step + 1e-9)) + 1
    xs = x_min + grid_step * np.arange(n)
    d2 = tau_second_derivative_grid(xs, constellation, step)

    def f(x):
        return tau_second_derivative(x, constellation, step)

    intervals, faint = [], []
    positive = d2 > 0
    i = 0
    while i < n:
        if not positive[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and positive[j + 1]:
            j += 1
        start = xs[0] if i == 0 else _bisect_boundary(f, xs[i - 1], xs[i], d2[i - 1], xtol)
        stop = xs[-1] if j == n - 1 else _bisect_boundary(f, xs[j], xs[j + 1], d2[j], xtol)
        k = i + int(np.argmax(d2[i:j + 1]))
        found = ConvexityInterval(float(start), float(stop), float(d2[k]), float(xs[k]))
        (intervals if found.max_value >= RESOLUTION_FLOOR else faint).append(found)
        i = j + 1
    return ConvexityReport(intervals, faint, xs, d2)
