"""Grids, thermal functions, principal-value quadrature and transforms.

Everything downstream works on a uniform, zero-centered frequency lattice
and its dual time lattice.  The Fourier convention is fixed once here:

    F(omega) = int dtau F(tau) exp(+i omega tau)
    F(tau)   = int domega/(2 pi) F(omega) exp(-i omega tau)

so that 1/(omega - omega0 + i gamma) maps to -i theta(tau) e^{-i omega0 tau
- gamma tau}.  All operations are pure functions of immutable inputs.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BoseZeroFrequency,
    DomainMismatch,
    GridMismatch,
    OutOfRange,
)

_trapz = np.trapezoid if hasattr(np, "trapezoid") else np.trapz

#: |beta*omega| below which coth(beta*omega/2) switches to its Laurent series.
COTH_SERIES_CUTOFF = 1e-6

#: |beta*omega| below which the Bose occupation is considered singular.
BOSE_ZERO_CUTOFF = 1e-8


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency lattice omega_j = -omega_max + j*delta, j = 0..n-1.

    The lattice is symmetric about zero and contains omega = 0 exactly
    (n_points is even); +omega_max itself is not a node.

    Parameters
    ----------
    omega_max : float
        Half-width of the covered band.
    n_points : int
        Number of nodes; a power of two, at least 16.
    """

    omega_max: float
    n_points: int

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if not _is_power_of_two(self.n_points) or self.n_points < 16:
            raise ValueError("n_points must be a power of two, at least 16")

    @property
    def delta(self):
        return 2.0 * self.omega_max / self.n_points

    @cached_property
    def values(self):
        return -self.omega_max + self.delta * np.arange(self.n_points)

    @property
    def zero_index(self):
        return self.n_points // 2

    def dual(self):
        """Time lattice paired with this grid (delta_tau*delta = 2 pi/n)."""
        dtau = np.pi / self.omega_max
        return TimeGrid(tau_max=0.5 * self.n_points * dtau, n_points=self.n_points)

    def compatible(self, other):
        return (
            isinstance(other, FrequencyGrid)
            and other.n_points == self.n_points
            and np.isclose(other.omega_max, self.omega_max, rtol=1e-12, atol=0.0)
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time lattice tau_j = (j - n/2)*delta_tau, dual to a FrequencyGrid."""

    tau_max: float
    n_points: int

    def __post_init__(self):
        if not self.tau_max > 0:
            raise ValueError("tau_max must be positive")
        if not _is_power_of_two(self.n_points) or self.n_points < 16:
            raise ValueError("n_points must be a power of two, at least 16")

    @property
    def delta(self):
        return 2.0 * self.tau_max / self.n_points

    @cached_property
    def values(self):
        return self.delta * (np.arange(self.n_points) - self.n_points // 2)

    def dual(self):
        return FrequencyGrid(omega_max=np.pi / self.delta, n_points=self.n_points)

    def compatible(self, other):
        return (
            isinstance(other, TimeGrid)
            and other.n_points == self.n_points
            and np.isclose(other.tau_max, self.tau_max, rtol=1e-12, atol=0.0)
        )


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature and particle statistics.

    eta = +1 selects fermions, eta = -1 bosons.
    """

    beta: float
    eta: int = -1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.eta not in (+1, -1):
            raise ValueError("eta must be +1 (fermion) or -1 (boson)")


@dataclass(eq=False)
class ComplexSignal:
    """Samples of a complex function on a frequency or time lattice."""

    grid: object
    samples: np.ndarray
    domain: str  # "frequency" or "time"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != (self.grid.n_points,):
            raise ValueError("samples length must equal grid n_points")
        if self.domain not in ("frequency", "time"):
            raise ValueError("domain must be 'frequency' or 'time'")
        expected = FrequencyGrid if self.domain == "frequency" else TimeGrid
        if not isinstance(self.grid, expected):
            raise GridMismatch(f"{self.domain!r} signal needs a {expected.__name__}")


def occupation(tp, omega):
    """Bose/Fermi occupation 1/(exp(beta*omega) + eta).

    Raises
    ------
    BoseZeroFrequency
        For bosons when any |beta*omega| < 1e-8 (the occupation diverges).
    """
    from scipy.special import expit

    x = tp.beta * np.asarray(omega, dtype=float)
    if tp.eta == +1:
        out = expit(-x)
    else:
        if np.any(np.abs(x) < BOSE_ZERO_CUTOFF):
            raise BoseZeroFrequency(
                "Bose occupation requested within 1e-8 of omega = 0")
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(x)
    if np.isscalar(omega):
        return float(out)
    return out


def coth_half(beta, omega):
    """coth(beta*omega/2), series branch 2/(beta*omega) + beta*omega/6 near zero.

    The series branch takes over for |beta*omega| < 1e-6, where it agrees
    with the direct branch to better than 1e-12 relative.  omega = 0 yields
    a signed infinity; callers forming products with a vanishing spectral
    weight should use bath.spectral_times_coth instead.
    """
    x = beta * np.asarray(omega, dtype=float)
    small = np.abs(x) < COTH_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    with np.errstate(divide="ignore"):
        series = 2.0 / x + x / 6.0
        direct = 1.0 / np.tanh(0.5 * safe)
    out = np.where(small, series, direct)
    if np.isscalar(omega):
        return float(out)
    return out


def _closed_trapezoid(integrand, delta, end=None):
    """Trapezoid over [-W, W-delta] plus the closing panel up to +W.

    The lattice stops one spacing short of +W; the missing panel uses the
    supplied end value, or the linear extrapolant 2*f[-1] - f[-2].
    """
    core = _trapz(integrand, dx=delta, axis=-1)
    if end is None:
        end = 2.0 * integrand[..., -1] - integrand[..., -2]
    edge = 0.5 * delta * (integrand[..., -1] + end)
    return core + edge


def principal_value_integral(f, grid, omega, f_end=None):
    """P int dw' f(w')/(pi*(omega - w')) over the grid band [-W, W].

    Uses singularity subtraction: the integrand is rewritten as
    (f(w') - f(omega))/(omega - w') plus the analytic term
    f(omega)*log|(omega + W)/(W - omega)|, which keeps second-order
    accuracy wherever omega falls relative to the nodes.

    Parameters
    ----------
    f : array_like
        Real samples of the integrand numerator on ``grid``.
    grid : FrequencyGrid
    omega : float
        Evaluation point, at least one grid spacing away from +-omega_max.
    f_end : float, optional
        Value of f at +omega_max (not a grid node); linearly extrapolated
        when omitted.

    Raises
    ------
    OutOfRange
        If omega is within one grid spacing of +-omega_max.
    """
    w = grid.values
    d = grid.delta
    if abs(omega) > grid.omega_max - d * (1.0 - 1e-9):
        raise OutOfRange(
            f"omega = {omega} within one spacing of the band edge +-{grid.omega_max}")
    f = np.asarray(f, dtype=float)
    f_at = float(np.interp(omega, w, f))
    diff = omega - w
    near = np.abs(diff) < 1e-8 * d
    integrand = np.zeros_like(f)
    integrand[~near] = (f[~near] - f_at) / diff[~near]
    if near.any():
        j = int(np.nonzero(near)[0][0])
        upper = f_end if (j == grid.n_points - 1 and f_end is not None) \
            else f[min(j + 1, grid.n_points - 1)]
        integrand[near] = -(upper - f[j - 1]) / (2.0 * d)
    end = None if f_end is None else (f_end - f_at) / (omega - grid.omega_max)
    core = _closed_trapezoid(integrand, d, end=end)
    log_term = f_at * np.log((grid.omega_max + omega) / (grid.omega_max - omega))
    return (core + log_term) / np.pi


def pv_on_nodes(f, grid, block=512, f_end=None):
    """principal_value_integral evaluated at every admissible node at once.

    Returns an array over the full grid; node 0 sits on the band edge -W
    itself and is NaN, outside the operation's admissible range.
    """
    w = grid.values
    d = grid.delta
    n = grid.n_points
    f = np.asarray(f, dtype=float)
    deriv = np.gradient(f, d)
    if f_end is not None:
        deriv[-1] = (f_end - f[-2]) / (2.0 * d)
    out = np.full(n, np.nan)
    log_all = np.empty(n)
    log_all[1:] = np.log((grid.omega_max + w[1:]) / (grid.omega_max - w[1:]))
    for start in range(1, n, block):
        idx = np.arange(start, min(start + block, n))
        diff = w[idx][:, None] - w[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            m = (f[None, :] - f[idx][:, None]) / diff
        m[np.arange(idx.size), idx] = -deriv[idx]
        end = None
        if f_end is not None:
            end = (f_end - f[idx]) / (w[idx] - grid.omega_max)
        core = _closed_trapezoid(m, d, end=end)
        out[idx] = (core + f[idx] * log_all[idx]) / np.pi
    return out


def _transform_to_time(samples, grid):
    shifted = np.fft.ifftshift(np.asarray(samples, dtype=complex))
    t = np.fft.fftshift(np.fft.fft(shifted))
    return t * (grid.delta / (2.0 * np.pi))


def _transform_to_frequency(samples, time_grid):
    shifted = np.fft.ifftshift(np.asarray(samples, dtype=complex))
    s = np.fft.fftshift(np.fft.ifft(shifted))
    return s * (time_grid.delta * time_grid.n_points)


def to_time(signal):
    """Discrete realization of F(tau) = int domega/(2 pi) F(omega) e^{-i omega tau}.

    A single-bin spike of weight 2 pi/delta at omega0 maps to e^{-i omega0 tau};
    the round trip through to_frequency is exact to rounding.
    """
    if signal.domain != "frequency":
        raise DomainMismatch("to_time expects a frequency-domain signal")
    return ComplexSignal(
        grid=signal.grid.dual(),
        samples=_transform_to_time(signal.samples, signal.grid),
        domain="time",
    )


def to_frequency(signal):
    """Inverse of :func:`to_time`: F(omega) = int dtau F(tau) e^{+i omega tau}."""
    if signal.domain != "time":
        raise DomainMismatch("to_frequency expects a time-domain signal")
    return ComplexSignal(
        grid=signal.grid.dual(),
        samples=_transform_to_frequency(signal.samples, signal.grid),
        domain="frequency",
    )


def theta_symmetric(time_grid):
    """Heaviside mask on the time lattice with theta(0) = 1/2.

    The symmetric midpoint value makes R(0) + A(0) = 0 exact for every
    retarded/advanced pair built from it.
    """
    tau = time_grid.values
    out = np.where(tau > 0, 1.0, 0.0)
    out[tau == 0] = 0.5
    return out


def theta_pair(time_grid):
    """(theta(tau), theta(-tau)) masks, both with the value 1/2 at tau = 0."""
    tau = time_grid.values
    plus = np.where(tau > 0, 1.0, 0.0)
    minus = np.where(tau < 0, 1.0, 0.0)
    plus[tau == 0] = 0.5
    minus[tau == 0] = 0.5
    return plus, minus
