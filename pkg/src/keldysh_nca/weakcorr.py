"""Closed-form steady-state correlators of weakly damped modes and spins.

The lesser/greater pair of a linearly damped mode, and the raising/lowering
pair of a two-level system with a secular bosonic dissipator, are single
frequency integrals over [0, omega_max]:

    C(tau) = int_0^W dW'/(2 pi) S(W') exp(+- i W' tau)

with S a thermally weighted Lorentzian-like spectrum.  The lesser and
greater spectra differ only by the occupation factor, so their pointwise
ratio is exp(-beta W) identically: the detailed-balance (KMS) relation
holds at the integrand level.

When the damping width is narrower than the grid spacing, the quadrature
refines the resonance bin with an arctangent substitution, keeping the
tau = 0 moments accurate for arbitrarily weak coupling.
"""

from dataclasses import dataclass, field

import numpy as np

from .bath import SpectralDensity, lamb_shift
from .errors import GridMismatch
from .numerics import FrequencyGrid, ThermalParams, occupation

_KMS_FLOOR = 1e-14


@dataclass(frozen=True)
class LinearModeModel:
    """Single bosonic or fermionic mode, linearly coupled to a matching bath."""

    omega0: float
    j: SpectralDensity = field(default_factory=SpectralDensity.ohmic_lorentzian)
    tp: ThermalParams = field(default_factory=lambda: ThermalParams(1.0, -1))

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")


@dataclass(frozen=True)
class SpinBosonModel:
    """Two-level splitting with a secular bosonic dissipator.

    The dephasing width is (n(W) + 1/2) J(W); the frequency shift slot is
    the same Lamb shift as the mode's, scaled by ``sigma_scale``.
    """

    omega0: float
    j: SpectralDensity = field(default_factory=SpectralDensity.ohmic_lorentzian)
    tp: ThermalParams = field(default_factory=lambda: ThermalParams(1.0, -1))
    sigma_scale: float = 1.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.tp.eta != -1:
            raise ValueError("the spin couples to a bosonic bath (eta = -1)")


@dataclass(eq=False)
class CorrelatorResult:
    """Spectrum S(W) on W >= 0 and the time series it integrates to."""

    omega: np.ndarray
    spectrum: np.ndarray
    label: str
    phase_sign: int
    grid: FrequencyGrid
    _quad_nodes: np.ndarray = field(repr=False, default=None)
    _quad_weights: np.ndarray = field(repr=False, default=None)
    _quad_values: np.ndarray = field(repr=False, default=None)
    _time_series: np.ndarray = field(repr=False, default=None)

    @property
    def tau(self):
        return self.grid.dual().values

    @property
    def time_series(self):
        if self._time_series is None:
            phase = np.exp(1j * self.phase_sign
                           * np.outer(self.tau, self._quad_nodes))
            self._time_series = phase @ (self._quad_weights * self._quad_values) \
                / (2.0 * np.pi)
        return self._time_series

    def value_at_zero(self):
        """C(0) from the refined quadrature."""
        return float(np.sum(self._quad_weights * self._quad_values)
                     / (2.0 * np.pi))

    def spectrum_integral(self):
        """Plain node sum int dW/(2 pi) S(W) over the stored spectrum."""
        w = np.full(self.omega.size, self.grid.delta)
        w[0] = 0.5 * self.grid.delta
        return float(np.sum(w * self.spectrum) / (2.0 * np.pi))


@dataclass
class KmsReport:
    """Pointwise detailed-balance residual of a lesser/greater pair."""

    l_inf: float
    l2: float
    beta: float

    def to_json_dict(self):
        return {"l_inf": self.l_inf, "l2": self.l2, "beta": self.beta}


def _half_axis(grid):
    return grid.values[grid.zero_index:]


def _numerator(model, tp, j_vals, omega, which):
    """Thermal weight of the spectrum; the W = 0 bin takes its limit value.

    For bosons J(W) n(W) -> J'(0)/beta as W -> 0; the Fermi function is
    regular everywhere.
    """
    out = np.empty_like(j_vals)
    pos = omega > 0
    n_pos = occupation(tp, omega[pos])
    if which in ("lesser", "plus_minus"):
        out[pos] = j_vals[pos] * n_pos
    else:
        out[pos] = (1.0 - tp.eta * n_pos) * j_vals[pos]
    limit = model.j.slope_at_zero() / tp.beta if tp.eta == -1 else 0.0
    out[~pos] = limit
    return out


def _width(model, tp, j_vals, omega):
    """Half-width entering the resonance denominator."""
    if isinstance(model, SpinBosonModel):
        out = np.empty_like(j_vals)
        pos = omega > 0
        out[pos] = (occupation(tp, omega[pos]) + 0.5) * j_vals[pos]
        out[~pos] = model.j.slope_at_zero() / tp.beta
        return out
    return 0.5 * j_vals


def _shift(model, grid):
    sig = lamb_shift(model.j, grid).samples.real[grid.zero_index:]
    if isinstance(model, SpinBosonModel):
        return model.sigma_scale * sig
    return sig


def _resonance(omega, detune, width):
    """Root of the detuning and the local width there, or None."""
    s = np.sign(detune)
    flips = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if flips.size == 0:
        return None
    k = int(flips[0])
    # linear interpolation of the sign change
    t = detune[k] / (detune[k] - detune[k + 1])
    root = omega[k] + t * (omega[k + 1] - omega[k])
    gamma = width[k] + t * (width[k + 1] - width[k])
    return root, abs(gamma), k


def _correlator(model, grid, which, phase_sign):
    tp = model.tp
    omega = _half_axis(grid)
    j_vals = model.j.sample(omega)
    num = _numerator(model, tp, j_vals, omega, which)
    width = _width(model, tp, j_vals, omega)
    detune = omega - model.omega0 - _shift(model, grid)
    denom = detune**2 + width**2
    with np.errstate(divide="ignore", invalid="ignore"):
        spectrum = np.where(denom > 0, num / denom, 0.0)

    d = grid.delta
    weights = np.full(omega.size, d)
    weights[0] = 0.5 * d
    nodes = omega.copy()
    values = spectrum.copy()

    res = _resonance(omega, detune, width)
    if res is not None and res[1] < 5.0 * d and res[1] > 0:
        # sub-bin resonance: replace the bins around the root by an
        # arctangent-substituted panel that resolves the Lorentzian core
        root, gamma, k = res
        lo = max(1, k - 6)
        hi = min(omega.size - 1, k + 8)
        a = omega[lo] - 0.5 * d
        b = omega[hi - 1] + 0.5 * d
        weights[lo:hi] = 0.0
        u = np.linspace(np.arctan((a - root) / gamma),
                        np.arctan((b - root) / gamma), 2001)
        um = 0.5 * (u[1:] + u[:-1])
        du = np.diff(u)
        w_fine = root + gamma * np.tan(um)
        jf = model.j.sample(w_fine)
        numf = _numerator(model, tp, jf, w_fine, which)
        widthf = _width(model, tp, jf, w_fine)
        sig_itp = np.interp(w_fine, omega, detune - omega) + w_fine
        sf = numf / (sig_itp**2 + widthf**2)
        nodes = np.concatenate([nodes, w_fine])
        values = np.concatenate([values, sf])
        weights = np.concatenate([weights, gamma * du / np.cos(um) ** 2])

    return CorrelatorResult(
        omega=omega,
        spectrum=spectrum,
        label=which,
        phase_sign=phase_sign,
        grid=grid,
        _quad_nodes=nodes,
        _quad_weights=weights,
        _quad_values=values,
    )


def mode_correlator(model, grid, which="lesser"):
    """Steady-state mode correlator: 'lesser' (n-weighted) or 'greater'.

    S(W) = F(W) / [(W - omega0 - Sigma(W))^2 + (J(W)/2)^2] with
    F = J n for the lesser and (1 - eta n) J for the greater spectrum;
    both time series carry exp(+i W tau).
    """
    if which not in ("lesser", "greater"):
        raise ValueError("which must be 'lesser' or 'greater'")
    if not isinstance(model, LinearModeModel):
        raise TypeError("mode_correlator expects a LinearModeModel")
    return _correlator(model, grid, which, phase_sign=+1)


def spin_correlator(model, grid, which="plus_minus"):
    """Secular spin-boson correlator: 'plus_minus' or 'minus_plus'.

    The denominator width is (n(W) + 1/2) J(W); the minus_plus series
    carries exp(-i W tau), as the raising operator evolves backwards.
    """
    if which not in ("plus_minus", "minus_plus"):
        raise ValueError("which must be 'plus_minus' or 'minus_plus'")
    if not isinstance(model, SpinBosonModel):
        raise TypeError("spin_correlator expects a SpinBosonModel")
    return _correlator(model, grid, which,
                       phase_sign=+1 if which == "plus_minus" else -1)


def kms_check(lesser, greater, tp):
    """Detailed balance of a spectrum pair: S_<(W) = e^{-beta W} S_>(W).

    The residual is normalized pointwise by max(S_>, floor) with a
    relative floor of 1e-14 * max(S_>), so bins where both spectra vanish
    do not produce 0/0.
    """
    if lesser.omega.shape != greater.omega.shape or not np.allclose(
            lesser.omega, greater.omega):
        raise GridMismatch("correlator pair lives on different grids")
    w = lesser.omega
    fac = np.exp(-tp.beta * w)
    floor = _KMS_FLOOR * float(np.max(greater.spectrum))
    denom = np.maximum(greater.spectrum, floor if floor > 0 else _KMS_FLOOR)
    r = np.abs(lesser.spectrum - fac * greater.spectrum) / denom
    return KmsReport(l_inf=float(np.max(r)),
                     l2=float(np.sqrt(np.mean(r**2))),
                     beta=tp.beta)
