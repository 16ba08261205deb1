"""Bath spectral densities, the Lamb shift, and bath contour propagators.

The spectral density J is odd-extended to the full line, J(-w) = -J(w), so
the Keldysh component -i J(w) coth(beta w / 2) is even and non-negative and
the fluctuation-dissipation identity holds exactly by construction.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch
from .numerics import (
    ComplexSignal,
    FrequencyGrid,
    ThermalParams,
    coth_half,
    pv_on_nodes,
    theta_pair,
    _transform_to_time,
)


@dataclass(frozen=True)
class SpectralDensity:
    """Coupling-weighted density of bath modes J(w).

    Two kinds are supported:

    ``ohmic_lorentzian``
        J(w) = amplitude * (w/cutoff) / (1 + (w/cutoff)^2); the default
        amplitude pi and cutoff 1 give J(w) = pi w / (1 + w^2).
    ``tabulated``
        Linear interpolation of (w, J) samples on w >= 0, zero outside the
        tabulated range, odd-extended to w < 0.
    """

    kind: str
    amplitude: float = math.pi
    cutoff: float = 1.0
    table_omega: tuple = ()
    table_j: tuple = ()

    def __post_init__(self):
        if self.kind not in ("ohmic_lorentzian", "tabulated"):
            raise ValueError(f"unknown spectral density kind {self.kind!r}")
        if self.kind == "ohmic_lorentzian":
            if self.amplitude < 0 or self.cutoff <= 0:
                raise ValueError("amplitude must be >= 0 and cutoff > 0")
        else:
            w = np.asarray(self.table_omega, dtype=float)
            j = np.asarray(self.table_j, dtype=float)
            if w.ndim != 1 or w.shape != j.shape or w.size < 2:
                raise ValueError("tabulated density needs matching 1-d samples")
            if np.any(np.diff(w) <= 0) or w[0] < 0:
                raise ValueError("tabulated frequencies must be increasing and >= 0")
            if np.any(j < 0):
                raise ValueError("J(w) must be >= 0 for w >= 0")

    @classmethod
    def ohmic_lorentzian(cls, amplitude=math.pi, cutoff=1.0):
        return cls(kind="ohmic_lorentzian", amplitude=amplitude, cutoff=cutoff)

    @classmethod
    def tabulated(cls, omega, j):
        omega = np.asarray(omega, dtype=float)
        j = np.asarray(j, dtype=float)
        if omega.size and omega[0] > 0:
            # anchor the origin so the odd extension stays continuous
            omega = np.concatenate(([0.0], omega))
            j = np.concatenate(([0.0], j))
        return cls(kind="tabulated", table_omega=tuple(omega), table_j=tuple(j))

    @classmethod
    def from_file(cls, path):
        """Load a two-column (omega, J) text table; '#' starts a comment."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (omega, J)")
        return cls.tabulated(data[:, 0], data[:, 1])

    def sample(self, omega):
        """J evaluated at omega (odd extension on the full line)."""
        w = np.asarray(omega, dtype=float)
        if self.kind == "ohmic_lorentzian":
            x = w / self.cutoff
            out = self.amplitude * x / (1.0 + x * x)
        else:
            tw = np.asarray(self.table_omega)
            tj = np.asarray(self.table_j)
            out = np.sign(w) * np.interp(np.abs(w), tw, tj, left=0.0, right=0.0)
        if np.isscalar(omega):
            return float(out)
        return out

    def slope_at_zero(self):
        """dJ/dw at w = 0; sets the w -> 0 limit of J(w) coth(beta w/2)."""
        if self.kind == "ohmic_lorentzian":
            return self.amplitude / self.cutoff
        tw = np.asarray(self.table_omega)
        tj = np.asarray(self.table_j)
        nz = np.nonzero(tw > 0)[0]
        if nz.size == 0:
            return 0.0
        k = nz[0]
        return tj[k] / tw[k]

    def scaled(self, factor):
        """New density with J multiplied by factor (coupling rescaling)."""
        if factor < 0:
            raise ValueError("scale factor must be >= 0")
        if self.kind == "ohmic_lorentzian":
            return SpectralDensity.ohmic_lorentzian(self.amplitude * factor, self.cutoff)
        return SpectralDensity(
            kind="tabulated",
            table_omega=self.table_omega,
            table_j=tuple(factor * np.asarray(self.table_j)),
        )


def _ohmic_pv_tail(j, grid, omega):
    """(1/pi^2) int_{|w'| > W} J(w')/(omega - w') dw' in closed form.

    Only the ohmic_lorentzian family has weight beyond the grid band; the
    partial-fraction antiderivative of x/((1+x^2)(y-x)) gives the result.
    """
    wh = np.asarray(omega, dtype=float) / j.cutoff
    bound = grid.omega_max / j.cutoff
    p = wh / (1.0 + wh * wh)
    q = -1.0 / (1.0 + wh * wh)
    return (j.amplitude / np.pi**2) * (
        q * (np.pi - 2.0 * np.arctan(bound)) + p * np.log((bound - wh) / (bound + wh))
    )


@lru_cache(maxsize=32)
def _lamb_shift_cached(j, grid):
    f = j.sample(grid.values) / np.pi
    sigma = pv_on_nodes(f, grid, f_end=j.sample(grid.omega_max) / np.pi)
    # node 0 sits on the band edge itself, outside the PV range
    sigma[0] = sigma[1]
    if j.kind == "ohmic_lorentzian":
        w = grid.values.copy()
        w[0] = w[1]
        sigma = sigma + _ohmic_pv_tail(j, grid, w)
    sigma.flags.writeable = False
    return sigma


def lamb_shift(j, grid):
    """Real frequency shift Sigma(w) induced by the bath.

    Computed as the principal-value integral of J/pi over the odd-extended
    full line: the grid band is handled by the singularity-subtracting
    quadrature, and for the ohmic_lorentzian family the tail beyond the
    band is added in closed form.  For J(w) = pi w/(1 + w^2) this yields
    Sigma(w) = -1/(1 + w^2).

    The node on the band edge -omega_max cannot be evaluated and is set to
    its neighbour's value; the signal metadata records this.
    """
    sigma = _lamb_shift_cached(j, grid)
    return ComplexSignal(
        grid=grid,
        samples=sigma.astype(complex),
        domain="frequency",
        metadata={"edge_bins_clamped": [0]},
    )


def spectral_times_coth(rho, tp):
    """Pointwise rho(w) * coth(beta w / 2) with a regular w = 0 bin.

    The w = 0 node of the product is replaced by the average of its two
    neighbours, which is the continuum limit whenever rho is odd-dominated
    (rho ~ c*w) near zero.  Accepts a ComplexSignal or a bare sample array
    on a frequency grid; returns the same type.
    """
    if isinstance(rho, ComplexSignal):
        samples = _coth_product(rho.samples, rho.grid, tp)
        return ComplexSignal(grid=rho.grid, samples=samples, domain="frequency")
    raise TypeError("spectral_times_coth expects a frequency-domain ComplexSignal")


def _coth_product(samples, grid, tp):
    w = grid.values
    iz = grid.zero_index
    coth = coth_half(tp.beta, np.where(w == 0.0, 1.0, w))
    out = np.asarray(samples, dtype=complex) * coth
    out[iz] = 0.5 * (out[iz - 1] + out[iz + 1])
    return out


@dataclass(eq=False)
class BathPropagator:
    """Contour components of the bath line entering every self-energy.

    Frequency-domain components on the construction grid:

        K(w) = -i * norm * J(w) coth(beta w / 2)
        R(w) = norm * (Sigma(w)/2 - i J(w)/2),   A = conj(R)

    which satisfy K = (R - A) coth(beta w / 2) identically.  The constant
    ``coupling_norm`` absorbs the overall normalization of the mode sum
    behind J; the default 1 corresponds to sum_k |a_k|^2 f(w_k) =
    int_0^inf dw/(2 pi) J(w) f(w).
    """

    j: SpectralDensity
    thermal: ThermalParams
    grid: FrequencyGrid
    coupling_norm: float = 1.0
    K: ComplexSignal = field(init=False)
    R: ComplexSignal = field(init=False)
    A: ComplexSignal = field(init=False)

    def __post_init__(self):
        w = self.grid.values
        jw = self.j.sample(w)
        sigma = _lamb_shift_cached(self.j, self.grid)
        norm = self.coupling_norm
        k = -1j * norm * _coth_product(jw.astype(complex), self.grid, self.thermal)
        r = norm * (0.5 * sigma - 0.5j * jw)
        self.K = ComplexSignal(self.grid, k, "frequency")
        self.R = ComplexSignal(self.grid, r, "frequency")
        self.A = ComplexSignal(self.grid, np.conj(r), "frequency")

    def time_components(self):
        """(R, A, K) sample arrays on the dual time lattice.

        R and A are built from the spectral weight J/(2 pi) with the
        symmetric Heaviside mask, so R(tau < 0) = 0 and R(0) + A(0) = 0
        hold exactly; K transforms directly.
        """
        tg = self.grid.dual()
        theta_p, theta_m = theta_pair(tg)
        commutator = self.coupling_norm * self.j.sample(self.grid.values)
        c = _transform_to_time(commutator.astype(complex), self.grid)
        r = -1j * theta_p * c
        a = 1j * theta_m * c
        k = _transform_to_time(self.K.samples, self.grid)
        return r, a, k


def bath_propagator(j, tp, grid, coupling_norm=1.0):
    """Build the BathPropagator for a spectral density on a grid."""
    if not isinstance(grid, FrequencyGrid):
        raise GridMismatch("bath_propagator needs a FrequencyGrid")
    return BathPropagator(j=j, thermal=tp, grid=grid, coupling_norm=coupling_norm)
