"""Keldysh component algebra: contraction products, Dyson inversion, FDR checks.

A two-point function is carried as its retarded/advanced/Keldysh triple.
In the frequency domain A(w) = conj(R(w)) and K(w) is purely imaginary; in
the time domain R is supported on tau >= 0 with the symmetric Heaviside
convention theta(0) = 1/2, so R(0) + A(0) = 0 exactly.

Contraction ("circle") products are pointwise multiplications in the time
domain.  Because a product of band-limited signals spreads spectrally,
:func:`circ_product` evaluates them on an internally widened band and
restricts the result back, which keeps the fluctuation-dissipation residual
of products at the smooth-discretization level.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .bath import BathPropagator, _coth_product, spectral_times_coth
from .errors import (
    DomainMismatch,
    GridMismatch,
    NonHermitianPair,
    SingularPropagator,
)
from .numerics import (
    ComplexSignal,
    FrequencyGrid,
    TimeGrid,
    theta_pair,
    _transform_to_frequency,
    _transform_to_time,
)


@dataclass(eq=False)
class KeldyshGF:
    """Retarded/advanced/Keldysh triple of a steady-state two-point function."""

    grid: object
    R: np.ndarray
    A: np.ndarray
    K: np.ndarray
    domain: str = "frequency"
    beta: float = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=complex)
        self.A = np.asarray(self.A, dtype=complex)
        self.K = np.asarray(self.K, dtype=complex)
        n = self.grid.n_points
        if not (self.R.shape == self.A.shape == self.K.shape == (n,)):
            raise ValueError("component arrays must match the grid size")
        if self.domain not in ("frequency", "time"):
            raise ValueError("domain must be 'frequency' or 'time'")
        expected = FrequencyGrid if self.domain == "frequency" else TimeGrid
        if not isinstance(self.grid, expected):
            raise GridMismatch(f"{self.domain!r} components need a {expected.__name__}")

    def to_time_domain(self):
        """Time-domain triple on the dual lattice.

        R and A are rebuilt from the spectral weight i(R - A)/(2 pi) with
        the symmetric Heaviside masks; this keeps R(tau < 0) = 0 and
        R(0) + A(0) = 0 exact.  K transforms directly.
        """
        if self.domain == "time":
            return self
        tg = self.grid.dual()
        theta_p, theta_m = theta_pair(tg)
        # transform of (R - A) is -i times the commutator integral int rho e^{-iwt}
        comm = _transform_to_time(self.R - self.A, self.grid)
        return type(self)(
            grid=tg,
            R=theta_p * comm,
            A=-theta_m * comm,
            K=_transform_to_time(self.K, self.grid),
            domain="time",
            beta=self.beta,
        )

    def to_frequency_domain(self):
        if self.domain == "frequency":
            return self
        fg = self.grid.dual()
        return type(self)(
            grid=fg,
            R=_transform_to_frequency(self.R, self.grid),
            A=_transform_to_frequency(self.A, self.grid),
            K=_transform_to_frequency(self.K, self.grid),
            domain="frequency",
            beta=self.beta,
        )


class SelfEnergy(KeldyshGF):
    """Self-energy triple; same structure and invariants as KeldyshGF."""


@dataclass(eq=False)
class SpectralFunction:
    """Real spectral weight rho(w); integrates to 1 for a single mode."""

    grid: FrequencyGrid
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.grid.n_points,):
            raise ValueError("rho length must equal grid n_points")

    def integral(self):
        return float(np.sum(self.rho) * self.grid.delta)


@dataclass
class FdrReport:
    """Residuals of K(w) = (R(w) - A(w)) coth(beta w / 2)."""

    l_inf: float
    l2: float
    beta: float
    omega_max: float
    n_points: int
    ratio: np.ndarray = field(repr=False, default=None)

    def to_json_dict(self):
        return {
            "l_inf": self.l_inf,
            "l2": self.l2,
            "beta": self.beta,
            "grid": {"omega_max": self.omega_max, "n": self.n_points},
        }


def _require(domain, *objs):
    g = objs[0].grid
    for o in objs:
        if o.domain != domain:
            raise DomainMismatch(f"operands must be {domain}-domain")
        if not g.compatible(o.grid):
            raise GridMismatch("operands live on different grids")


def from_spectral(rho, tp, grid=None):
    """Thermal Green's function with spectral weight rho.

    Time-domain components are

        R(tau) = -i theta(tau)  int rho(w) e^{-i w tau} dw
        A(tau) = +i theta(-tau) int rho(w) e^{-i w tau} dw
        K(tau) = -i int rho(w) coth(beta w / 2) e^{-i w tau} dw

    and the frequency-domain triple follows by transform; it satisfies the
    fluctuation-dissipation identity exactly (both sides share the same
    w = 0 regularization).
    """
    if isinstance(rho, SpectralFunction):
        grid = rho.grid
        rho_arr = rho.rho
    else:
        if grid is None:
            raise ValueError("grid required when rho is a bare array")
        rho_arr = np.asarray(rho, dtype=float)
    tg = grid.dual()
    theta_p, theta_m = theta_pair(tg)
    c = _transform_to_time(2.0 * np.pi * rho_arr.astype(complex), grid)
    weighted = _coth_product(2.0 * np.pi * rho_arr.astype(complex), grid, tp)
    gf = KeldyshGF(
        grid=tg,
        R=-1j * theta_p * c,
        A=1j * theta_m * c,
        K=-1j * _transform_to_time(weighted, grid),
        domain="time",
        beta=tp.beta,
    )
    return gf.to_frequency_domain()


def to_spectral(g, tol=1e-10):
    """Spectral function rho(w) = i (R(w) - A(w)) / (2 pi) of a triple.

    Raises
    ------
    NonHermitianPair
        If the imaginary part of rho exceeds ``tol`` relative to max|rho|.
    """
    if g.domain != "frequency":
        g = g.to_frequency_domain()
    rho = 1j * (g.R - g.A) / (2.0 * np.pi)
    scale = np.max(np.abs(rho))
    if scale > 0 and np.max(np.abs(rho.imag)) > tol * scale:
        raise NonHermitianPair(
            "advanced component is not the conjugate of the retarded one")
    return SpectralFunction(grid=g.grid, rho=rho.real)


def _components(obj):
    if isinstance(obj, BathPropagator):
        return obj.time_components()
    if isinstance(obj, KeldyshGF):
        if obj.domain != "time":
            raise DomainMismatch("circ products need time-domain operands")
        return obj.R, obj.A, obj.K
    raise TypeError(f"unsupported operand {type(obj).__name__}")


def circ_two(d, g):
    """Two-factor contraction product, pointwise in the time domain:

        S_K = i (d_K g_K + d_R g_R + d_A g_A)
        S_R = i (d_K g_R + d_R g_K)
        S_A = i (d_K g_A + d_A g_K)

    ``d`` may be a BathPropagator or a time-domain KeldyshGF; ``g`` is a
    time-domain KeldyshGF on the same lattice.
    """
    if isinstance(d, BathPropagator):
        tg = d.grid.dual()
        if not (isinstance(g.grid, TimeGrid) and tg.compatible(g.grid)):
            raise GridMismatch("bath and Green's function lattices differ")
        if g.domain != "time":
            raise DomainMismatch("circ products need time-domain operands")
    else:
        _require("time", d, g)
    d_r, d_a, d_k = _components(d)
    g_r, g_a, g_k = g.R, g.A, g.K
    beta = g.beta
    if beta is None and isinstance(d, BathPropagator):
        beta = d.thermal.beta
    sig_k = 1j * (d_k * g_k + d_r * g_r + d_a * g_a)
    # tau = 0: R*R + A*A is continuous there while the masks square to 1/4;
    # the correct midpoint sample doubles those two contributions
    i0 = g.grid.n_points // 2
    sig_k[i0] = 1j * (d_k[i0] * g_k[i0]
                      + 2.0 * d_r[i0] * g_r[i0] + 2.0 * d_a[i0] * g_a[i0])
    return SelfEnergy(
        grid=g.grid,
        K=sig_k,
        R=1j * (d_k * g_r + d_r * g_k),
        A=1j * (d_k * g_a + d_a * g_k),
        domain="time",
        beta=beta,
    )


def circ_multi(factors, ring_factors=()):
    """General contraction product of l time-domain factors.

    Each term places i*K on a subset T of the factor lines and i*R (or
    i*A, the two fillings summed for the Keldysh component) on the rest,
    with an overall -i and the product of the ring scalars:

        S_K : |T| = l (mod 2), both R- and A-fillings of the complement
        S_R : |T| = l - 1 (mod 2), R-filling
        S_A : |T| = l - 1 (mod 2), A-filling

    The parity is anchored by the single-factor case, which reduces to the
    identity (S_R = R, S_A = A, S_K = K).  For one factor of each kind the
    two-factor rule of :func:`circ_two` is recovered.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    _require("time", *factors)
    n = factors[0].grid.n_points
    ell = len(factors)
    ring = complex(np.prod([complex(r) for r in ring_factors])) if ring_factors else 1.0

    ik = [1j * f.K for f in factors]
    ir = [1j * f.R for f in factors]
    ia = [1j * f.A for f in factors]
    # tau = 0 midpoint sampling: retarded (advanced) components approach
    # twice their stored half-jump sample from tau > 0 (tau < 0)
    i0 = factors[0].grid.n_points // 2
    ik0 = [x[i0] for x in ik]
    irp = [2.0 * x[i0] for x in ir]
    iam = [2.0 * x[i0] for x in ia]

    def filled(subset, filling):
        term = np.ones(n, dtype=complex)
        for mu in subset:
            term = term * ik[mu]
        for nu in range(ell):
            if nu not in subset:
                term = term * filling[nu]
        return term

    def filled_center(subset, filling):
        term = 1.0 + 0.0j
        for mu in subset:
            term *= ik0[mu]
        for nu in range(ell):
            if nu not in subset:
                term *= filling[nu]
        return term

    sig_k = np.zeros(n, dtype=complex)
    sig_r = np.zeros(n, dtype=complex)
    sig_a = np.zeros(n, dtype=complex)
    k0 = r0 = a0 = 0.0 + 0.0j
    indices = range(ell)
    for size in range(ell + 1):
        for subset in combinations(indices, size):
            subset = set(subset)
            if size % 2 == ell % 2:
                if size == ell:
                    sig_k += filled(subset, ir)  # complement empty: count once
                else:
                    sig_k += filled(subset, ir) + filled(subset, ia)
                k0 += 0.5 * (filled_center(subset, irp)
                             + filled_center(subset, iam))
            if size % 2 == (ell - 1) % 2:
                sig_r += filled(subset, ir)
                sig_a += filled(subset, ia)
                r0 += 0.5 * filled_center(subset, irp)
                a0 += 0.5 * filled_center(subset, iam)
    sig_k[i0] = k0
    sig_r[i0] = r0
    sig_a[i0] = a0

    beta = next((f.beta for f in factors if f.beta is not None), None)
    return SelfEnergy(
        grid=factors[0].grid,
        K=-1j * ring * sig_k,
        R=-1j * ring * sig_r,
        A=-1j * ring * sig_a,
        domain="time",
        beta=beta,
    )


def widened_grid(grid, factor):
    """Frequency grid with the same spacing and `factor` times the band."""
    return FrequencyGrid(omega_max=grid.omega_max * factor,
                         n_points=grid.n_points * factor)


def embed(g, grid_wide):
    """Zero-extend a frequency-domain KeldyshGF onto a wider band."""
    if g.domain != "frequency":
        raise DomainMismatch("embed expects a frequency-domain triple")
    base = g.grid
    if not np.isclose(grid_wide.delta, base.delta, rtol=1e-12):
        raise GridMismatch("wide grid must preserve the frequency spacing")
    lo = grid_wide.n_points // 2 - base.n_points // 2
    hi = lo + base.n_points
    out = {}
    for name in ("R", "A", "K"):
        arr = np.zeros(grid_wide.n_points, dtype=complex)
        arr[lo:hi] = getattr(g, name)
        out[name] = arr
    return type(g)(grid=grid_wide, domain="frequency", beta=g.beta, **out)


def restrict(g, grid_base):
    """Inverse of :func:`embed`: crop a frequency-domain triple to a band."""
    if g.domain != "frequency":
        raise DomainMismatch("restrict expects a frequency-domain triple")
    lo = g.grid.n_points // 2 - grid_base.n_points // 2
    hi = lo + grid_base.n_points
    return type(g)(
        grid=grid_base,
        R=g.R[lo:hi].copy(),
        A=g.A[lo:hi].copy(),
        K=g.K[lo:hi].copy(),
        domain="frequency",
        beta=g.beta,
    )


def circ_product(factors, ring_factors=(), pad=None):
    """Anti-aliased contraction product, returned in the frequency domain.

    Frequency-domain factors (KeldyshGF) and BathPropagator factors are
    evaluated on a band widened by ``pad`` (default: the smallest power of
    two >= the factor count), multiplied pointwise in time, transformed
    back and restricted to the original band.  The widened band holds the
    full spectral support of the product, so no wrap-around contaminates
    the returned window.
    """
    factors = list(factors)
    base = None
    for f in factors:
        g = f.grid if not isinstance(f, BathPropagator) else f.grid
        base = g if base is None else base
        if not base.compatible(g):
            raise GridMismatch("factors live on different grids")
    if pad is None:
        pad = 1
        while pad < max(2, len(factors)):
            pad *= 2
    wide = widened_grid(base, pad)
    prepared = []
    for f in factors:
        if isinstance(f, BathPropagator):
            prepared.append(BathPropagator(j=f.j, thermal=f.thermal, grid=wide,
                                           coupling_norm=f.coupling_norm))
        else:
            if f.domain != "frequency":
                raise DomainMismatch("circ_product expects frequency-domain factors")
            prepared.append(embed(f, wide).to_time_domain())
    if len(prepared) == 2 and isinstance(prepared[0], BathPropagator):
        sig = circ_two(prepared[0], prepared[1])
    else:
        prepared = [
            p if isinstance(p, KeldyshGF) else _bath_as_gf(p) for p in prepared
        ]
        sig = circ_multi(prepared, ring_factors=ring_factors)
    return restrict(sig.to_frequency_domain(), base)


def _bath_as_gf(d):
    r, a, k = d.time_components()
    return KeldyshGF(grid=d.grid.dual(), R=r, A=a, K=k, domain="time",
                     beta=d.thermal.beta)


def dyson(g1, sigma):
    """Resolvent update G = (g1^{-1} - Sigma)^{-1} in the frequency domain.

    The Keldysh component uses the total-source form

        G_K = G_R (Sigma_K + g1_R^{-1} g1_K g1_A^{-1}) G_A

    which reduces to G_K = G_R Sigma_K G_A when g1 carries no Keldysh
    source and threads a thermal g1 through repeated updates.

    Raises
    ------
    SingularPropagator
        If |g1_R^{-1} - Sigma_R| < 1e-14 anywhere (undamped pole on a node).
    """
    _require("frequency", g1, sigma)
    inv = 1.0 / g1.R - sigma.R
    if np.min(np.abs(inv)) < 1e-14:
        raise SingularPropagator("undamped pole on the frequency grid")
    r = 1.0 / inv
    a = np.conj(r)
    source = sigma.K
    if np.any(g1.K):
        source = source + g1.K / (g1.R * g1.A)
    k = r * source * a
    # the w = 0 bin of any Keldysh component is defined by continuity,
    # consistently with spectral_times_coth and fdr_check
    iz = g1.grid.zero_index
    k[iz] = 0.5 * (k[iz - 1] + k[iz + 1])
    beta = g1.beta if g1.beta is not None else sigma.beta
    return KeldyshGF(grid=g1.grid, R=r, A=a, K=k, domain="frequency", beta=beta)


def linear_self_energy(j, tp, grid, width_c=0.5, scale=1.0):
    """Self-energy of the linear (one-boson-exchange) coupling channel:

        Sigma_R = scale * (Sigma(w) - i c J(w)),  Sigma_A = conj(Sigma_R),
        Sigma_K = scale * (-2 i c) J(w) coth(beta w / 2)

    with Sigma(w) the Lamb shift of J.  The width constant c defaults to
    1/2, matching the half-width J/2 of the weak-coupling resonance
    denominator; c = 1 is selectable.  The identity
    Sigma_K = (Sigma_R - Sigma_A) coth(beta w / 2) holds exactly.
    """
    from .bath import lamb_shift

    jw = j.sample(grid.values)
    sig = lamb_shift(j, grid).samples.real
    r = scale * (sig - 1j * width_c * jw)
    k = (-2j * width_c * scale) * _coth_product(jw.astype(complex), grid, tp)
    return SelfEnergy(grid=grid, R=r, A=np.conj(r), K=k, domain="frequency",
                      beta=tp.beta)


def fdr_check(g, tp):
    """Quantify K(w) - (R(w) - A(w)) coth(beta w / 2) for a triple.

    The w = 0 bin of the product uses the same neighbour-interpolation
    regularization as :func:`bath.spectral_times_coth`.  Residuals are
    reported relative to max|K| (L-inf) and to the l2 norm of K.
    """
    if g.domain != "frequency":
        g = g.to_frequency_domain()
    diff = ComplexSignal(g.grid, g.R - g.A, "frequency")
    expected = spectral_times_coth(diff, tp).samples
    resid = g.K - expected
    scale = float(np.max(np.abs(g.K)))
    norm = float(np.linalg.norm(g.K))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(expected) > 1e-14 * max(scale, 1e-300),
                         g.K / expected, np.nan)
    return FdrReport(
        l_inf=float(np.max(np.abs(resid)) / scale) if scale > 0 else 0.0,
        l2=float(np.linalg.norm(resid) / norm) if norm > 0 else 0.0,
        beta=tp.beta,
        omega_max=g.grid.omega_max,
        n_points=g.grid.n_points,
        ratio=ratio,
    )
