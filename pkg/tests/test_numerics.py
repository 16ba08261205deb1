import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from keldysh_nca.errors import (
    BoseZeroFrequency,
    DomainMismatch,
    OutOfRange,
)
from keldysh_nca.numerics import (
    ComplexSignal,
    FrequencyGrid,
    ThermalParams,
    TimeGrid,
    coth_half,
    occupation,
    principal_value_integral,
    pv_on_nodes,
    theta_pair,
    to_frequency,
    to_time,
)


class TestGrids:
    def test_frequency_grid_basic(self):
        g = FrequencyGrid(20.0, 4096)
        assert g.delta == pytest.approx(40.0 / 4096)
        assert g.values[0] == pytest.approx(-20.0)
        assert g.values[g.zero_index] == 0.0
        assert g.values.size == 4096
        # +omega_max itself is not a node
        assert g.values[-1] == pytest.approx(20.0 - g.delta)

    @pytest.mark.parametrize("n", [0, 10, 100, 24, 8])
    def test_n_points_must_be_power_of_two(self, n):
        with pytest.raises(ValueError):
            FrequencyGrid(10.0, n)

    def test_duality(self):
        g = FrequencyGrid(20.0, 1024)
        t = g.dual()
        assert isinstance(t, TimeGrid)
        assert t.delta * g.delta == pytest.approx(2 * np.pi / 1024, rel=1e-14)
        back = t.dual()
        assert back.compatible(g)
        assert t.values[t.n_points // 2] == 0.0

    def test_signal_length_checked(self):
        g = FrequencyGrid(10.0, 64)
        with pytest.raises(ValueError):
            ComplexSignal(g, np.zeros(65), "frequency")


class TestOccupation:
    def test_fermi_at_zero_energy(self):
        assert occupation(ThermalParams(1.0, +1), 0.0) == pytest.approx(0.5)

    def test_asymptotic_limit(self):
        for eta in (+1, -1):
            assert occupation(ThermalParams(2.0, eta), 400.0) == pytest.approx(0.0, abs=1e-300)

    def test_bose_value_against_mpmath(self):
        # oracle: arbitrary-precision evaluation of 1/(e^{beta w} - 1)
        oracle = float(1 / (mpmath.e - 1))
        assert occupation(ThermalParams(1.0, -1), 1.0) == pytest.approx(oracle, rel=1e-14)

    def test_bose_zero_frequency_raises(self):
        with pytest.raises(BoseZeroFrequency):
            occupation(ThermalParams(1.0, -1), 1e-9)

    def test_detailed_balance_identity(self):
        # n = exp(-beta w) (1 - eta n), the algebraic core of detailed
        # balance; the complement 1 - eta n is evaluated in its stable form
        # (e^x/expm1(x) for bosons, expit(x) for fermions)
        from scipy.special import expit

        rng = np.random.default_rng(7)
        for _ in range(200):
            beta = rng.uniform(0.2, 5.0)
            w = rng.uniform(0.05, 10.0) * rng.choice([-1.0, 1.0])
            eta = int(rng.choice([-1, 1]))
            x = beta * w
            n = occupation(ThermalParams(beta, eta), w)
            complement = np.exp(x) / np.expm1(x) if eta == -1 else expit(x)
            assert n == pytest.approx(np.exp(-x) * complement, rel=1e-12)


class TestCothHalf:
    def test_value_against_mpmath(self):
        oracle = float(mpmath.coth(1))
        assert coth_half(2.0, 1.0) == pytest.approx(oracle, rel=1e-14)

    def test_odd_function(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0.01, 5.0, size=50)
        assert_allclose(coth_half(1.3, x), -coth_half(1.3, -x), rtol=1e-14)

    def test_composition_identity(self):
        # coth(x1 + x2) = (coth x1 coth x2 + 1)/(coth x1 + coth x2)
        rng = np.random.default_rng(11)
        for _ in range(200):
            x1, x2 = rng.uniform(-2.0, 2.0, size=2)
            if abs(x1) < 0.02 or abs(x2) < 0.02 or abs(x1 + x2) < 0.02:
                continue
            lhs = coth_half(2.0, x1 + x2)
            c1, c2 = coth_half(2.0, x1), coth_half(2.0, x2)
            assert lhs == pytest.approx((c1 * c2 + 1) / (c1 + c2), rel=1e-12)

    def test_series_branch_continuity(self):
        # w * coth(beta w / 2) -> 2/beta; at the branch crossover the series
        # value and the direct evaluation agree pointwise
        beta = 1.7
        for bw in [1e-7, 5e-7, 9.9e-7, 1.01e-6, 1e-5]:
            w = bw / beta
            prod = w * coth_half(beta, w)
            assert prod == pytest.approx(2.0 / beta, rel=1e-10)
        for bw in [0.999e-6, 1.001e-6]:
            x = bw / 2.0
            series = 2.0 / bw + bw / 6.0
            direct = 1.0 / np.tanh(x)
            assert series == pytest.approx(direct, rel=1e-12)
            assert coth_half(beta, bw / beta) == pytest.approx(direct, rel=1e-10)

    def test_no_nan(self):
        vals = coth_half(1.0, np.array([-1e3, -1.0, -1e-9, 1e-9, 1.0, 1e3]))
        assert not np.any(np.isnan(vals))


def _midpoint_pv_oracle(func, omega, omega_max, n=500_000):
    """Independent PV quadrature, no singularity subtraction.

    Midpoint pairs placed symmetrically about the pole cancel it exactly
    over [omega - L, omega + L] with L = omega_max - |omega|; the leftover
    strip on one side is pole-free and handled by a plain midpoint rule.
    """
    half = omega_max - abs(omega)
    h = half / n
    x = (np.arange(n) + 0.5) * h
    total = np.sum(func(omega + x) / (-x)) + np.sum(func(omega - x) / x)
    if omega > 0:
        strip = np.linspace(-omega_max, omega - half, 2 * n, endpoint=False)
    else:
        strip = np.linspace(omega + half, omega_max, 2 * n, endpoint=False)
    xs = strip + 0.5 * (strip[1] - strip[0])
    if omega != 0:
        total += np.sum(func(xs) / (omega - xs)) * (strip[1] - strip[0]) / h
    return total * h / np.pi


class TestPrincipalValue:
    def test_zero_integrand(self):
        g = FrequencyGrid(20.0, 1024)
        assert principal_value_integral(np.zeros(1024), g, 0.3) == 0.0

    def test_linearity(self):
        g = FrequencyGrid(15.0, 2048)
        rng = np.random.default_rng(5)
        f1 = rng.normal(size=2048)
        f2 = rng.normal(size=2048)
        a, b = 0.7, -2.3
        for omega in (-3.1, 0.0, 4.4):
            lhs = principal_value_integral(a * f1 + b * f2, g, omega)
            rhs = a * principal_value_integral(f1, g, omega) \
                + b * principal_value_integral(f2, g, omega)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_lorentzian_shape_closed_form(self):
        # partial fractions: P int (w'/(1+w'^2)) / (pi (w - w')) dw' = -1/(1+w^2)
        # on the full line; a wide grid approaches it at O(1/omega_max)
        g = FrequencyGrid(2000.0, 2**18)
        f = g.values / (1.0 + g.values**2)
        for omega in (0.0, 1.0, 2.0):
            got = principal_value_integral(f, g, omega)
            want = -1.0 / (1.0 + omega**2)
            assert got == pytest.approx(want, abs=5e-4)

    def test_against_independent_midpoint_oracle(self):
        # same finite band, different quadrature scheme
        g = FrequencyGrid(20.0, 4096)
        func = lambda x: x / (1.0 + x**2)
        f = func(g.values)
        for omega in (-2.5, 0.0, 1.0, 3.7):
            got = principal_value_integral(f, g, omega)
            want = _midpoint_pv_oracle(func, omega, 20.0)
            assert got == pytest.approx(want, abs=2e-5)

    def test_batch_matches_scalar(self):
        g = FrequencyGrid(10.0, 512)
        rng = np.random.default_rng(2)
        f = rng.normal(size=512)
        batch = pv_on_nodes(f, g)
        for k in (1, 5, 200, 510):
            assert batch[k] == pytest.approx(
                principal_value_integral(f, g, g.values[k]), rel=1e-13)

    def test_out_of_range(self):
        g = FrequencyGrid(10.0, 512)
        with pytest.raises(OutOfRange):
            principal_value_integral(np.ones(512), g, 10.0 - 0.5 * g.delta)


class TestTransforms:
    def test_round_trip(self):
        g = FrequencyGrid(20.0, 4096)
        rng = np.random.default_rng(9)
        s = ComplexSignal(g, rng.normal(size=4096) + 1j * rng.normal(size=4096),
                          "frequency")
        back = to_frequency(to_time(s))
        err = np.max(np.abs(back.samples - s.samples)) / np.max(np.abs(s.samples))
        assert err < 1e-12

    def test_round_trip_from_time(self):
        g = FrequencyGrid(5.0, 256)
        rng = np.random.default_rng(10)
        t = ComplexSignal(g.dual(), rng.normal(size=256) * 1j, "time")
        back = to_time(to_frequency(t))
        assert_allclose(back.samples, t.samples, atol=1e-13)

    def test_delta_spike(self):
        g = FrequencyGrid(20.0, 1024)
        k0 = g.zero_index + 37
        s = np.zeros(1024, dtype=complex)
        s[k0] = 2.0 * np.pi / g.delta
        t = to_time(ComplexSignal(g, s, "frequency"))
        expect = np.exp(-1j * g.values[k0] * t.grid.values)
        assert_allclose(t.samples, expect, atol=1e-12)

    def test_lorentzian_is_causal_decay(self):
        # contour oracle: 1/(w - w0 + i gamma) -> -i theta(tau) e^{-i w0 tau - gamma tau};
        # compared away from the tau = 0 jump, where band truncation rings
        g = FrequencyGrid(200.0, 2**15)
        w = g.values
        t = to_time(ComplexSignal(g, 1.0 / (w - 1.0 + 0.1j), "frequency"))
        tau = t.grid.values
        oracle = -1j * np.exp(-1j * tau - 0.1 * tau)
        sel = (tau >= 0.5) & (tau <= 20.0)
        assert np.max(np.abs(t.samples[sel] - oracle[sel])) < 5e-3
        neg = tau <= -0.5
        assert np.max(np.abs(t.samples[neg])) < 5e-3
        k1 = np.argmin(np.abs(tau - 1.0))
        assert t.samples[k1] == pytest.approx(
            -1j * np.exp(-1j * tau[k1] - 0.1 * tau[k1]), abs=5e-3)

    def test_domain_checked(self):
        g = FrequencyGrid(5.0, 64)
        s = ComplexSignal(g, np.zeros(64), "frequency")
        with pytest.raises(DomainMismatch):
            to_frequency(s)
        t = to_time(s)
        with pytest.raises(DomainMismatch):
            to_time(t)


def test_theta_pair_midpoint():
    g = FrequencyGrid(5.0, 64).dual()
    p, m = theta_pair(g)
    i0 = 32
    assert p[i0] == 0.5 and m[i0] == 0.5
    assert np.all(p[:i0] == 0.0) and np.all(p[i0 + 1:] == 1.0)
    assert np.all(m[:i0] == 1.0) and np.all(m[i0 + 1:] == 0.0)
    assert_allclose(p + m, np.ones(64))
