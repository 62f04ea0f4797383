import numpy as np
import pytest
from oracles import bessel_series
from scipy import special

from floquet_dmft.floquet import ConfigurationError, FloquetIndexSet, FrequencyGrid, dagger, embed_static
from floquet_dmft.lattice import Quadrature
from floquet_dmft.noninteracting import (
    BesselDomainError,
    DriveParams,
    bessel_j,
    g0_inverse_tridiagonal,
    g0_keldysh,
    g0_retarded_bessel,
    local_g0_retarded,
    truncated_closure,
    truncation_residual,
)

IDX = FloquetIndexSet(10)
DRIVE = DriveParams(E=1.0, T=2.0, omega_l=0.7, eta=0.01)


# Bessel functions


def test_bessel_trivial_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(-3, 0.0) == 0.0


def test_bessel_power_series_oracle():
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976866, abs=1e-10)
    for n in (-7, -2, 0, 1, 3, 10):
        for x in (0.4, 1.0, 2.5, 6.0, -3.3):
            assert abs(bessel_j(n, x) - bessel_series(n, x)) < 1e-12


def test_bessel_against_scipy_on_sanctioned_range():
    orders = np.arange(-164, 165)
    for x in (0.01, 0.7, 5.0, 19.3, 37.0, 50.0, -12.0):
        ours = bessel_j(orders, x)
        assert np.max(np.abs(ours - special.jv(orders, x))) < 1e-12


def test_bessel_closure():
    rho = np.arange(-40, 41)
    assert abs(np.sum(bessel_j(rho, 2.0) ** 2) - 1.0) < 1e-12


def test_bessel_domain_error():
    with pytest.raises(BesselDomainError):
        bessel_j(165, 1.0)
    with pytest.raises(BesselDomainError):
        bessel_j(1.5, 1.0)


def test_drive_params_validation():
    with pytest.raises(ConfigurationError):
        DriveParams(omega_l=0.0)
    with pytest.raises(ConfigurationError):
        DriveParams(eta=0.0)


# retarded propagator


def test_undriven_bessel_form_is_diagonal():
    p = DriveParams(E=0.0, T=0.0, omega_l=0.5, eta=0.01)
    idx = FloquetIndexSet(3)
    omega = np.linspace(-1, 1, 7)
    g = g0_retarded_bessel(0.2, omega, p, idx)
    expected = embed_static(lambda w: 1.0 / (w - 0.2 + 0.01j), omega, idx, 0.5)
    assert np.max(np.abs(g - expected)) < 1e-15


def test_bessel_and_tridiagonal_agree_at_generic_point():
    a = g0_retarded_bessel(0.3, 0.7, DRIVE, IDX)
    b = g0_inverse_tridiagonal(0.3, 0.7, DRIVE, IDX)
    assert np.max(np.abs(a - b)) < 1e-8


def test_bessel_and_tridiagonal_agree_on_lattice():
    sl = slice(IDX.position(-7), IDX.position(7) + 1)
    for eps in np.linspace(-0.95, 0.95, 4):
        omega = np.linspace(-3.0, 3.0, 5)
        a = g0_retarded_bessel(eps, omega, DRIVE, IDX)
        b = g0_inverse_tridiagonal(eps, omega, DRIVE, IDX)
        c = g0_inverse_tridiagonal(eps, omega, DRIVE, IDX, pad=0)
        assert np.max(np.abs(a[:, sl, sl] - b[:, sl, sl])) < 1e-8
        assert np.max(np.abs(a - b)) < 1e-4
        # the strictly truncated matrix errs mostly at the edges
        err = np.abs(a - c).max(axis=0)
        assert err[10, 10] < 0.1 * max(err[0, 0], err[-1, -1])


@pytest.mark.parametrize("seed", range(5))
def test_equivalence_randomized_parameters(seed):
    rng = np.random.default_rng(seed)
    p = DriveParams(E=rng.uniform(-2, 2), T=rng.uniform(0, 4), omega_l=rng.uniform(0.3, 1.5), eta=0.01)
    idx = FloquetIndexSet(8)
    sl = slice(idx.position(-5), idx.position(5) + 1)
    eps = rng.uniform(-1, 1)
    omega = rng.uniform(-4, 4, 6)
    a = g0_retarded_bessel(eps, omega, p, idx)[:, sl, sl]
    b = g0_inverse_tridiagonal(eps, omega, p, idx)[:, sl, sl]
    assert np.max(np.abs(a - b)) < 1e-8


def test_tridiagonal_without_drive_is_diagonal():
    p = DriveParams(E=0.0, T=0.0, omega_l=0.5, eta=0.02)
    idx = FloquetIndexSet(2)
    g = g0_inverse_tridiagonal(-0.4, 0.3, p, idx, pad=0)
    d = 0.3 - idx.modes * 0.5 + 0.4 + 0.02j
    assert np.max(np.abs(g - np.diag(1.0 / d))) < 1e-15


def test_floquet_shift_invariance():
    idx = FloquetIndexSet(6)
    omega = np.linspace(-2, 2, 9)
    for eps in (-0.6, 0.0, 0.8):
        g = g0_inverse_tridiagonal(eps, omega, DRIVE, idx)
        gs = g0_inverse_tridiagonal(eps, omega - DRIVE.omega_l, DRIVE, idx)
        assert np.max(np.abs(g[:, 1:, 1:] - gs[:, :-1, :-1])) < 1e-10


@pytest.mark.parametrize("eps", [-0.5, 0.2, 0.9])
def test_column_sum_normalization(eps):
    p = DriveParams(E=1.0, T=2.0, omega_l=0.5, eta=0.05)
    omega = np.linspace(-15, 15, 6001)
    g = g0_inverse_tridiagonal(eps, omega, p, FloquetIndexSet(4))
    row = -np.imag(g[:, 4, :].sum(axis=-1)) / np.pi
    # Lorentzian tails beyond ±15 carry about 2η/(π·15)
    assert abs(np.trapezoid(row, omega) - 1.0) < 4e-3


@pytest.mark.parametrize("om", [0.25, 0.5, 1.0])
def test_local_spectral_normalization_default_grid(om):
    p = DriveParams(E=1.0, T=2.0, omega_l=om, eta=0.01)
    grid = FrequencyGrid().commensurate(om)
    # any truncated Floquet matrix obeys the row sum rule, so no padding is needed
    g = local_g0_retarded(grid.omega, p, IDX, Quadrature.build(n_eps=32), pad=0)
    row = -np.imag(g[:, 10, :].sum(axis=-1)) / np.pi
    assert abs(np.trapezoid(row, grid.omega) - 1.0) < 0.02


def test_local_forms_agree():
    omega = np.linspace(-2, 2, 21)
    q = Quadrature.build(n_eps=8)
    idx = FloquetIndexSet(4)
    a = local_g0_retarded(omega, DRIVE, idx, q, form="bessel")
    b = local_g0_retarded(omega, DRIVE, idx, q, form="tridiagonal")
    assert np.max(np.abs(a - b)) < 1e-8
    with pytest.raises(ConfigurationError):
        local_g0_retarded(omega, DRIVE, idx, q, form="other")


def test_peak_height_scales_inverse_eta():
    idx = FloquetIndexSet(6)
    omega = np.linspace(-0.2, 0.6, 8001)
    heights = []
    for eta in (0.02, 0.01, 0.005):
        p = DriveParams(E=1.0, T=2.0, omega_l=0.7, eta=eta)
        g = g0_retarded_bessel(0.2, omega, p, idx)
        heights.append(np.max(-np.imag(g[:, 6, 6])) * eta)
    assert max(heights) / min(heights) < 1.05


# Keldysh block


def test_keldysh_static_level_fluctuation_dissipation():
    p = DriveParams(E=0.0, T=0.0, omega_l=0.5, eta=0.01)
    idx = FloquetIndexSet(3)
    omega = np.linspace(-2, 2, 401)
    g = g0_keldysh(0.3, omega, p, idx)
    f = embed_static(lambda w: (w < 0).astype(float), omega, idx, 0.5)
    expected = (g.retarded - g.advanced) @ (np.eye(idx.dim) - 2 * f)
    assert np.max(np.abs(g.keldysh - expected)) < 1e-12


def test_keldysh_driven_anti_hermitian():
    omega = np.linspace(-3, 3, 61)
    g = g0_keldysh(0.1, omega, DRIVE, FloquetIndexSet(5))
    assert np.max(np.abs(g.keldysh + dagger(g.keldysh))) < 1e-10
    assert g.causality_error() == 0.0


def test_level_below_fermi_edge_fully_occupied():
    p = DriveParams(E=0.0, T=0.0, omega_l=0.5, eta=0.01)
    idx = FloquetIndexSet(2)
    omega = np.linspace(-30, 30, 60001)
    g = g0_keldysh(-0.5, omega, p, idx)
    im_r, im_k = g.retarded[:, 2, 2].imag, g.keldysh[:, 2, 2].imag
    f = 0.5 * (1 - im_k / (2 * im_r))
    assert np.allclose(f[omega < 0], 1.0, atol=1e-12)
    occupied = 0.5 * (-im_r / np.pi) + im_k / (4 * np.pi)
    # Lorentzian weight below the Fermi edge, minus the tail beyond the grid
    exact = 0.5 + np.arctan(0.5 / 0.01) / np.pi - 0.01 / (np.pi * 29.5)
    assert abs(np.trapezoid(occupied, omega) - exact) < 1e-5


# truncation diagnostic


def test_truncated_closure_exact_without_drive():
    p = DriveParams(E=0.0, T=0.0, omega_l=0.5)
    assert np.allclose(truncated_closure(np.linspace(-1, 1, 5), p, FloquetIndexSet(2)), 1.0, atol=1e-15)


def test_truncation_residual_envelope():
    q = Quadrature.build(n_eps=64)
    small = [truncation_residual(DriveParams(1.0, 2.0, om), IDX, q) for om in (0.3, 0.5, 0.7, 1.0, 1.3, 1.5)]
    assert max(small) < 0.10
    assert truncation_residual(DriveParams(1.0, 4.0, 0.1), IDX, q) > 0.10
    # decreases with Ω at fixed T
    values = [truncation_residual(DriveParams(1.0, 4.0, om), IDX, q) for om in (0.1, 0.2, 0.3, 0.5)]
    assert all(a >= b for a, b in zip(values, values[1:]))
