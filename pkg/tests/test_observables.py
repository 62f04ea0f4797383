import warnings

import numpy as np
import pytest
from oracles import kk_real_part, semielliptic_local_g, step

from floquet_dmft.dmft import SolverConfig, solve
from floquet_dmft.floquet import FloquetIndexSet, KeldyshPropagator, dagger, embed_static
from floquet_dmft.ipt import SelfEnergy
from floquet_dmft.lattice import Quadrature
from floquet_dmft.noninteracting import DriveParams
from floquet_dmft.observables import (
    SPECTRAL_MASK,
    SpectralResult,
    distribution,
    gap_edges,
    in_gap_weight,
    kramers_kronig,
    kramers_kronig_residual,
    ldos,
    occupation,
    occupied_spectrum,
    particle_hole_error,
    scattering_rate,
    sum_rule_check,
    weight_balance,
    window_mean,
)

OMEGA_L = 0.5
IDX = FloquetIndexSet(2)
OMEGA = np.linspace(-8.0, 8.0, 4001)


def equilibrium_prop(func, omega=OMEGA, idx=IDX):
    """Half-filled equilibrium propagator from a scalar retarded function."""
    r = embed_static(func, omega, idx, OMEGA_L)
    k = embed_static(lambda x: 2j * np.imag(func(x)) * (1.0 - 2.0 * step(x)), omega, idx, OMEGA_L)
    return KeldyshPropagator(r, dagger(r), k)


def band(x, eta=0.02):
    return semielliptic_local_g(x + 1j * eta)


@pytest.fixture(scope="module")
def metal():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return solve(SolverConfig(U=1.0, E=0.0, T=0.0, n_max=1, n_omega=1024))


# LDOS and distribution


def test_ldos_of_free_band():
    g = equilibrium_prop(band)
    a = ldos(g)
    assert np.max(np.abs(a - (-np.imag(band(OMEGA)) / np.pi))) < 1e-15
    # diagonal data: summing all indices adds the shifted replicas
    full = ldos(g, full=True)
    replicas = sum(-np.imag(band(OMEGA - m * OMEGA_L)) / np.pi for m in IDX.modes)
    assert np.max(np.abs(full - replicas)) < 1e-12


def test_distribution_is_step_in_equilibrium():
    f, valid = distribution(equilibrium_prop(band))
    assert valid.all()
    ref = step(OMEGA)
    assert np.max(np.abs(f - ref)) < 1e-12


def test_distribution_masks_gaps():
    gapped = lambda x: 0.5 * (band(x - 2.0, 1e-9) + band(x + 2.0, 1e-9))
    g = equilibrium_prop(gapped)
    f, valid = distribution(g)
    im = np.abs(np.imag(gapped(OMEGA)))
    assert np.array_equal(valid, im >= SPECTRAL_MASK)
    assert not valid[np.abs(OMEGA) < 0.9].any()
    assert np.isnan(f[~valid]).all() and np.isfinite(f[valid]).all()


def test_occupied_spectrum_equals_f_times_a():
    g = equilibrium_prop(band)
    f, _ = distribution(g)
    a00 = -np.imag(g.retarded[:, 2, 2]) / np.pi
    assert np.max(np.abs(occupied_spectrum(g) - f * a00)) < 1e-14


def test_occupation_half_filling():
    g = equilibrium_prop(band)
    assert occupation(g, OMEGA) == pytest.approx(0.5, abs=1e-3)
    below, above = weight_balance(g, OMEGA)
    assert above == 0.0
    # tail beyond -8 (η/8π) plus half the grid cell at ω = 0, which neither side owns
    assert below == pytest.approx(0.5, abs=3e-3)


def test_scattering_rate():
    r = embed_static(lambda x: -0.1j * x * x, OMEGA, IDX, OMEGA_L)
    sigma = SelfEnergy(r, dagger(r), np.zeros_like(r))
    assert np.allclose(scattering_rate(sigma), 0.2 * OMEGA**2)


# sum rule


def test_sum_rule_of_free_band():
    rep = sum_rule_check(equilibrium_prop(band), OMEGA)
    # Lorentzian tails beyond ±8 carry about 2η/(8π)
    assert rep.residual < 2e-3
    assert rep.per_mode[2] == pytest.approx(rep.value)
    assert rep.truncation is None and rep.validity == rep.residual


def test_sum_rule_adds_truncation_diagnostic():
    g = equilibrium_prop(band)
    p = DriveParams(1.0, 2.0, 0.1, 0.01)
    rep = sum_rule_check(g, OMEGA, p, FloquetIndexSet(10), Quadrature.build(n_eps=32))
    assert rep.truncation > 0.1
    assert rep.validity == rep.truncation
    d = rep.as_dict()
    assert d["validity_residual"] == rep.truncation and len(d["per_mode"]) == IDX.dim


# Kramers-Kronig


def test_kramers_kronig_semielliptic():
    w = np.linspace(-8.0, 8.0, 8001)
    g = band(w, 0.05)
    rec = kramers_kronig(w, g.imag)
    inner = np.abs(w) < 4
    # the missing 1/ω tail beyond the grid shifts Re G by about η/(π·8) near the centre
    assert np.max(np.abs(rec[inner] - g.real[inner])) < 2e-3
    assert kramers_kronig_residual(w, g) < 2e-2


def test_kramers_kronig_against_fft_hilbert():
    w = np.linspace(-8.0, 8.0, 2001)
    im = np.imag(band(w, 0.1))
    assert np.max(np.abs(kramers_kronig(w, im) - kk_real_part(im, pad=64))) < 1e-4


# particle-hole measure


def test_particle_hole_error_cases():
    g = equilibrium_prop(band)
    assert particle_hole_error(g.retarded) < 1e-13
    assert particle_hole_error(g.keldysh, keldysh=True) < 1e-13
    shifted = equilibrium_prop(lambda x: band(x - 0.2))
    assert particle_hole_error(shifted.retarded) > 0.1


# window helpers


def test_window_helpers():
    w = np.linspace(-3, 3, 601)
    curve = np.where(np.abs(w) > 1.0, 1.0, 0.0)
    assert in_gap_weight(w, curve) == 0.0
    assert in_gap_weight(w, curve + 0.1, half_width=0.5) == pytest.approx(0.1)
    lo, hi = gap_edges(w, curve)
    assert lo == pytest.approx(-1.01) and hi == pytest.approx(1.01)
    assert np.isnan(gap_edges(w, np.where(w < 0, 1.0, 0.0))[1])
    vals = w.copy()
    vals[w > 2] = np.nan
    assert window_mean(w, vals, 1.0, 3.0) == pytest.approx(1.5)
    assert window_mean(w, vals, 1.0, 3.0, mask=w < 1.5) == pytest.approx(1.245)
    assert np.isnan(window_mean(w, vals, 2.5, 3.0))


# solved equilibrium metal


def test_metal_properties(metal):
    w = metal.grid.omega
    a = ldos(metal.g_loc)
    assert np.max(np.abs(a - a[::-1])) < 1e-3
    f, valid = distribution(metal.g_loc)
    both = valid & valid[::-1]
    assert np.max(np.abs(f + f[::-1] - 1.0)[both]) < 2e-2
    assert np.nanmin(f) > -0.05 and np.nanmax(f) < 1.05
    assert occupation(metal.g_loc, w) == pytest.approx(0.5, rel=0.02)
    assert kramers_kronig_residual(w, metal.g_loc.retarded[:, 1, 1]) < 2e-2


def test_metal_scattering_rate_is_quadratic(metal):
    w = metal.grid.omega
    rate = scattering_rate(metal.sigma)
    assert rate.min() > -1e-8
    sel = (np.abs(w) > 0.05) & (np.abs(w) < 0.3)
    slope = np.polyfit(np.log(np.abs(w[sel])), np.log(rate[sel]), 1)[0]
    assert abs(slope - 2.0) < 0.3


def test_spectral_result(metal):
    spec = SpectralResult.from_solution(metal)
    assert np.array_equal(spec.omega, metal.grid.omega)
    assert np.array_equal(spec.ldos_row0, ldos(metal.g_loc))
    assert spec.sum_rule.residual < 0.02
    assert spec.sum_rule.truncation == 0.0
    assert spec.occupation == pytest.approx(0.5, rel=0.02)
