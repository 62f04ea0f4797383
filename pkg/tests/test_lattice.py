import numpy as np
import pytest
from oracles import cubic_dos_histogram, semielliptic_local_g

from floquet_dmft.floquet import ConfigurationError
from floquet_dmft.lattice import BandModel, Quadrature, band_integrate, coupling_amplitude, dos


def test_semielliptic_dos_values():
    assert dos(0.0) == pytest.approx(2.0 / np.pi, abs=1e-15)
    assert dos(1.0) == 0.0 and dos(-1.0) == 0.0
    assert dos(1.5) == 0.0
    e = np.linspace(-1, 1, 11)
    assert np.allclose(dos(e), dos(-e))


def test_cubic_dos_matches_momentum_histogram():
    band = BandModel("cubic3d")
    centres, hist = cubic_dos_histogram()
    mid = np.abs(centres) < 0.8
    # histogram noise and bin averaging near the van Hove kinks limit agreement
    assert np.max(np.abs(band.dos(centres[mid]) - hist[mid])) < 0.03
    assert band.dos(0.0) == pytest.approx(hist[50], rel=0.02)


@pytest.mark.parametrize("kind", ["semielliptic", "cubic3d"])
def test_dos_normalized_and_symmetric(kind):
    band = BandModel(kind)
    q = Quadrature.build(band, 64)
    assert abs(q.weights.sum() - 1.0) < 1e-6
    assert abs(q.integrate(lambda e: e)) < 1e-12
    e = np.linspace(-1.2, 1.2, 97)
    assert np.all(band.dos(e) >= 0)
    assert np.allclose(band.dos(e), band.dos(-e), atol=1e-12)


@pytest.mark.parametrize(
    "eps,E,T,expected", [(0.3, 1.0, 0.0, 1.0), (0.5, 0.0, 2.0, 1.0), (-1.0, 1.0, 2.0, -1.0)]
)
def test_coupling_amplitude(eps, E, T, expected):
    assert coupling_amplitude(eps, E, T) == pytest.approx(expected, abs=1e-15)


def test_band_integrate_moments():
    eye = np.eye(3)
    assert np.allclose(band_integrate(lambda e: eye), eye, atol=1e-12)
    assert np.allclose(band_integrate(lambda e: e * eye), 0.0, atol=1e-12)
    assert np.allclose(band_integrate(lambda e: e * e * eye), 0.25 * eye, atol=1e-12)


def test_second_moment_against_fine_midpoint_rule():
    n = 200000
    theta = (np.arange(n) + 0.5) * np.pi / n
    e = -np.cos(theta)
    oracle = np.sum(e**2 * (2 / np.pi) * np.sin(theta) ** 2) * np.pi / n
    assert abs(band_integrate(lambda x: x * x) - oracle) < 1e-8


@pytest.mark.parametrize("n_eps", [16, 32, 64, 128])
def test_quadrature_invariants_at_every_size(n_eps):
    q = Quadrature.build(n_eps=n_eps)
    assert abs(q.weights.sum() - 1.0) < 1e-6
    assert abs(q.integrate(lambda e: e**3)) < 1e-12


def test_doubling_nodes_converges_smooth_integrand():
    f = lambda e: np.exp(0.7 * e) * np.cos(2 * e)
    a = Quadrature.build(n_eps=64).integrate(f)
    b = Quadrature.build(n_eps=128).integrate(f)
    assert abs(a - b) < 1e-6


def test_quadrature_rejects_tiny_sizes():
    with pytest.raises(ConfigurationError):
        Quadrature.build(n_eps=1)


def test_subtracted_hilbert_matches_closed_form():
    q = Quadrature.build(n_eps=64)
    w = np.linspace(-3.0, 3.0, 601)
    for eta in (0.1, 0.01, 0.002):
        z = w + 1j * eta
        exact = semielliptic_local_g(z)
        assert np.max(np.abs(q.hilbert(z) - exact)) < 1e-3
    # the plain node sum cannot resolve a narrow Lorentzian
    z = w + 0.01j
    assert np.max(np.abs(q.resolvent_sum(z) - semielliptic_local_g(z))) > 0.1


def test_hilbert_pair_matches_partial_fractions():
    # the shared expansion point is meant for close poles
    q = Quadrature.build(n_eps=64)
    a = np.array([0.3 + 0.02j, -0.5 + 0.01j, 0.95 + 0.005j, 2.0 + 0.01j])
    b = np.array([0.32 - 0.01j, -0.49 - 0.02j, 0.96 - 0.01j, 1.98 - 0.02j])
    exact = (semielliptic_local_g(b) - semielliptic_local_g(a)) / (a - b)
    assert np.max(np.abs(q.hilbert_pair(a, b) - exact) / np.abs(exact)) < 1e-3
    # coincident poles: derivative limit
    h = 1e-6
    z = np.array([0.2 + 0.1j])
    deriv = -(semielliptic_local_g(z + h) - semielliptic_local_g(z - h)) / (2 * h)
    assert np.max(np.abs(q.hilbert_pair(z, z) - deriv)) < 1e-3


def test_inverse_resolvent_modes_agree_far_from_band():
    q = Quadrature.build(n_eps=64)
    mu = np.array([0.01, 0.1 + 0.05j, 0.2 - 0.02j, 0.0])
    assert np.allclose(q.inverse_resolvent(mu, subtracted=True), q.inverse_resolvent(mu, subtracted=False),
                       atol=1e-12)


def test_inverse_resolvent_pair_is_hermitian_positive():
    rng = np.random.default_rng(1)
    q = Quadrature.build(n_eps=64)
    lam = rng.uniform(-1.5, 1.5, 6) + 1j * rng.uniform(0.005, 0.3, 6)
    mu = 1.0 / lam
    for sub in (True, False):
        h = q.inverse_resolvent_pair(mu, subtracted=sub)
        assert np.allclose(h, h.conj().T, atol=1e-10)
        assert np.min(np.linalg.eigvalsh(0.5 * (h + h.conj().T))) > -1e-8


def test_dos_table_file(tmp_path):
    e = np.linspace(-1, 1, 401)
    path = tmp_path / "dos.txt"
    np.savetxt(path, np.column_stack([e, 3.0 * (1 - e * e)]), header="eps dos")
    band = BandModel("table", table_path=str(path))
    assert band.dos(0.0) == pytest.approx(0.75, rel=1e-4)
    q = Quadrature.build(band, 64)
    assert abs(q.weights.sum() - 1.0) < 1e-12


def test_dos_table_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    np.savetxt(bad, np.array([[0.0, 1.0], [-1.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        BandModel("table", table_path=str(bad))
    with pytest.raises(ConfigurationError):
        BandModel("table")
    with pytest.raises(ConfigurationError):
        BandModel("square")
