r"""Exact Green's functions of the driven lattice without interaction.

For a band state with energy ε the single-particle level oscillates as
``ε + A(ε) cos(Ω t)`` with ``A(ε) = E + T ε/D``.  Its retarded Floquet
Green's function has two equivalent exact forms:

Bessel sum
    .. math:: G^R_{mn}(ε, ω) = \sum_ρ \frac{J_{ρ-m}(x) J_{ρ-n}(x)}{ω - ρΩ - ε + iη},
              \qquad x = A(ε)/Ω

Tridiagonal inverse
    .. math:: [G^{R,-1}]_{mn} = (ω - mΩ - ε + iη) δ_{mn} - \frac{A}{2}(δ_{m,n+1} + δ_{m,n-1})

Both are truncated by the same rule: Bessel orders whose magnitude is below
:data:`BESSEL_CUTOFF` are dropped.  For the inverse this means the matrix is
built on an enlarged mode set and cropped afterwards; ``pad=0`` instead gives
the strictly truncated matrix the DMFT solver works with.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .floquet import (
    ConfigurationError,
    FloquetIndexSet,
    KeldyshPropagator,
    dagger,
    embed_static,
    invert,
    keldysh_from_dyson,
)
from .lattice import Quadrature, coupling_amplitude

BESSEL_CUTOFF = 1e-12


class BesselDomainError(ValueError):
    """Bessel order outside the sanctioned range."""


@dataclass(frozen=True)
class DriveParams:
    """Drive amplitudes `E`, `T`, frequency `omega_l` and bath broadening `eta`."""

    E: float = 1.0
    T: float = 2.0
    omega_l: float = 0.5
    eta: float = 0.01
    half_bandwidth: float = 1.0

    def __post_init__(self):
        if not self.omega_l > 0:
            raise ConfigurationError(f"omega_l must be > 0, got {self.omega_l!r}")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be > 0, got {self.eta!r}")

    def amplitude(self, eps):
        return coupling_amplitude(eps, self.E, self.T, self.half_bandwidth)

    def argument(self, eps):
        """Bessel argument ``A(ε)/Ω``."""
        return self.amplitude(eps) / self.omega_l


def step_distribution(x):
    """Zero-temperature Fermi function with the edge at zero energy."""
    return np.where(np.asarray(x) < 0, 1.0, 0.0)


def _miller_start(k_max, ax):
    n = max(k_max, int(np.ceil(ax)))
    start = n + 32 + int(np.ceil(np.sqrt(60.0 * (n + 1))))
    return start + (start % 2)


def bessel_table(k_max: int, x):
    """``J_k(x)`` for ``k = 0..k_max`` by Miller's downward recurrence.

    The recurrence ``J_{k-1} = (2k/x) J_k - J_{k+1}`` is run from an order
    well above both `k_max` and ``|x|`` and normalized with
    ``J_0 + 2 Σ_k J_{2k} = 1``.

    Returns
    -------
    (k_max + 1,) + x.shape ndarray
    """
    x = np.asarray(x, dtype=float)
    flat = np.abs(x).ravel()
    out = np.zeros((k_max + 1, flat.size))
    zero = flat == 0.0
    out[0, zero] = 1.0
    xs = flat[~zero]
    if xs.size:
        start = _miller_start(k_max, float(xs.max()))
        vals = np.zeros((k_max + 1, xs.size))
        j_next = np.zeros_like(xs)
        j_cur = np.full_like(xs, 1e-300)
        norm = np.zeros_like(xs)
        for k in range(start, 0, -1):
            # j_cur holds J_k, produce J_{k-1}
            j_prev = (2.0 * k / xs) * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            km1 = k - 1
            if km1 <= k_max:
                vals[km1] = j_cur
            if km1 % 2 == 0 and km1 > 0:
                norm += 2.0 * j_cur
            big = np.abs(j_cur) > 1e250
            if np.any(big):
                j_cur[big] *= 1e-250
                j_next[big] *= 1e-250
                norm[big] *= 1e-250
                vals[:, big] *= 1e-250
        norm += j_cur
        out[:, ~zero] = vals / norm
    sign = np.where(x.ravel() < 0, -1.0, 1.0)
    odd = (np.arange(k_max + 1) % 2 == 1)[:, None]
    out = np.where(odd, out * sign, out)
    return out.reshape((k_max + 1,) + x.shape)


def bessel_j(order, x, max_order: int = 164):
    """First-kind Bessel function ``J_order(x)`` for integer orders.

    Parameters
    ----------
    order : int or array of int
    x : float or array
        Broadcast against `order`.
    max_order : int
        Largest admissible ``|order|`` (``10*n_max + 64`` for the default
        ``n_max = 10``).

    Raises
    ------
    BesselDomainError
        If ``|order| > max_order``.
    """
    order = np.asarray(order)
    if np.any(order != np.round(order)):
        raise BesselDomainError("Bessel order must be an integer")
    order = order.astype(int)
    k_max = int(np.max(np.abs(order), initial=0))
    if k_max > max_order:
        raise BesselDomainError(f"|order| = {k_max} exceeds sanctioned range {max_order}")
    order, x = np.broadcast_arrays(order, np.asarray(x, dtype=float))
    table = bessel_table(k_max, x)
    a = np.abs(order)
    val = np.take_along_axis(table, a[None, ...], axis=0)[0]
    return np.where((order < 0) & (a % 2 == 1), -val, val)


def bessel_cutoff_order(x, cutoff: float = BESSEL_CUTOFF) -> int:
    """Smallest ``k`` with ``|J_j(x)| < cutoff`` for all ``|j| >= k``."""
    ax = float(np.max(np.abs(x), initial=0.0))
    k_max = int(np.ceil(ax)) + 80
    table = bessel_table(k_max, ax)
    above = np.nonzero(np.abs(table) >= cutoff)[0]
    if above.size == 0:
        return 0
    return int(above[-1]) + 1


def g0_retarded_bessel(eps, omega, params: DriveParams, idx: FloquetIndexSet):
    """Retarded Floquet Green's function from the Bessel sum.

    Parameters
    ----------
    eps : float
        Band energy.
    omega : float or (n_omega,) array
    params : DriveParams
    idx : FloquetIndexSet

    Returns
    -------
    (..., N, N) complex ndarray, leading shape that of `omega`
    """
    x = float(params.argument(eps))
    modes = idx.modes
    pad = bessel_cutoff_order(x)
    rho = np.arange(-idx.n_max - pad, idx.n_max + pad + 1)
    orders = rho[:, None] - modes[None, :]
    jm = bessel_j(orders, x, max_order=int(np.max(np.abs(orders))))
    omega = np.asarray(omega, dtype=float)
    denom = 1.0 / (omega[..., None] - rho * params.omega_l - eps + 1j * params.eta)
    return np.einsum("...r,rm,rn->...mn", denom, jm, jm)


def inverse_matrix_tridiagonal(eps, omega, params: DriveParams, idx: FloquetIndexSet):
    """``[G_0^R]^{-1}`` on the mode set `idx`; shape ``omega.shape + (N, N)``."""
    omega = np.asarray(omega, dtype=float)
    diag = omega[..., None] - idx.modes * params.omega_l - eps + 1j * params.eta
    out = np.zeros(diag.shape + (idx.dim,), dtype=complex)
    ii = np.arange(idx.dim)
    out[..., ii, ii] = diag
    out -= 0.5 * float(params.amplitude(eps)) * idx.adjacency()
    return out


def auto_pad(eps, params: DriveParams) -> int:
    """Extra modes per side that make the truncated inverse exact to the Bessel cutoff."""
    return bessel_cutoff_order(params.argument(eps)) + 2


def g0_inverse_tridiagonal(eps, omega, params: DriveParams, idx: FloquetIndexSet, pad=None):
    """Retarded Floquet Green's function by inverting the tridiagonal matrix.

    Parameters
    ----------
    pad : int or None
        Modes added on each side before inverting; the result is cropped
        back to `idx`.  ``None`` chooses the Bessel-cutoff padding (agrees
        with :func:`g0_retarded_bessel`), ``0`` is the strictly truncated
        matrix.
    """
    if pad is None:
        pad = auto_pad(eps, params)
    big = FloquetIndexSet(idx.n_max + int(pad))
    g = invert(inverse_matrix_tridiagonal(eps, omega, params, big))
    sl = slice(int(pad), int(pad) + idx.dim)
    return g[..., sl, sl]


def bath_keldysh(omega, params: DriveParams, idx: FloquetIndexSet, distribution=step_distribution):
    """Keldysh self-energy of the wide-band bath, ``δ_{mn}(-2iη)(1 - 2f(ω - mΩ))``."""
    return embed_static(
        lambda w: -2j * params.eta * (1.0 - 2.0 * distribution(w)), omega, idx, params.omega_l
    )


def g0_keldysh(eps, omega, params: DriveParams, idx: FloquetIndexSet,
               distribution=step_distribution, pad=None):
    """Non-interacting Keldysh propagator of a band state coupled to the bath."""
    if pad is None:
        pad = auto_pad(eps, params)
    big = FloquetIndexSet(idx.n_max + int(pad))
    g_r = invert(inverse_matrix_tridiagonal(eps, omega, params, big))
    g_k = keldysh_from_dyson(g_r, dagger(g_r), bath_keldysh(omega, params, big, distribution))
    sl = slice(int(pad), int(pad) + idx.dim)
    g_r = g_r[..., sl, sl]
    g_k = 0.5 * (g_k - dagger(g_k))[..., sl, sl]
    return KeldyshPropagator.from_retarded(g_r, g_k)


def local_g0_retarded(omega, params: DriveParams, idx: FloquetIndexSet,
                      quadrature: Quadrature, form: str = "tridiagonal", pad=None):
    """Band-integrated non-interacting retarded Green's function."""
    if form == "bessel":
        return quadrature.integrate(lambda e: g0_retarded_bessel(e, omega, params, idx))
    if form == "tridiagonal":
        return quadrature.integrate(lambda e: g0_inverse_tridiagonal(e, omega, params, idx, pad=pad))
    raise ConfigurationError(f"unknown form {form!r}")


def truncated_closure(eps, params: DriveParams, idx: FloquetIndexSet):
    r"""Row-0 spectral weight kept when both Bessel sums run over `idx` only.

    ``Σ_{|ρ|≤N} J_ρ(x) Σ_{|n|≤N} J_{ρ-n}(x)``, which is exactly one for an
    untruncated representation.  Its deficit grows with ``A/Ω``.
    """
    x = np.atleast_1d(np.asarray(params.argument(eps), dtype=float))
    n = idx.n_max
    table = bessel_table(2 * n, x)
    k = np.arange(-2 * n, 2 * n + 1)
    sign = np.where((k < 0) & (np.abs(k) % 2 == 1), -1.0, 1.0)[:, None]
    j_all = table[np.abs(k)] * sign  # J_k for k in [-2N, 2N]
    modes = idx.modes
    j_rho = j_all[modes + 2 * n]
    row = np.zeros_like(x)
    for r in modes:
        row += j_rho[r + n] * j_all[r - modes + 2 * n].sum(axis=0)
    return row.reshape(np.shape(params.argument(eps)))


def truncation_residual(params: DriveParams, idx: FloquetIndexSet, quadrature: Quadrature) -> float:
    """``|∫dε D(ε) closure(ε) - 1|``; the validity measure of a Floquet truncation."""
    kept = float(np.sum(quadrature.weights * truncated_closure(quadrature.nodes, params, idx)))
    return abs(kept / float(np.sum(quadrature.weights)) - 1.0)
