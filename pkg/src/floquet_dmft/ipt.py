r"""Second-order (IPT) impurity self-energy for the periodically driven impurity.

Two-time functions periodic in the centre-of-motion time are stored in the
mixed representation

.. math:: G(t, t - s) = \sum_l e^{-ilΩt} F_l(s), \qquad
          F_l(ν) = \int ds\, e^{iνs} F_l(s),

which is tied to the Floquet matrices by ``G_{mn}(ω) = F_{n-m}(ω - nΩ)``.
With a frequency grid whose spacing divides Ω this relation only relabels
grid points.  The contour kernel

.. math:: Σ^{\gtrless}(t, t') = U^2\, \mathcal{G}^{\gtrless}(t, t')^2\, \mathcal{G}^{\lessgtr}(t', t)

is local in ``(t, s)``; products in ``t`` become convolutions over the
harmonic index and are evaluated on a sampled period.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import signal

from .floquet import (
    FloquetIndexSet,
    FrequencyGrid,
    KeldyshPropagator,
    anti_hermitian_part,
    dagger,
)

#: relative |G^≷| at the frequency-grid edges above which a leakage warning is issued
EDGE_LEAKAGE = 1e-4


class EdgeLeakageWarning(UserWarning):
    """Spectral weight reaches the edge of the frequency grid."""


@dataclass(frozen=True)
class WignerLayout:
    """Bookkeeping between Floquet matrices and harmonics on the extended ν grid.

    The ν grid has the spacing of the (commensurate) ω grid and extends it
    symmetrically so that (a) every entry ``G_{mn}(ω)`` has a ν slot and
    (b) triple products in time do not alias back into that range.
    """

    grid: FrequencyGrid
    omega_l: float
    idx: FloquetIndexSet
    shift: int
    offset: int
    n_nu: int
    n_period: int

    @classmethod
    def build(cls, grid: FrequencyGrid, omega_l: float, idx: FloquetIndexSet):
        shift = grid.shift_points(omega_l)
        n_w = grid.n_points
        need = 2 * n_w + 4 * idx.n_max * shift
        n_nu = sfft.next_fast_len(need)
        while (n_nu - n_w) % 2:
            n_nu = sfft.next_fast_len(n_nu + 1)
        n_harm = 4 * idx.n_max + 1
        n_period = 1 << int(np.ceil(np.log2(2 * n_harm - 1 + 2 * idx.n_max)))
        return cls(grid, omega_l, idx, shift, (n_nu - n_w) // 2, n_nu, n_period)

    @property
    def n_harm(self) -> int:
        return 4 * self.idx.n_max + 1

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-2 * self.idx.n_max, 2 * self.idx.n_max + 1)

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def nu(self) -> np.ndarray:
        return self.grid.omega_min + (np.arange(self.n_nu) - self.offset) * self.step

    @property
    def time_step(self) -> float:
        return 2.0 * np.pi / (self.n_nu * self.step)

    @property
    def times(self) -> np.ndarray:
        """Relative times in FFT order."""
        k = np.fft.fftfreq(self.n_nu) * self.n_nu
        return k * self.time_step

    def nu_index(self) -> np.ndarray:
        """``(n_omega, N)`` ν-slot of column `n` at each ω point."""
        i = np.arange(self.grid.n_points)[:, None]
        return i + self.offset - self.idx.modes[None, :] * self.shift


def floquet_to_harmonics(mats, layout: WignerLayout) -> np.ndarray:
    """Harmonics ``F_l(ν)`` from Floquet matrices ``(n_omega, N, N)``.

    Each ``(l, ν)`` slot is read from the most central matrix entries that
    cover it (``n`` closest to ``l/2``), where truncation errors are
    smallest.  For odd ``l`` two entries tie and are averaged, which keeps
    the reading symmetric under ``m, n -> -n, -m``.  Slots no entry covers
    stay zero.
    """
    n = layout.idx.n_max
    n_w = layout.grid.n_points
    out = np.zeros((layout.n_harm, layout.n_nu), dtype=complex)
    for li, l in enumerate(layout.harmonics):
        filled = np.zeros(layout.n_nu, dtype=bool)
        cols = [c for c in range(-n, n + 1) if abs(c - l) <= n]
        for dist in sorted({abs(2 * c - l) for c in cols}):
            total = np.zeros(layout.n_nu, dtype=complex)
            count = np.zeros(layout.n_nu)
            for c in (c for c in cols if abs(2 * c - l) == dist):
                start = layout.offset - c * layout.shift
                total[start:start + n_w] += mats[:, c - l + n, c + n]
                count[start:start + n_w] += 1
            new = (count > 0) & ~filled
            out[li, new] = total[new] / count[new]
            filled |= new
    return out


def harmonics_to_floquet(harm, layout: WignerLayout) -> np.ndarray:
    """Floquet matrices ``G_{mn}(ω) = F_{n-m}(ω - nΩ)`` from harmonics."""
    n = layout.idx.n_max
    modes = layout.idx.modes
    lpos = (modes[None, :] - modes[:, None]) + 2 * n  # (m, n) -> harmonic row
    cols = layout.nu_index()  # (omega, n)
    return harm[lpos[None, :, :], cols[:, None, :]]


def freq_to_time(harm, layout: WignerLayout) -> np.ndarray:
    """``F_l(s) = ∫dν/2π e^{-iνs} F_l(ν)`` as a discrete transform."""
    nu0 = layout.nu[0]
    phase = np.exp(-1j * nu0 * layout.times)
    return (layout.step / (2.0 * np.pi)) * phase * sfft.fft(harm, axis=-1)


def time_to_freq(harm_t, layout: WignerLayout) -> np.ndarray:
    """Inverse of :func:`freq_to_time`."""
    nu0 = layout.nu[0]
    phase = np.exp(1j * nu0 * layout.times)
    return (2.0 * np.pi / layout.step) * sfft.ifft(phase * harm_t, axis=-1)


def reflect_time(harm_t) -> np.ndarray:
    """``F(-s)`` on the FFT-ordered time axis."""
    return np.roll(harm_t[..., ::-1], 1, axis=-1)


def hilbert_kernel(n: int) -> np.ndarray:
    """Lattice principal-value kernel ``2/j`` on odd offsets ``j``, zero on even ones.

    Convolving samples ``X(ν_i)`` with it approximates ``P∫dν' X(ν')/(ν - ν')/h``
    (trapezoid rule on the odd sublattice).  Offsets run over ``-(n-1)..n-1``.
    """
    j = np.arange(-(n - 1), n)
    out = np.zeros(j.size)
    odd = j % 2 == 1
    out[odd] = 2.0 / j[odd]
    return out


def retarded_from_spectral(spec, layout: WignerLayout) -> np.ndarray:
    """Retarded harmonics from ``X = F^> - F^<`` on the ν grid.

    ``F^R(ν) = X(ν)/2 + (i/2π) P∫dν' X(ν')/(ν - ν')``.  The principal value is a
    linear (not circular) convolution, so weight near one end of the ν grid
    does not wrap around to the other; ``θ(s)`` applied on the sampled time
    axis would impose exactly that periodicity.
    """
    n = spec.shape[-1]
    kern = hilbert_kernel(n)
    pv = signal.fftconvolve(spec, kern[None, :], mode="full", axes=-1)[:, n - 1:2 * n - 1]
    return 0.5 * spec + (0.5j / np.pi) * pv


@dataclass
class ContourGF:
    """Greater and lesser functions in the (harmonic, relative time) representation.

    Arrays have shape ``(n_harm, n_nu)``; rows are harmonics ``l = -2N..2N``,
    columns relative times in FFT order (see :attr:`WignerLayout.times`).
    """

    greater: np.ndarray
    lesser: np.ndarray
    layout: WignerLayout

    def density(self) -> np.ndarray:
        """Instantaneous occupation ``-i G^<(t, t)`` sampled over one period."""
        m = self.layout.n_period
        buf = np.zeros(m, dtype=complex)
        buf[self.layout.harmonics % m] = self.lesser[:, 0]
        return np.real(-1j * sfft.fft(buf))


def to_greater_lesser(g: KeldyshPropagator):
    """``(G^>, G^<)`` from the (R, A, K) blocks."""
    return g.greater(), g.lesser()


def check_edge_leakage(greater, lesser):
    """Warn if ``G^≷`` still carries weight at the frequency-grid edges."""
    _check_edges(greater, "greater")
    _check_edges(lesser, "lesser")


def _check_edges(mats, name):
    diag = np.abs(np.diagonal(mats, axis1=-2, axis2=-1)[:, mats.shape[-1] // 2])
    peak = diag.max(initial=0.0)
    if peak == 0.0:
        return
    n_edge = max(1, diag.size // 100)
    edge = max(diag[:n_edge].max(), diag[-n_edge:].max())
    if edge > EDGE_LEAKAGE * peak:
        warnings.warn(
            f"{name}: |G| at the frequency-grid edge is {edge / peak:.1e} of its peak; "
            "widen the grid",
            EdgeLeakageWarning,
            stacklevel=4,
        )


def wigner_to_time(greater, lesser, layout: WignerLayout, check_edges=True) -> ContourGF:
    """Floquet matrices ``G^≷(ω)`` to the mixed time representation."""
    if check_edges:
        check_edge_leakage(greater, lesser)
    return ContourGF(
        freq_to_time(floquet_to_harmonics(greater, layout), layout),
        freq_to_time(floquet_to_harmonics(lesser, layout), layout),
        layout,
    )


def time_to_wigner(cgf: ContourGF):
    """Mixed time representation back to Floquet matrices ``(G^>, G^<)``."""
    lay = cgf.layout
    return (
        harmonics_to_floquet(time_to_freq(cgf.greater, lay), lay),
        harmonics_to_floquet(time_to_freq(cgf.lesser, lay), lay),
    )


class SelfEnergy(KeldyshPropagator):
    """Impurity self-energy; same (R, A, K) layout as a propagator."""

    @classmethod
    def zeros(cls, n_omega: int, idx: FloquetIndexSet):
        z = np.zeros((n_omega, idx.dim, idx.dim), dtype=complex)
        return cls(z, z.copy(), z.copy())

    def mix(self, new: "SelfEnergy", alpha: float) -> "SelfEnergy":
        """``(1 - α) self + α new``."""
        r = (1.0 - alpha) * self.retarded + alpha * new.retarded
        k = (1.0 - alpha) * self.keldysh + alpha * new.keldysh
        return SelfEnergy(r, dagger(r), k)


def _period_product(a, b, c, m):
    """Harmonics of the product of three period-periodic series, ``|l| <= L`` kept."""
    n_h = a.shape[0]
    lmax = (n_h - 1) // 2
    rows = np.arange(-lmax, lmax + 1) % m

    def sample(h):
        buf = np.zeros((m,) + h.shape[1:], dtype=complex)
        buf[rows] = h
        return sfft.fft(buf, axis=0)

    prod = sample(a) * sample(b) * sample(c)
    return sfft.ifft(prod, axis=0)[rows]


def ipt_kernel(weiss: ContourGF, U: float):
    """``(Σ^>, Σ^<)`` harmonics in time for the second-order diagram."""
    lay = weiss.layout
    l = lay.harmonics[:, None]
    back_phase = np.exp(1j * l * lay.omega_l * lay.times[None, :])
    g_gt, g_lt = weiss.greater, weiss.lesser
    h_lt = back_phase * reflect_time(g_lt)  # G^<(t', t)
    h_gt = back_phase * reflect_time(g_gt)  # G^>(t', t)
    u2 = U * U
    m = lay.n_period
    return u2 * _period_product(g_gt, g_gt, h_lt, m), u2 * _period_product(g_lt, g_lt, h_gt, m)


def ipt_self_energy(weiss: ContourGF, U: float) -> SelfEnergy:
    """Second-order contour self-energy in Floquet form.

    Parameters
    ----------
    weiss : ContourGF
        Weiss (bath) function of the impurity at half filling, Hartree shift
        already absorbed.
    U : float
        Interaction strength.

    Returns
    -------
    SelfEnergy
        Retarded part from ``θ(s)(Σ^> - Σ^<)``, evaluated as a Hilbert
        transform in frequency; Keldysh part ``Σ^> + Σ^<``.
    """
    lay = weiss.layout
    if U == 0:
        return SelfEnergy.zeros(lay.grid.n_points, lay.idx)
    s_gt, s_lt = ipt_kernel(weiss, U)
    r = harmonics_to_floquet(retarded_from_spectral(time_to_freq(s_gt - s_lt, lay), lay), lay)
    k = harmonics_to_floquet(time_to_freq(s_gt + s_lt, lay), lay)
    return SelfEnergy(r, dagger(r), anti_hermitian_part(k))


def remap_harmonics(harm, old: WignerLayout, new: WignerLayout) -> np.ndarray:
    """Linear interpolation of frequency harmonics onto another ν grid."""
    if new.idx != old.idx:
        raise ValueError("remapping between different Floquet truncations is not supported")
    out = np.empty((new.n_harm, new.n_nu), dtype=complex)
    x_old, x_new = old.nu, new.nu
    for i in range(new.n_harm):
        out[i] = np.interp(x_new, x_old, harm[i].real, left=0.0, right=0.0) + 1j * np.interp(
            x_new, x_old, harm[i].imag, left=0.0, right=0.0
        )
    return out


def remap_self_energy(sigma: SelfEnergy, old: WignerLayout, new: WignerLayout) -> SelfEnergy:
    """Carry a self-energy over to another drive frequency or grid (warm start)."""
    r = harmonics_to_floquet(remap_harmonics(floquet_to_harmonics(sigma.retarded, old), old, new), new)
    k = harmonics_to_floquet(remap_harmonics(floquet_to_harmonics(sigma.keldysh, old), old, new), new)
    return SelfEnergy(r, dagger(r), anti_hermitian_part(k))
