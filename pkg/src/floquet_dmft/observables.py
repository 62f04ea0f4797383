r"""Physical read-outs of a converged Floquet-DMFT solution.

All curves live on the solver's frequency grid.  The local density of states
follows the row-0 convention ``-(1/π) Σ_n Im G^R_{0n}(ω)``; the distribution
function is the ratio

.. math:: f(ω) = \frac12 \Bigl[1 - \frac{\mathrm{Im}\, G^K_{00}(ω)}{2\, \mathrm{Im}\, G^R_{00}(ω)}\Bigr],

which reduces to the Fermi function in equilibrium.  Where the spectral
weight is negligible the ratio is meaningless and is masked.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .floquet import FloquetIndexSet, KeldyshPropagator
from .lattice import Quadrature
from .noninteracting import DriveParams, truncation_residual

#: |Im G^R_00| below which the distribution function is masked
SPECTRAL_MASK = 1e-6


def _centre(g: np.ndarray) -> int:
    return g.shape[-1] // 2


def ldos(g_loc: KeldyshPropagator, full: bool = False) -> np.ndarray:
    """Local density of states.

    Parameters
    ----------
    g_loc : KeldyshPropagator
    full : bool
        Sum over all Floquet indices ``(m, n)`` instead of row ``m = 0``.
    """
    gr = g_loc.retarded
    if full:
        return -np.imag(gr.sum(axis=(-2, -1))) / np.pi
    return -np.imag(gr[..., _centre(gr), :].sum(axis=-1)) / np.pi


def distribution(g_loc: KeldyshPropagator, threshold: float = SPECTRAL_MASK):
    """Nonequilibrium distribution function and its validity mask.

    Returns
    -------
    f : ndarray
        NaN where masked.
    valid : bool ndarray
        ``|Im G^R_00| >= threshold``.
    """
    c = _centre(g_loc.retarded)
    im_r = np.imag(g_loc.retarded[..., c, c])
    im_k = np.imag(g_loc.keldysh[..., c, c])
    valid = np.abs(im_r) >= threshold
    f = np.full(im_r.shape, np.nan)
    f[valid] = 0.5 * (1.0 - im_k[valid] / (2.0 * im_r[valid]))
    return f, valid


def occupied_spectrum(g_loc: KeldyshPropagator) -> np.ndarray:
    """``f(ω) A_00(ω)`` written without the division, ``(A_00 + Im G^K_00/(2π))/2``."""
    c = _centre(g_loc.retarded)
    a00 = -np.imag(g_loc.retarded[..., c, c]) / np.pi
    return 0.5 * a00 + np.imag(g_loc.keldysh[..., c, c]) / (4.0 * np.pi)


def occupation(g_loc: KeldyshPropagator, omega) -> float:
    """Occupation per spin, ``∫dω f(ω) A_00(ω)``."""
    return float(np.trapezoid(occupied_spectrum(g_loc), omega))


def scattering_rate(sigma: KeldyshPropagator) -> np.ndarray:
    """``-2 Im Σ^R_00(ω)``."""
    c = _centre(sigma.retarded)
    return -2.0 * np.imag(sigma.retarded[..., c, c])


@dataclass
class SumRuleReport:
    """Spectral sum rule of row 0.

    Attributes
    ----------
    value : float
        ``-(1/π) ∫dω Σ_n Im G^R_{0n}``; exactly one for a valid solution.
    residual : float
        ``|value - 1|``.
    per_mode : ndarray
        Contribution of each column ``n``.
    truncation : float or None
        Band-averaged Bessel closure deficit of the Floquet truncation (see
        :func:`~floquet_dmft.noninteracting.truncation_residual`); ``None``
        if drive parameters were not supplied.
    """

    value: float
    residual: float
    per_mode: np.ndarray
    truncation: float | None = None

    @property
    def validity(self) -> float:
        """The larger of the two residuals; the quantity gated at 10%."""
        return max(self.residual, self.truncation or 0.0)

    def as_dict(self):
        return {
            "value": self.value,
            "residual": self.residual,
            "truncation_residual": self.truncation,
            "validity_residual": self.validity,
            "per_mode": [float(v) for v in self.per_mode],
        }


def sum_rule_check(g_loc: KeldyshPropagator, omega, params: DriveParams | None = None,
                   idx: FloquetIndexSet | None = None, quadrature: Quadrature | None = None) -> SumRuleReport:
    """Row-0 sum rule, optionally with the truncation diagnostic.

    The integral of the lattice Green's function is exact for any truncated
    Floquet matrix, so the first residual only detects grid and bath
    effects.  Passing `params`, `idx` and `quadrature` adds the closure
    deficit of the Bessel sums, which measures how much drive-induced
    spectral weight the truncation loses.
    """
    gr = g_loc.retarded
    row = -np.imag(gr[..., _centre(gr), :]) / np.pi
    per_mode = np.trapezoid(row, omega, axis=0)
    value = float(per_mode.sum())
    trunc = None
    if params is not None and idx is not None and quadrature is not None:
        trunc = truncation_residual(params, idx, quadrature)
    return SumRuleReport(value, abs(value - 1.0), per_mode, trunc)


def kramers_kronig(omega, im_part) -> np.ndarray:
    r"""Real part of a retarded function from its imaginary part.

    ``Re F(ω) = (1/π) P∫dω' Im F(ω')/(ω' - ω)`` on a uniform grid, using the
    alternating-point rule (only points of opposite parity contribute, each
    with weight ``2Δω``), which is second-order accurate and avoids the
    singular node.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.size
    step = omega[1] - omega[0]
    k = np.arange(-(n - 1), n)
    kernel = np.zeros(k.size)
    odd = k % 2 == 1
    kernel[odd] = 2.0 / k[odd]
    # Σ_j im[j] kernel[j - i] is a correlation: convolve with the reversed kernel
    conv = signal.fftconvolve(im_part, kernel[::-1], mode="full")
    return conv[n - 1 : 2 * n - 1] / np.pi


def kramers_kronig_residual(omega, retarded) -> float:
    """``max|Re F - KK[Im F]| / max|F|`` for a retarded function sampled on `omega`."""
    retarded = np.asarray(retarded)
    rec = kramers_kronig(omega, retarded.imag)
    return float(np.max(np.abs(rec - retarded.real)) / np.max(np.abs(retarded)))


def particle_hole_error(g: np.ndarray, signs=1.0, keldysh: bool = False) -> float:
    """``max|s_mn G_{-m,-n}(-ω) + conj G_{mn}(ω)| / max|G|`` on a symmetric grid.

    `signs` is the pattern from
    :meth:`~floquet_dmft.dmft.SolverConfig.particle_hole_signs`.  Keldysh
    blocks transform with the opposite overall sign.
    """
    mirrored = signs * g[::-1, ::-1, ::-1]
    if keldysh:
        mirrored = -mirrored
    return float(np.max(np.abs(mirrored + np.conj(g))) / np.max(np.abs(g)))


def window_mean(omega, values, lo, hi, mask=None) -> float:
    """Mean of `values` over ``lo <= ω <= hi``, skipping masked or NaN points."""
    omega = np.asarray(omega)
    sel = (omega >= lo) & (omega <= hi) & np.isfinite(values)
    if mask is not None:
        sel &= mask
    if not sel.any():
        return float("nan")
    return float(np.mean(np.asarray(values)[sel]))


def in_gap_weight(omega, curve, half_width: float = 0.3) -> float:
    """Mean of `curve` over ``|ω| < half_width``."""
    omega = np.asarray(omega)
    sel = np.abs(omega) < half_width
    return float(np.mean(np.asarray(curve)[sel]))


def gap_edges(omega, curve, fraction: float = 0.1):
    """Innermost frequencies on either side of zero where `curve` reaches ``fraction · max``.

    Returns
    -------
    (lower, upper) : tuple of float
        NaN on a side where the level is never reached.
    """
    omega = np.asarray(omega)
    curve = np.asarray(curve)
    level = fraction * curve.max()
    above = curve >= level
    pos = np.nonzero(above & (omega > 0))[0]
    neg = np.nonzero(above & (omega < 0))[0]
    upper = float(omega[pos[0]]) if pos.size else float("nan")
    lower = float(omega[neg[-1]]) if neg.size else float("nan")
    return lower, upper


def weight_balance(g_loc: KeldyshPropagator, omega):
    """``(∫_{ω<0} f A, ∫_{ω>0} f A)``: occupied weight below and above the Fermi edge."""
    fa = occupied_spectrum(g_loc)
    omega = np.asarray(omega)
    below = np.where(omega < 0, fa, 0.0)
    above = np.where(omega > 0, fa, 0.0)
    return float(np.trapezoid(below, omega)), float(np.trapezoid(above, omega))


@dataclass
class SpectralResult:
    """All curves written by the CLI for one solution."""

    omega: np.ndarray
    ldos_row0: np.ndarray
    ldos_full: np.ndarray
    distribution: np.ndarray
    valid: np.ndarray
    occupied: np.ndarray
    scattering_rate: np.ndarray
    sum_rule: SumRuleReport
    occupation: float

    @classmethod
    def from_solution(cls, result) -> "SpectralResult":
        """Build from a :class:`~floquet_dmft.dmft.SolverResult`."""
        cfg = result.config
        omega = result.grid.omega
        g = result.g_loc
        f, valid = distribution(g)
        return cls(
            omega=omega,
            ldos_row0=ldos(g),
            ldos_full=ldos(g, full=True),
            distribution=f,
            valid=valid,
            occupied=occupied_spectrum(g),
            scattering_rate=scattering_rate(result.sigma),
            sum_rule=sum_rule_check(g, omega, cfg.params, cfg.idx, cfg.quadrature()),
            occupation=occupation(g, omega),
        )
