"""Band dispersion, density of states and band-energy quadrature.

Momentum sums are replaced by one-dimensional integrals over the band energy
ε weighted with the density of states D(ε).  The modulation-induced hopping
shares the structure factor of the static hopping, so its band energy is
simply ε/D.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special

from .floquet import ConfigurationError

BAND_KINDS = ("semielliptic", "cubic3d", "table")


def semielliptic_dos(eps, half_bandwidth=1.0):
    """``(2/πD²) sqrt(D² - ε²)`` inside the band, zero outside."""
    eps = np.asarray(eps, dtype=float)
    d = float(half_bandwidth)
    inside = np.clip(d * d - eps * eps, 0.0, None)
    return 2.0 / (np.pi * d * d) * np.sqrt(inside)


def _square_lattice_dos(e, t):
    # 2D nearest-neighbour DOS, log-divergent at e = 0
    e = np.asarray(e, dtype=float)
    out = np.zeros_like(e)
    inside = np.abs(e) < 4.0 * t
    m = 1.0 - (e[inside] / (4.0 * t)) ** 2
    out[inside] = special.ellipk(m) / (2.0 * np.pi**2 * t)
    return out


@lru_cache(maxsize=4)
def cubic_dos_table(n_points: int = 2001, n_theta: int = 4000):
    """Tabulated simple-cubic DOS on [-1, 1] (half-bandwidth 6t = 1).

    Obtained by convolving the 2D square-lattice DOS (complete elliptic
    integral) with the 1D chain DOS; the θ-integral uses the midpoint rule,
    which copes with the logarithmic van Hove singularity.
    """
    t = 1.0 / 6.0
    eps = np.linspace(-1.0, 1.0, n_points)
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    shift = 2.0 * t * np.cos(theta)
    dos = np.empty_like(eps)
    for i, e in enumerate(eps):
        dos[i] = _square_lattice_dos(e - shift, t).mean()
    dos[0] = dos[-1] = 0.0
    dos = 0.5 * (dos + dos[::-1])
    dos /= np.trapezoid(dos, eps)
    return eps, dos


def load_dos_table(path):
    """Read a two-column ``ε  D(ε)`` text table (strictly increasing ε)."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ConfigurationError(f"{path}: DOS table needs two columns, got {data.shape[1]}")
    eps, dos = data[:, 0], data[:, 1]
    if np.any(np.diff(eps) <= 0):
        raise ConfigurationError(f"{path}: energies must be strictly increasing")
    if np.any(dos < 0):
        raise ConfigurationError(f"{path}: negative density of states")
    return eps, dos


@dataclass(frozen=True)
class BandModel:
    """Density of states of the lattice, energies in units of D.

    `kind` is ``"semielliptic"`` (closed form), ``"cubic3d"`` (tabulated
    simple-cubic lattice) or ``"table"`` (user file, see :func:`load_dos_table`).
    """

    kind: str = "semielliptic"
    half_bandwidth: float = 1.0
    table_path: str | None = None
    _table: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in BAND_KINDS:
            raise ConfigurationError(f"band must be one of {BAND_KINDS}, got {self.kind!r}")
        if self.half_bandwidth <= 0:
            raise ConfigurationError("half_bandwidth must be positive")
        if self.kind == "table":
            if self.table_path is None:
                raise ConfigurationError("band='table' requires a dos_file")
            eps, dos = load_dos_table(self.table_path)
            object.__setattr__(self, "_table", (eps, dos / np.trapezoid(dos, eps)))
        elif self.kind == "cubic3d":
            eps, dos = cubic_dos_table()
            d = self.half_bandwidth
            object.__setattr__(self, "_table", (eps * d, dos / d))

    @property
    def support(self):
        if self._table is not None:
            return float(self._table[0][0]), float(self._table[0][-1])
        return -self.half_bandwidth, self.half_bandwidth

    def dos(self, eps):
        """Density of states at `eps`; zero outside the band."""
        if self.kind == "semielliptic":
            return semielliptic_dos(eps, self.half_bandwidth)
        grid, table = self._table
        return np.interp(eps, grid, table, left=0.0, right=0.0)

    def dos_slope(self, eps):
        """``dD/dε``; zero outside the band, clipped just inside square-root edges."""
        eps = np.asarray(eps, dtype=float)
        if self.kind == "semielliptic":
            d = self.half_bandwidth
            x = np.clip(eps, -d * (1 - 1e-6), d * (1 - 1e-6))
            slope = -2.0 / (np.pi * d * d) * x / np.sqrt(d * d - x * x)
            return np.where(np.abs(eps) < d, slope, 0.0)
        grid, table = self._table
        # slope of the piecewise-linear interpolant, taken per segment
        seg = np.diff(table) / np.diff(grid)
        k = np.clip(np.searchsorted(grid, eps, side="right") - 1, 0, seg.size - 1)
        inside = (eps >= grid[0]) & (eps <= grid[-1])
        return np.where(inside, seg[k], 0.0)


def dos(eps, band: BandModel | None = None):
    return (band or BandModel()).dos(eps)


def coupling_amplitude(eps, E, T, half_bandwidth=1.0):
    """Drive amplitude ``A(ε) = E + T ε/D`` felt by band energy ε."""
    return E + T * np.asarray(eps, dtype=float) / half_bandwidth


@dataclass(frozen=True)
class Quadrature:
    """Band-energy nodes and DOS-weighted weights, ``Σ w_i = ∫ D(ε) dε``.

    Gauss-Legendre in the angle ``ε = c + h sin θ`` across the band support:
    square-root band edges become smooth in θ, so normalization and moments
    converge exponentially with the node count.

    Resolvent integrals ``∫dε D(ε)/(z - ε)`` with ``z`` close to the real
    axis are not resolved by any fixed node set once ``|Im z|`` drops below
    the node spacing.  :meth:`hilbert` and :meth:`hilbert_pair` therefore
    subtract the first-order Taylor polynomial of D around ``Re z``,
    integrate it in closed form and leave only a smooth remainder to the
    nodes.
    """

    nodes: np.ndarray
    weights: np.ndarray
    base_weights: np.ndarray | None = None
    band: BandModel | None = None

    @classmethod
    def build(cls, band: BandModel | None = None, n_eps: int = 64):
        band = band or BandModel()
        if n_eps < 2:
            raise ConfigurationError("n_eps must be >= 2")
        lo, hi = band.support
        centre, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        t, w = np.polynomial.legendre.leggauss(n_eps)
        theta = 0.5 * np.pi * t
        nodes = centre + half * np.sin(theta)
        jac = 0.5 * np.pi * half * np.cos(theta)
        base = w * jac
        weights = base * band.dos(nodes)
        if band.kind != "semielliptic":
            # tabulated densities carry kinks; pin the normalization exactly
            weights = weights / weights.sum()
        return cls(nodes, weights, base, band)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, f):
        """``Σ_i w_i f(ε_i)`` for a callable returning arrays of equal shape."""
        total = None
        for e, w in zip(self.nodes, self.weights):
            term = w * np.asarray(f(e))
            total = term if total is None else total + term
        return total


    def resolvent_sum(self, z):
        """Plain node sum ``Σ_i w_i / (z - ε_i)``."""
        z = np.asarray(z, dtype=complex)
        return (1.0 / (z[..., None] - self.nodes)) @ self.weights

    def _expansion(self, x):
        if self.band is None or self.base_weights is None:
            raise ConfigurationError("subtracted band integrals need a quadrature built from a BandModel")
        d0 = self.band.dos(x)
        d1 = self.band.dos_slope(x)
        rem = self.weights - self.base_weights * (d0[..., None] + d1[..., None] * (self.nodes - x[..., None]))
        return d0, d1, rem

    def _log_kernel(self, z):
        lo, hi = self.band.support
        return np.log(z - lo) - np.log(z - hi)

    def hilbert(self, z):
        """``∫dε D(ε)/(z - ε)`` for complex `z` off the real axis."""
        z = np.asarray(z, dtype=complex)
        x = z.real
        d0, d1, rem = self._expansion(x)
        lo, hi = self.band.support
        lk = self._log_kernel(z)
        body = np.sum(rem / (z[..., None] - self.nodes), axis=-1)
        return body + d0 * lk + d1 * ((z - x) * lk - (hi - lo))

    def hilbert_pair(self, a, b, tiny: float = 1e-9):
        """``∫dε D(ε) / ((a - ε)(b - ε))`` with a common expansion point.

        Meant for close poles, where the difference quotient of two
        :meth:`hilbert` values would amplify their quadrature error.
        """
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        x = 0.5 * (a.real + b.real)
        d0, d1, rem = self._expansion(x)
        lo, hi = self.band.support
        body = np.sum(rem / ((a[..., None] - self.nodes) * (b[..., None] - self.nodes)), axis=-1)
        la, lb = self._log_kernel(a), self._log_kernel(b)
        gap = b - a
        close = np.abs(gap) < tiny
        safe = np.where(close, 1.0, gap)
        ma = 1.0 / (a - hi) - 1.0 / (a - lo)
        c0 = np.where(close, ma, (la - lb) / safe)
        c1 = np.where(close, -la + (a - x) * ma, ((a - x) * la - (b - x) * lb) / safe)
        return body + d0 * c0 + d1 * c1


    # Pencil form: the lattice resolvent (C - εB)^{-1} diagonalizes to factors
    # 1/(1 - εμ) with μ the eigenvalues of C^{-1}B.  μ = 0 (singular B) is
    # regular here, and λ = 1/μ is the pole in ε.

    def _plain_mu(self, mu):
        return (1.0 / (1.0 - self.nodes * mu[..., None])) @ self.weights

    def inverse_resolvent(self, mu, subtracted: bool = True, far: float = 4.0):
        """``∫dε D(ε) / (1 - εμ)``.

        Poles ``λ = 1/μ`` within `far` (in units of the band support) use
        :meth:`hilbert`; more distant ones, including ``μ = 0``, the node sum,
        which is exact there.
        """
        mu = np.asarray(mu, dtype=complex)
        if not subtracted:
            return self._plain_mu(mu)
        scale = max(abs(b) for b in self.band.support)
        inside = np.abs(mu) * far * scale > 1.0
        out = self._plain_mu(np.where(inside, 0.0, mu))
        lam = 1.0 / mu[inside]
        out[inside] = lam * self.hilbert(lam)
        return out

    def inverse_resolvent_pair(self, mu, g=None, subtracted: bool = True, far: float = 4.0,
                               close: float = 0.05):
        """``H_ij = ∫dε D(ε) / ((1 - εμ_i)(1 - ε conj μ_j))`` over the last axis of `mu`.

        Parameters
        ----------
        mu : (..., n) complex
        g : (..., n) complex, optional
            :meth:`inverse_resolvent` of `mu`, if already computed.
        close : float
            Pole pairs closer than this (``|λ_i - conj λ_j|``) inside the band
            use :meth:`hilbert_pair`; other pairs use partial fractions or,
            when both poles are distant, the node sum.
        """
        mu = np.asarray(mu, dtype=complex)
        a = mu[..., :, None]
        b = np.conj(mu)[..., None, :]
        a, b = np.broadcast_arrays(a, b)
        if not subtracted:
            p = 1.0 / (1.0 - self.nodes * mu[..., None])
            return (p * self.weights) @ np.conj(np.swapaxes(p, -1, -2))
        if g is None:
            g = self.inverse_resolvent(mu, True, far)
        scale = max(abs(x) for x in self.band.support)
        ins = np.abs(mu) * far * scale > 1.0
        in_a = np.broadcast_to(ins[..., :, None], a.shape)
        in_b = np.broadcast_to(ins[..., None, :], a.shape)
        gap = a - b
        near = np.abs(gap) <= close * np.abs(a) * np.abs(b)
        ga = g[..., :, None]
        gb = np.conj(g)[..., None, :]
        # partial fractions are exact for separated poles, distant ones included
        out = (a * ga - b * gb) / np.where(near, 1.0, gap)
        if near.any():
            pair = near & in_a & in_b
            plain = near & ~pair
            if plain.any():
                pa = 1.0 / (1.0 - self.nodes * a[plain][:, None])
                pb = 1.0 / (1.0 - self.nodes * b[plain][:, None])
                out[plain] = (pa * pb) @ self.weights
            if pair.any():
                la, lb = 1.0 / a[pair], 1.0 / b[pair]
                out[pair] = la * lb * self.hilbert_pair(la, lb)
        return out


def band_integrate(f, quadrature: Quadrature | None = None):
    """``∫ dε D(ε) f(ε)`` with a fixed summation order."""
    return (quadrature or Quadrature.build()).integrate(f)
