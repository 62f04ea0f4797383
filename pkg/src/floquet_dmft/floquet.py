r"""Floquet-indexed Keldysh Green's functions and their linear algebra.

A Floquet matrix is a complex ``(N, N)`` array with ``N = 2*n_max + 1`` whose
rows and columns are labelled by the Floquet modes ``m, n = -n_max..n_max``.
Functions in this module accept stacks of such matrices, i.e. any array whose
two trailing axes are the Floquet axes; a per-frequency propagator is simply
an array of shape ``(n_omega, N, N)``.

Keldysh structure is kept in the rotated (retarded, advanced, Keldysh)
representation.  Only the retarded block is ever inverted; the Keldysh block
follows from

.. math:: G^K = G^R Σ^K G^A .
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: residual ``max|A A^{-1} - 1|`` above which an inversion counts as failed
INVERSION_RESIDUAL = 1e-6


class ConfigurationError(ValueError):
    """Invalid parameters or incompatible shapes."""


class InversionError(ArithmeticError):
    """A Floquet matrix could not be inverted to the required accuracy."""

    def __init__(self, message, residual=np.inf, where=None):
        super().__init__(message)
        self.residual = residual
        self.where = where


@dataclass(frozen=True)
class FloquetIndexSet:
    """Truncated set of Floquet modes ``m = -n_max, ..., n_max``."""

    n_max: int = 10

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ConfigurationError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n_max + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def position(self, m: int) -> int:
        """Array position of mode `m`."""
        if abs(m) > self.n_max:
            raise IndexError(f"mode {m} outside |m| <= {self.n_max}")
        return m + self.n_max

    def adjacency(self) -> np.ndarray:
        """Real symmetric matrix coupling neighbouring modes, ``δ_{m,n±1}``."""
        return np.eye(self.dim, k=1) + np.eye(self.dim, k=-1)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform real-frequency grid, energies in units of the half-bandwidth."""

    omega_min: float = -8.0
    omega_max: float = 8.0
    n_points: int = 4096

    def __post_init__(self):
        if self.n_points < 2:
            raise ConfigurationError("frequency grid needs n_points >= 2")
        if not self.omega_max > self.omega_min:
            raise ConfigurationError("frequency grid needs omega_max > omega_min")

    @property
    def step(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n_points - 1)

    @property
    def omega(self) -> np.ndarray:
        return self.omega_min + self.step * np.arange(self.n_points)

    def commensurate(self, omega_l: float) -> "FrequencyGrid":
        """Return a grid whose spacing divides the drive frequency exactly.

        The number of points and the centre of the grid are kept, the spacing
        is adjusted to ``omega_l / k`` with ``k`` the nearest integer to
        ``omega_l / step``.  Frequency shifts by multiples of `omega_l` then
        map grid points onto grid points.
        """
        if omega_l <= 0:
            raise ConfigurationError("omega_l must be positive")
        k = max(1, int(round(omega_l / self.step)))
        step = omega_l / k
        centre = 0.5 * (self.omega_min + self.omega_max)
        half = 0.5 * step * (self.n_points - 1)
        return FrequencyGrid(centre - half, centre + half, self.n_points)

    def shift_points(self, omega_l: float) -> int:
        """Number of grid steps in one drive quantum; grid must be commensurate."""
        k = omega_l / self.step
        kr = int(round(k))
        if kr < 1 or abs(k - kr) > 1e-8 * max(1.0, k):
            raise ConfigurationError(
                f"grid step {self.step!r} is not commensurate with omega_l={omega_l!r}"
            )
        return kr


@dataclass
class KeldyshPropagator:
    """Retarded, advanced and Keldysh Floquet blocks.

    Each block is an array with trailing Floquet axes; leading axes (usually
    one frequency axis) are shared by all three blocks.
    """

    retarded: np.ndarray
    advanced: np.ndarray
    keldysh: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_retarded(cls, retarded, keldysh, **meta):
        return cls(retarded, dagger(retarded), keldysh, dict(meta))

    @property
    def shape(self):
        return self.retarded.shape

    def causality_error(self) -> float:
        """``max|G^A - (G^R)^†|``."""
        return float(np.max(np.abs(self.advanced - dagger(self.retarded)), initial=0.0))

    def keldysh_hermiticity_error(self) -> float:
        """``max|G^K + (G^K)^†|``, zero for an anti-hermitian Keldysh block."""
        return float(np.max(np.abs(self.keldysh + dagger(self.keldysh)), initial=0.0))

    def lesser(self) -> np.ndarray:
        return 0.5 * (self.keldysh - self.retarded + self.advanced)

    def greater(self) -> np.ndarray:
        return 0.5 * (self.keldysh + self.retarded - self.advanced)


def _check_square(*arrays):
    shape = None
    for a in arrays:
        if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
            raise ConfigurationError(f"expected square Floquet matrices, got shape {a.shape}")
        if shape is not None and a.shape[-1] != shape:
            raise ConfigurationError(
                f"Floquet dimension mismatch: {shape} vs {a.shape[-1]}"
            )
        shape = a.shape[-1]


def multiply(a, b):
    """Matrix product over the trailing Floquet axes.

    Raises
    ------
    ConfigurationError
        If the Floquet dimensions differ.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    _check_square(a, b)
    return a @ b


def dagger(a):
    """Conjugate transpose over the trailing Floquet axes."""
    a = np.asarray(a)
    return np.conj(np.swapaxes(a, -1, -2))


def inversion_residual(a, a_inv) -> np.ndarray:
    """``max|A A^{-1} - 1|`` per matrix of the stack."""
    eye = np.eye(a.shape[-1])
    return np.max(np.abs(a @ a_inv - eye), axis=(-2, -1))


def invert(a, threshold: float = INVERSION_RESIDUAL):
    """Invert a stack of Floquet matrices by pivoted LU decomposition.

    Parameters
    ----------
    a : (..., N, N) complex array_like
    threshold : float
        Largest acceptable residual ``max|A A^{-1} - 1|``.

    Returns
    -------
    a_inv : (..., N, N) complex ndarray

    Raises
    ------
    InversionError
        If any matrix is singular or its residual exceeds `threshold`.  The
        exception carries the worst residual and its (flat) stack position.
    """
    a = np.asarray(a, dtype=complex)
    _check_square(a)
    try:
        a_inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise InversionError(f"singular Floquet matrix: {exc}") from exc
    res = inversion_residual(a, a_inv)
    if not np.all(np.isfinite(res)) or np.any(res > threshold):
        res = np.where(np.isfinite(res), res, np.inf)
        where = np.unravel_index(int(np.argmax(res)), res.shape) if res.ndim else ()
        worst = float(np.max(res))
        raise InversionError(
            f"Floquet inversion residual {worst:.3e} exceeds {threshold:.1e}",
            residual=worst,
            where=where,
        )
    return a_inv


def keldysh_from_dyson(g_r, g_a, sigma_k_total):
    """Steady-state Keldysh block ``G^K = G^R Σ^K G^A``.

    `sigma_k_total` must already contain the bath contribution; without a
    bath the steady state is not fixed and the result is meaningless.
    """
    g_r = np.asarray(g_r)
    g_a = np.asarray(g_a)
    sigma_k_total = np.asarray(sigma_k_total)
    _check_square(g_r, g_a, sigma_k_total)
    return g_r @ sigma_k_total @ g_a


def anti_hermitian_part(a):
    """``(A - A^†)/2``; projects out roundoff in Keldysh blocks."""
    return 0.5 * (a - dagger(a))


def embed_static(func, omega, idx: FloquetIndexSet, omega_l: float):
    """Diagonal Floquet embedding ``X_{mn}(ω) = δ_{mn} X(ω - mΩ)`` of a static function."""
    shifted = np.asarray(omega, dtype=float)[..., None] - idx.modes * omega_l
    diag = np.asarray(func(shifted), dtype=complex)
    out = np.zeros(diag.shape + (idx.dim,), dtype=complex)
    ii = np.arange(idx.dim)
    out[..., ii, ii] = diag
    return out
