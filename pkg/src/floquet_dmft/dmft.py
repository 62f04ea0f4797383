"""Self-consistency loop of the driven, half-filled Hubbard model.

One cycle: lattice Green's function from the current self-energy, Weiss
field by Dyson extraction, IPT self-energy of the impurity, damped update.
Convergence is measured on the local retarded Green's function.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .floquet import (
    ConfigurationError,
    FloquetIndexSet,
    FrequencyGrid,
    InversionError,
    KeldyshPropagator,
    anti_hermitian_part,
    dagger,
    invert,
)
from .ipt import (
    SelfEnergy,
    WignerLayout,
    check_edge_leakage,
    ipt_self_energy,
    remap_self_energy,
    wigner_to_time,
)
from .lattice import BandModel, Quadrature
from .noninteracting import DriveParams, bath_keldysh

log = logging.getLogger(__name__)

SEED_POLICIES = ("zero_sigma", "warm_start")
BAND_INTEGRATION = ("subtracted", "nodes")
PARTICLE_HOLE = ("auto", "off")
#: pole distance |λ_i - conj λ_j| below which a Keldysh band integral uses a shared expansion point
PAIR_SWITCH = 0.05
#: eigenvector condition number above which a frequency point is inverted directly
EIG_CONDITION_LIMIT = 1e7
CHUNK = 256


@dataclass(frozen=True)
class SolverConfig:
    """All physical and numerical parameters; energies in units of D."""

    U: float = 4.0
    E: float = 1.0
    T: float = 2.0
    omega_l: float = 0.5
    D: float = 1.0
    eta: float = 0.01
    n_max: int = 10
    band: str = "semielliptic"
    dos_file: str | None = None
    omega_min: float = -8.0
    omega_max: float = 8.0
    n_omega: int = 4096
    n_eps: int = 64
    mixing: float = 0.3
    tol: float = 1e-5
    max_iter: int = 300
    seed_policy: str = "zero_sigma"
    band_integration: str = "subtracted"
    particle_hole: str = "auto"

    def __post_init__(self):
        checks = [
            (self.U >= 0, "U", "must be >= 0"),
            (self.omega_l > 0, "omega_l", "must be > 0"),
            (self.eta > 0, "eta", "must be > 0"),
            (self.D > 0, "D", "must be > 0"),
            (0 < self.mixing <= 1, "mixing", "must lie in (0, 1]"),
            (self.tol > 0, "tol", "must be > 0"),
            (int(self.max_iter) == self.max_iter and self.max_iter >= 1, "max_iter", "must be an integer >= 1"),
            (int(self.n_max) == self.n_max and self.n_max >= 1, "n_max", "must be an integer >= 1"),
            (int(self.n_eps) == self.n_eps and self.n_eps >= 2, "n_eps", "must be an integer >= 2"),
            (int(self.n_omega) == self.n_omega and self.n_omega >= 2, "n_omega", "must be an integer >= 2"),
            (self.omega_max > self.omega_min, "omega_max", "must exceed omega_min"),
            (self.seed_policy in SEED_POLICIES, "seed_policy", f"must be one of {SEED_POLICIES}"),
            (self.band_integration in BAND_INTEGRATION, "band_integration", f"must be one of {BAND_INTEGRATION}"),
            (self.particle_hole in PARTICLE_HOLE, "particle_hole", f"must be one of {PARTICLE_HOLE}"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigurationError(f"{name} {msg} (got {getattr(self, name)!r})")
        BandModel(self.band, self.D, self.dos_file)

    def replace(self, **changes) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **changes})

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @property
    def idx(self) -> FloquetIndexSet:
        return FloquetIndexSet(int(self.n_max))

    @property
    def grid(self) -> FrequencyGrid:
        """Frequency grid with its spacing snapped to divide ``omega_l``."""
        return FrequencyGrid(self.omega_min, self.omega_max, int(self.n_omega)).commensurate(self.omega_l)

    @property
    def params(self) -> DriveParams:
        return DriveParams(self.E, self.T, self.omega_l, self.eta, self.D)

    @property
    def band_model(self) -> BandModel:
        return BandModel(self.band, self.D, self.dos_file)

    def quadrature(self) -> Quadrature:
        return Quadrature.build(self.band_model, int(self.n_eps))

    def layout(self) -> WignerLayout:
        return WignerLayout.build(self.grid, self.omega_l, self.idx)

    def particle_hole_signs(self):
        """Sign pattern ``s_mn`` of the particle-hole symmetry, or ``None`` if it is broken.

        With ``E = 0`` the map is ``G_mn(ω) -> -conj G_{-m,-n}(-ω)``; with
        ``T = 0`` it needs a half-period time shift, which adds ``(-1)^(m-n)``.
        A drive with both amplitudes nonzero has no such symmetry.
        """
        if self.E != 0 and self.T != 0:
            return None
        m = self.idx.modes
        if self.E == 0:
            return np.ones((m.size, m.size))
        return (-1.0) ** (m[:, None] - m[None, :])


@dataclass
class ConvergenceRecord:
    residuals: list = field(default_factory=list)
    converged: bool = False
    elapsed: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("inf")

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "residuals": list(self.residuals),
            "elapsed_seconds": self.elapsed,
        }


@dataclass
class SolverResult:
    config: SolverConfig
    grid: FrequencyGrid
    sigma: SelfEnergy
    g_loc: KeldyshPropagator
    weiss: KeldyshPropagator
    record: ConvergenceRecord


class LatticeContext:
    """Per-configuration constants of the lattice Dyson equation."""

    def __init__(self, cfg: SolverConfig, threads: int = 1):
        self.cfg = cfg
        self.grid = cfg.grid
        self.idx = cfg.idx
        self.params = cfg.params
        self.quad = cfg.quadrature()
        self.threads = max(1, int(threads))
        n = self.idx.dim
        adj = self.idx.adjacency()
        omega = self.grid.omega
        # M(ε, ω) = C(ω) - ε B  with  C = ω - mΩ + iη - (E/2) adj - Σ,  B = 1 + (T/2D) adj
        self.c0 = np.zeros((omega.size, n, n), dtype=complex)
        ii = np.arange(n)
        self.c0[:, ii, ii] = omega[:, None] - self.idx.modes * cfg.omega_l + 1j * cfg.eta
        self.c0 -= 0.5 * cfg.E * adj
        self.b = np.eye(n) + 0.5 * cfg.T / cfg.D * adj
        self.sigma_k_bath = bath_keldysh(omega, self.params, self.idx)
        self.subtracted = cfg.band_integration == "subtracted"
        self._fallback_quad = None
        #: frequency points that needed direct inversion, summed over calls
        self.n_direct = 0

    @property
    def fallback_quad(self) -> Quadrature:
        """Node set for direct inversion; in subtracted mode fine enough to resolve η."""
        if self._fallback_quad is None:
            n = int(self.cfg.n_eps)
            if self.subtracted:
                n = max(n, min(4096, int(np.ceil(8.0 * self.cfg.D / self.cfg.eta))))
            self._fallback_quad = self.quad if n == self.quad.size else Quadrature.build(self.cfg.band_model, n)
        return self._fallback_quad


def _lattice_chunk(ctx: LatticeContext, c, sk):
    """Band-integrated (G^R, G^K) for a block of frequencies.

    With ``C^{-1}B = V diag(μ) V^{-1}`` and ``W = V^{-1} C^{-1}`` the resolvent
    is ``V diag(1/(1 - εμ)) W``, so the ε-integral acts on scalars only.
    """
    n_w, n, _ = c.shape
    g_r = np.zeros_like(c)
    g_k = np.zeros_like(c)
    cinv = invert(c)
    mu, vec = np.linalg.eig(cinv @ ctx.b)
    try:
        vinv = np.linalg.inv(vec)
    except np.linalg.LinAlgError:
        vinv = None
    if vinv is None:
        direct = np.ones(n_w, dtype=bool)
    else:
        cond = np.linalg.norm(vec, 1, axis=(-2, -1)) * np.linalg.norm(vinv, 1, axis=(-2, -1))
        direct = ~(np.isfinite(cond) & (cond < EIG_CONDITION_LIMIT))
        ok = ~direct
        if ok.any():
            v, m_ = vec[ok], mu[ok]
            w_left = vinv[ok] @ cinv[ok]
            g = ctx.quad.inverse_resolvent(m_, ctx.subtracted)
            hmat = ctx.quad.inverse_resolvent_pair(m_, g, ctx.subtracted, close=PAIR_SWITCH)
            g_r[ok] = (v * g[:, None, :]) @ w_left
            s = w_left @ sk[ok] @ dagger(w_left)
            g_k[ok] = v @ (s * hmat) @ dagger(v)
    ctx.n_direct += int(direct.sum())
    if direct.any():
        cd, skd = c[direct], sk[direct]
        acc_r = np.zeros_like(cd)
        acc_k = np.zeros_like(cd)
        fq = ctx.fallback_quad
        for e, w in zip(fq.nodes, fq.weights):
            try:
                g = invert(cd - e * ctx.b)
            except InversionError as exc:
                raise InversionError(
                    f"lattice inversion failed at eps={e:.6g}: {exc}", exc.residual, exc.where
                ) from exc
            acc_r += w * g
            acc_k += w * (g @ skd @ dagger(g))
        g_r[direct] = acc_r
        g_k[direct] = acc_k
    return g_r, g_k


def lattice_green(sigma: SelfEnergy, cfg: SolverConfig, ctx: LatticeContext | None = None) -> KeldyshPropagator:
    """Local lattice propagator ``∫dε D(ε) [G_0^{-1}(ε, ω) - Σ(ω)]^{-1}``.

    The Keldysh block is ``∫dε G^R (Σ^K + Σ^K_bath) G^A``.  Per frequency the
    band integral uses an eigen-decomposition of the ε-linear matrix pencil;
    frequencies with ill-conditioned eigenvectors fall back to direct
    inversion at every quadrature node.
    """
    ctx = ctx or LatticeContext(cfg)
    c = ctx.c0 - sigma.retarded
    sk = sigma.keldysh + ctx.sigma_k_bath
    n_w = c.shape[0]
    bounds = [(i, min(i + CHUNK, n_w)) for i in range(0, n_w, CHUNK)]

    def work(b):
        lo, hi = b
        try:
            return _lattice_chunk(ctx, c[lo:hi], sk[lo:hi])
        except InversionError as exc:
            where = exc.where[0] + lo if exc.where else lo
            raise InversionError(
                f"{exc} (omega={ctx.grid.omega[where]:.6g})", exc.residual, where
            ) from exc

    if ctx.threads > 1:
        with ThreadPoolExecutor(ctx.threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    g_r = np.concatenate([p[0] for p in parts])
    g_k = np.concatenate([p[1] for p in parts])
    return KeldyshPropagator(g_r, dagger(g_r), anti_hermitian_part(g_k))


def weiss_field(g_loc: KeldyshPropagator, sigma: SelfEnergy) -> KeldyshPropagator:
    """Weiss propagator from ``𝒢^{-1} = G^{-1} + Σ`` in the (R, A, K) algebra."""
    g_r_inv = invert(g_loc.retarded)
    w_r = invert(g_r_inv + sigma.retarded)
    w_a = dagger(w_r)
    g_a_inv = dagger(g_r_inv)
    inner = g_r_inv @ g_loc.keldysh @ g_a_inv - sigma.keldysh
    w_k = anti_hermitian_part(w_r @ inner @ w_a)
    return KeldyshPropagator(w_r, w_a, w_k)


def symmetrize(sigma: SelfEnergy, signs) -> SelfEnergy:
    """Project onto the particle-hole symmetric part; the grid must be symmetric about zero."""
    r = 0.5 * (sigma.retarded - signs * np.conj(sigma.retarded[::-1, ::-1, ::-1]))
    k = 0.5 * (sigma.keldysh + signs * np.conj(sigma.keldysh[::-1, ::-1, ::-1]))
    return SelfEnergy(r, dagger(r), k)


def impurity_step(weiss: KeldyshPropagator, U: float, layout: WignerLayout) -> SelfEnergy:
    if U == 0:
        return SelfEnergy.zeros(layout.grid.n_points, layout.idx)
    cgf = wigner_to_time(weiss.greater(), weiss.lesser(), layout, check_edges=False)
    return ipt_self_energy(cgf, U)


def solve(cfg: SolverConfig, seed: SelfEnergy | None = None, seed_layout: WignerLayout | None = None,
          threads: int = 1, callback=None) -> SolverResult:
    """Iterate the DMFT cycle to self-consistency.

    Parameters
    ----------
    cfg : SolverConfig
    seed : SelfEnergy, optional
        Starting self-energy for ``seed_policy="warm_start"``.  If
        `seed_layout` is given and differs from this run's layout the seed is
        remapped first.
    threads : int
        Worker threads for the frequency-parallel lattice step.
    callback : callable, optional
        Called as ``callback(iteration, residual)``.

    Returns
    -------
    SolverResult
        Not converging within ``max_iter`` is reported through
        ``record.converged``, not raised.
    """
    t0 = time.perf_counter()
    layout = cfg.layout()
    ctx = LatticeContext(cfg, threads)
    n_w = layout.grid.n_points
    if cfg.seed_policy == "warm_start" and seed is not None:
        if seed_layout is not None and seed_layout != layout:
            seed = remap_self_energy(seed, seed_layout, layout)
        sigma = seed
    else:
        sigma = SelfEnergy.zeros(n_w, cfg.idx)
    signs = None
    grid = layout.grid
    if cfg.particle_hole == "auto" and abs(grid.omega_min + grid.omega_max) <= 1e-12 * grid.omega_max:
        # the symmetric solution of the half-filled Mott insulator is an unstable
        # fixed point of the mixed iteration; roundoff would otherwise grow into
        # a particle-hole asymmetric state
        signs = cfg.particle_hole_signs()
    record = ConvergenceRecord()
    g_loc = lattice_green(sigma, cfg, ctx)
    weiss = g_loc
    for it in range(1, int(cfg.max_iter) + 1):
        weiss = weiss_field(g_loc, sigma)
        new = impurity_step(weiss, cfg.U, layout)
        if signs is not None:
            new = symmetrize(new, signs)
        sigma = sigma.mix(new, cfg.mixing)
        g_new = lattice_green(sigma, cfg, ctx)
        res = float(np.max(np.abs(g_new.retarded - g_loc.retarded)))
        g_loc = g_new
        record.residuals.append(res)
        log.info("iteration %d residual %.3e", it, res)
        if callback is not None:
            callback(it, res)
        if not np.isfinite(res):
            break
        if res < cfg.tol:
            record.converged = True
            break
    if cfg.U != 0:
        check_edge_leakage(weiss.greater(), weiss.lesser())
    record.elapsed = time.perf_counter() - t0
    return SolverResult(cfg, layout.grid, sigma, g_loc, weiss, record)
