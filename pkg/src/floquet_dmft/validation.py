"""Oracle checks behind ``floquet-dmft validate``.

Every check returns a :class:`Check` with the measured value and the
tolerance it is held to, so the CLI can serialize the whole suite as JSON.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dmft import SolverConfig, solve
from .floquet import FloquetIndexSet, FrequencyGrid
from .ipt import WignerLayout, floquet_to_harmonics, freq_to_time, harmonics_to_floquet, time_to_freq
from .lattice import Quadrature
from .noninteracting import (
    DriveParams,
    bessel_j,
    g0_inverse_tridiagonal,
    g0_retarded_bessel,
    local_g0_retarded,
    truncation_residual,
)
from .observables import ldos

SCAN_OMEGA = (0.1, 0.2, 0.25, 0.3, 0.5, 0.7, 1.0, 1.3, 1.5)
SCAN_T = (1.0, 2.0, 3.0, 4.0)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


def _check(name, value, tol, **detail):
    value = float(value)
    return Check(name, value, tol, bool(value < tol), detail)


def bessel_closure(xs=(0.3, 1.0, 2.0, 7.3, 20.0, 45.0), tol=1e-12) -> Check:
    """``Σ_ρ J_ρ(x)² = 1`` and ``Σ_ρ J_ρ(x) = 1``."""
    worst = 0.0
    for x in xs:
        k = np.arange(-int(x) - 60, int(x) + 61)
        j = bessel_j(k, x, max_order=int(np.max(np.abs(k))))
        worst = max(worst, abs(np.sum(j * j) - 1.0), abs(np.sum(j) - 1.0))
    return _check("bessel_closure", worst, tol, arguments=list(xs))


def analytic_equivalence(n_points=200, seed=0, tol=1e-8, interior=7, omega_range=(-8.0, 8.0)) -> Check:
    """Bessel sum against the tridiagonal inverse on random ``(ε, ω)`` points."""
    rng = np.random.default_rng(seed)
    params = DriveParams(E=1.0, T=2.0, omega_l=0.7, eta=0.01)
    idx = FloquetIndexSet(10)
    sl = slice(idx.position(-interior), idx.position(interior) + 1)
    worst = 0.0
    for eps, w in zip(rng.uniform(-1.0, 1.0, n_points), rng.uniform(*omega_range, n_points)):
        a = g0_retarded_bessel(eps, w, params, idx)[sl, sl]
        b = g0_inverse_tridiagonal(eps, w, params, idx)[sl, sl]
        worst = max(worst, float(np.max(np.abs(a - b))))
    return _check("analytic_equivalence", worst, tol, points=n_points, interior=interior)


def floquet_shift(tol=1e-10) -> Check:
    """``G_{m+1,n+1}(ω + Ω) = G_{mn}(ω)`` for the exact propagator."""
    params = DriveParams(E=1.0, T=2.0, omega_l=0.7, eta=0.01)
    idx = FloquetIndexSet(6)
    omega = np.linspace(-2.0, 2.0, 9)
    worst = 0.0
    for eps in (-0.7, 0.1, 0.9):
        g = g0_inverse_tridiagonal(eps, omega, params, idx)
        gs = g0_inverse_tridiagonal(eps, omega + params.omega_l, params, idx)
        worst = max(worst, float(np.max(np.abs(gs[:, 1:, 1:] - g[:, :-1, :-1]))))
    return _check("floquet_shift", worst, tol)


def transform_roundtrip(tol=1e-6) -> Check:
    """Floquet matrices → harmonics → relative time → back, on Floquet-consistent data."""
    params = DriveParams(E=1.0, T=2.0, omega_l=0.5, eta=0.05)
    idx = FloquetIndexSet(3)
    grid = FrequencyGrid(-6.0, 6.0, 601).commensurate(params.omega_l)
    layout = WignerLayout.build(grid, params.omega_l, idx)
    g = g0_retarded_bessel(0.3, grid.omega, params, idx)
    harm = floquet_to_harmonics(g, layout)
    back = harmonics_to_floquet(time_to_freq(freq_to_time(harm, layout), layout), layout)
    err = float(np.max(np.abs(back - g)) / np.max(np.abs(g)))
    return _check("transform_roundtrip", err, tol)


def truncation_scan(cfg: SolverConfig, tol=0.10, gate_T=2.0, gate_omega=0.25) -> Check:
    """Truncation residual over Ω_L for several T; gated at ``T = gate_T``, ``Ω_L > gate_omega``."""
    quad = cfg.quadrature()
    table = {}
    worst = 0.0
    for t in SCAN_T:
        row = {}
        for om in SCAN_OMEGA:
            p = DriveParams(cfg.E, t, om, cfg.eta, cfg.D)
            r = truncation_residual(p, cfg.idx, quad)
            row[f"{om:g}"] = r
            if t == gate_T and om > gate_omega:
                worst = max(worst, r)
        table[f"{t:g}"] = row
    return _check("truncation_scan", worst, tol, n_max=cfg.n_max, E=cfg.E, residuals=table)


def noninteracting_run(cfg: SolverConfig, tol=1e-8) -> Check:
    """U = 0 through the full solver against the band-integrated reference."""
    small = cfg.replace(U=0.0, n_omega=512, n_eps=32, band_integration="nodes", seed_policy="zero_sigma")
    res = solve(small)
    ref = local_g0_retarded(res.grid.omega, small.params, small.idx, small.quadrature(), pad=0)
    n = small.idx.n_max
    ref_ldos = -np.imag(ref[:, n, :].sum(axis=-1)) / np.pi
    err = float(np.max(np.abs(ldos(res.g_loc) - ref_ldos)))
    ok_iter = res.record.iterations == 1 and res.record.converged
    chk = _check("noninteracting_run", err, tol, iterations=res.record.iterations)
    chk.passed = chk.passed and ok_iter
    return chk


def run_suite(cfg: SolverConfig | None = None) -> list[Check]:
    cfg = cfg or SolverConfig()
    return [
        bessel_closure(),
        analytic_equivalence(),
        floquet_shift(),
        transform_roundtrip(),
        truncation_scan(cfg),
        noninteracting_run(cfg),
    ]
