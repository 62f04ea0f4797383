"""Figures for run and sweep outputs.

Two independent emitters read the CSV files the CLI has already written: a
gnuplot script (plain text, no dependency) and matplotlib PNGs.  matplotlib
is imported lazily so the solver never requires it.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

RUN_GNUPLOT = """\
# gnuplot script for one floquet-dmft run; usage: gnuplot plots.gp
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set xlabel 'omega [D]'

set output 'ldos.gp.png'
set ylabel 'LDOS [1/D]'
plot 'spectra.csv' using 1:2 with lines title 'row 0', '' using 1:3 with lines title 'all indices'

set output 'distribution.gp.png'
set ylabel 'f(omega)'
set yrange [-0.1:1.1]
plot 'distribution.csv' using 1:2 with lines title 'f'
"""

SWEEP_GNUPLOT = """\
# gnuplot script for a floquet-dmft sweep; usage: gnuplot plots.gp
# sweep_spectra.csv columns: T, omega_l, omega, ldos_row0, f
set datafile separator ','
set terminal pngcairo size 900,700
set xlabel 'omega [D]'
set ylabel 'Omega_L [D]'
set view map
"""


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_run_gnuplot(out_dir) -> Path:
    path = Path(out_dir) / "plots.gp"
    path.write_text(RUN_GNUPLOT)
    return path


def write_sweep_gnuplot(out_dir, t_values) -> Path:
    lines = [SWEEP_GNUPLOT]
    for t in t_values:
        tag = f"{t:g}"
        lines.append(f"set output 'ldos_T{tag}.gp.png'\nset title 'LDOS, T = {tag}'")
        lines.append(
            "splot 'sweep_spectra.csv' every ::1 using 3:($1=="
            f"{t!r} ? $2 : 1/0):4 with pm3d notitle"
        )
        lines.append(f"set output 'distribution_T{tag}.gp.png'\nset title 'f, T = {tag}'")
        lines.append(
            "splot 'sweep_spectra.csv' every ::1 using 3:($1=="
            f"{t!r} ? $2 : 1/0):5 with pm3d notitle"
        )
    path = Path(out_dir) / "plots.gp"
    path.write_text("\n".join(lines) + "\n")
    return path


def plot_run(spectral, out_dir) -> list[Path]:
    """LDOS and distribution of one run as PNG files."""
    plt = _pyplot()
    out_dir = Path(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(spectral.omega, spectral.ldos_row0, lw=1.2, label="row 0")
    ax.plot(spectral.omega, spectral.ldos_full, lw=0.8, alpha=0.7, label="all indices")
    ax.set_xlabel(r"$\omega$ [D]")
    ax.set_ylabel("LDOS [1/D]")
    ax.legend(frameon=False)
    fig.tight_layout()
    paths.append(out_dir / "ldos.png")
    fig.savefig(paths[-1], dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(spectral.omega, spectral.distribution, lw=1.2)
    ax.set_ylim(-0.1, 1.1)
    ax.set_xlabel(r"$\omega$ [D]")
    ax.set_ylabel(r"$f(\omega)$")
    fig.tight_layout()
    paths.append(out_dir / "distribution.png")
    fig.savefig(paths[-1], dpi=150)
    plt.close(fig)
    return paths


def plot_sweep(t_values, omega_ls, omega, ldos, dist, out_dir) -> list[Path]:
    """Heatmaps over (ω, Ω_L), one LDOS and one distribution figure per T.

    `ldos` and `dist` are indexed ``[T, Ω_L, ω]``; NaN entries (masked f or
    failed points) are left blank.
    """
    plt = _pyplot()
    out_dir = Path(out_dir)
    paths = []
    omega_ls = np.asarray(omega_ls)
    for it, t in enumerate(t_values):
        for name, data, label in (("ldos", ldos, "LDOS [1/D]"), ("distribution", dist, r"$f(\omega)$")):
            fig, ax = plt.subplots(figsize=(6, 4.5))
            mesh = ax.pcolormesh(omega, omega_ls, np.ma.masked_invalid(data[it]), shading="nearest")
            fig.colorbar(mesh, ax=ax, label=label)
            ax.set_xlabel(r"$\omega$ [D]")
            ax.set_ylabel(r"$\Omega_L$ [D]")
            ax.set_title(f"T = {t:g}")
            fig.tight_layout()
            paths.append(out_dir / f"{name}_T{t:g}.png")
            fig.savefig(paths[-1], dpi=150)
            plt.close(fig)
    return paths
