"""Panel renderers. Pure functions of the typed rows; fixed style throughout."""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, group_by

# Identical ids for gradients/clips on every run, a requirement for
# byte-identical SVG output.
matplotlib.rcParams["svg.hashsalt"] = "toricfigs"
matplotlib.rcParams["figure.dpi"] = 100

_MARKERS = ("o", "s", "^", "D", "v", "P", "X")

# Temperature window with a size-stable fractional plateau for the 8-state
# channel; shaded on coherent-information panels when the data is N=8.
PHASE_WINDOWS = {8: (0.185, 0.38)}


def _style(i: int) -> dict:
    return {"marker": _MARKERS[i % len(_MARKERS)], "markersize": 4, "linewidth": 1.2}


def _finish(fig, out_path: str | Path) -> Path:
    out_path = Path(out_path)
    suffix = out_path.suffix.lower()
    if suffix not in (".png", ".svg"):
        raise SchemaError(f"output must end in .png or .svg, got {out_path.name}")
    metadata = {"Date": None} if suffix == ".svg" else None
    fig.savefig(out_path, metadata=metadata, bbox_inches="tight")
    plt.close(fig)
    return out_path


def coherent_info_panel(rows, out_path, band=None):
    """Coherent information against temperature, one curve per size.

    The vertical axis is in log-base-N units (value / ln N), so the maximum
    is 2 regardless of N. `band` shades a temperature window; by default the
    N=8 fractional-plateau window is shaded when every row is N=8.
    """
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    n_values = sorted({row["N"] for row in rows})
    for i, ((n, size), grp) in enumerate(group_by(rows, "N", "L")):
        grp = sorted(grp, key=lambda r: r["T"])
        t = np.array([r["T"] for r in grp])
        y = np.array([r["value"] for r in grp]) / math.log(n)
        err = np.array([r["error"] for r in grp]) / math.log(n)
        label = f"L={size}" if len(n_values) == 1 else f"N={n}, L={size}"
        ax.errorbar(t, y, yerr=err, label=label, capsize=2, **_style(i))
    if band is None and len(n_values) == 1:
        band = PHASE_WINDOWS.get(n_values[0])
    if band:  # () suppresses the default window
        ax.axvspan(band[0], band[1], color="0.85", zorder=0)
    ax.set_xlabel("T")
    ax.set_ylabel(r"coherent information  [$\log_N$ units]")
    ax.set_ylim(bottom=-0.05)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, out_path)


def wilson_panel(rows, out_path):
    """Loop average against temperature per charge, with a charge inset."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for i, ((q,), grp) in enumerate(group_by(rows, "q")):
        grp = sorted(grp, key=lambda r: r["T"])
        t = np.array([r["T"] for r in grp])
        y = np.array([r["value"] for r in grp])
        err = np.array([r["error"] for r in grp])
        ax.errorbar(t, y, yerr=err, label=f"q={q}", capsize=2, **_style(i))
    ax.set_xlabel("T")
    ax.set_ylabel("loop average")
    ax.legend(frameon=False, fontsize=8)

    t_values = sorted({row["T"] for row in rows})
    t_inset = t_values[(len(t_values) - 1) // 2]
    inset_rows = sorted(
        (r for r in rows if r["T"] == t_inset), key=lambda r: r["q"]
    )
    if len(inset_rows) > 1:
        axi = ax.inset_axes([0.62, 0.55, 0.33, 0.38])
        axi.errorbar(
            [r["q"] for r in inset_rows],
            [r["value"] for r in inset_rows],
            yerr=[r["error"] for r in inset_rows],
            color="0.2", capsize=2, **_style(0),
        )
        axi.set_xlabel("q", fontsize=7)
        axi.set_title(f"T={t_inset:g}", fontsize=7)
        axi.tick_params(labelsize=6)
    return _finish(fig, out_path)


def _eta(grp) -> float | None:
    pos = [(r["r"], r["value"]) for r in grp if r["value"] > 0]
    if len(pos) < 2:
        return None
    lx = np.log([p[0] for p in pos])
    ly = np.log([p[1] for p in pos])
    slope = np.polyfit(lx, ly, 1)[0]
    return -slope


def renyi1_panel(rows, out_path):
    """Defect correlator decay on semi-log and log-log axes side by side.

    The log-log legend carries the fitted power-law exponent per temperature
    when at least two separations have positive values.
    """
    fig, (ax_semi, ax_loglog) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    for i, ((t,), grp) in enumerate(group_by(rows, "T")):
        grp = sorted(grp, key=lambda r: r["r"])
        r = np.array([row["r"] for row in grp], dtype=float)
        y = np.array([row["value"] for row in grp])
        err = np.array([row["error"] for row in grp])
        ax_semi.errorbar(r, y, yerr=err, label=f"T={t:g}", capsize=2, **_style(i))
        eta = _eta(grp)
        label = f"T={t:g}" if eta is None else f"T={t:g}, $\\eta$={eta:.2f}"
        keep = y > 0
        ax_loglog.errorbar(
            r[keep], y[keep], yerr=err[keep], label=label, capsize=2, **_style(i)
        )
    ax_semi.set_yscale("log")
    ax_semi.set_xlabel("separation r")
    ax_semi.set_ylabel("defect correlator")
    ax_semi.legend(frameon=False, fontsize=8)
    ax_loglog.set_xscale("log")
    ax_loglog.set_yscale("log")
    ax_loglog.set_xlabel("separation r")
    ax_loglog.legend(frameon=False, fontsize=8)
    return _finish(fig, out_path)


def stiffness_panel(rows, out_path):
    """Fitted stiffness per (N, L, T) as a rendered table."""
    ordered = [g for _, grp in group_by(rows, "N", "L", "T") for g in grp]
    cells = [
        [
            str(r["N"]), str(r["L"]), f"{r['T']:g}",
            f"{r['kappa']:.3f} ± {r['kappa_error']:.3f}",
            f"{r['r_squared']:.4f}",
        ]
        for r in ordered
    ]
    fig, ax = plt.subplots(figsize=(5.0, 0.6 + 0.32 * len(cells)))
    ax.axis("off")
    table = ax.table(
        cellText=cells,
        colLabels=["N", "L", "T", "stiffness", "R²"],
        loc="center",
        cellLoc="center",
    )
    table.set_fontsize(9)
    table.scale(1.0, 1.25)
    return _finish(fig, out_path)


def decode_bench_panel(rows, out_path):
    """Logical error rate against temperature, one curve per size.

    Error bars come straight from the interval columns, so they stay
    asymmetric near 0 and 1.
    """
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for i, ((n, size), grp) in enumerate(group_by(rows, "N", "L")):
        grp = sorted(grp, key=lambda r: r["T"])
        t = np.array([r["T"] for r in grp])
        p = np.array([r["P_logical"] for r in grp])
        lo = np.clip(p - np.array([r["err_low"] for r in grp]), 0.0, None)
        hi = np.clip(np.array([r["err_high"] for r in grp]) - p, 0.0, None)
        ax.errorbar(t, p, yerr=(lo, hi), label=f"L={size}", capsize=2, **_style(i))
    ax.set_xlabel("T")
    ax.set_ylabel(r"$P_{\mathrm{logical}}$")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, out_path)


RENDERERS = {
    "coherent_info": coherent_info_panel,
    "wilson": wilson_panel,
    "renyi1": renyi1_panel,
    "stiffness": stiffness_panel,
    "decode_bench": decode_bench_panel,
}


def render(kind: str, rows, out_path, **kwargs) -> Path:
    if kind not in RENDERERS:
        raise SchemaError(f"no renderer for kind {kind!r}")
    return RENDERERS[kind](rows, out_path, **kwargs)
