"""Figure rendering: deterministic batch output, no timestamps, fixed style.

Four figure families per sweep bundle:

  mass_bound.<ext>       mass(t) per exponent with the exp(t G(0)) M(0)
                         envelope overlaid
  residual_decay.<ext>   log-log complementarity residual vs m with the
                         fitted slope annotated (skipped below 2 exponents)
  cauchy_matrix.<ext>    heatmap of the pairwise gradient-trajectory
                         distances (skipped below 2 exponents)
  fields_m<key>_<i>.<ext> density and pressure heatmaps per snapshot with
                         the rho = 1 level set highlighted

Rendering never mutates the bundle; rendering the same bundle twice gives
byte-identical files (fixed hash salt, scrubbed dates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bundle import MissingSeries, ReportBundle  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pmlimit-plots"

_FIG_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


@dataclass
class RenderResult:
    written: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (figure, reason)
    residual_slope: float | None = None


def _save(fig, path: Path, fmt: str, result: RenderResult):
    # Date metadata would break byte-stable regeneration
    metadata = {"Date": None} if fmt == "svg" else {}
    fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)
    result.written.append(path)


def _mass_figure(bundle: ReportBundle, out: Path, fmt: str, result: RenderResult):
    g0 = bundle.summary.get("g_zero", 0.0)
    fig, ax = plt.subplots()
    envelope_drawn = False
    for key in bundle.m_keys:
        t = bundle.column(key, "t")
        mass = bundle.column(key, "mass")
        ax.plot(t, mass, label=f"m = {key}")
        if not envelope_drawn:
            ax.plot(
                t,
                np.exp(g0 * t) * mass[0],
                "k--",
                linewidth=1.2,
                label="growth envelope",
            )
            envelope_drawn = True
    ax.set_xlabel("t")
    ax.set_ylabel("total mass")
    ax.set_title("Mass vs the exponential growth envelope")
    ax.legend(loc="best")
    _save(fig, out / f"mass_bound.{fmt}", fmt, result)


def _residual_figure(bundle: ReportBundle, out: Path, fmt: str, result: RenderResult):
    decay = bundle.summary.get("residual_decay", {})
    m = np.asarray(decay.get("m", []), dtype=float)
    R = np.asarray(decay.get("time_avg", []), dtype=float)
    if len(m) < 2:
        result.skipped.append(("residual_decay", "need at least two exponents"))
        return
    slope = float(np.polyfit(np.log(m), np.log(R), 1)[0])
    result.residual_slope = slope
    fig, ax = plt.subplots()
    ax.loglog(m, R, "o-", label="time-averaged residual")
    ref = R[0] * (m / m[0]) ** slope
    ax.loglog(m, ref, "k--", linewidth=1.0, label=f"fit slope = {slope:.2f}")
    ax.annotate(
        f"slope = {slope:.2f}",
        xy=(m[-2], ref[-2]),
        xytext=(1.05 * m[-2], 1.25 * ref[-2]),
    )
    ax.set_xlabel("m")
    ax.set_ylabel("complementarity residual")
    ax.set_title("Residual decay across the exponent sweep")
    ax.legend(loc="best")
    _save(fig, out / f"residual_decay.{fmt}", fmt, result)


def _cauchy_figure(bundle: ReportBundle, out: Path, fmt: str, result: RenderResult):
    cauchy = bundle.summary.get("cauchy", {})
    mat = np.asarray(cauchy.get("frac", []), dtype=float)
    if mat.size < 4:
        result.skipped.append(("cauchy_matrix", "need at least two exponents"))
        return
    labels = [f"{float(v):g}" for v in cauchy["m"]]
    fig, ax = plt.subplots()
    im = ax.imshow(mat, cmap="viridis", origin="lower")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            ax.text(
                j,
                i,
                f"{mat[i, j]:.3f}",
                ha="center",
                va="center",
                color="w",
                fontsize=7,
            )
    ax.set_xlabel("m")
    ax.set_ylabel("m'")
    ax.set_title("Pairwise gradient-trajectory distances")
    ax.grid(False)
    fig.colorbar(im, ax=ax, shrink=0.85)
    _save(fig, out / f"cauchy_matrix.{fmt}", fmt, result)


def _field_figures(bundle: ReportBundle, out: Path, fmt: str, result: RenderResult):
    any_snapshot = False
    for key in bundle.m_keys:
        for idx, snap in enumerate(bundle.snapshots.get(key, [])):
            if snap.rho.ndim != 2:
                result.skipped.append(
                    (f"fields_m{key}_{idx:02d}", "heatmaps need 2D fields")
                )
                continue
            any_snapshot = True
            extent = (-snap.L, snap.L, -snap.L, snap.L)
            fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.2))
            for ax, data, label in (
                (axes[0], snap.rho, "density"),
                (axes[1], snap.p, "pressure"),
            ):
                im = ax.imshow(
                    data.T, origin="lower", extent=extent, cmap="magma"
                )
                if label == "density" and data.max() >= 1.0:
                    ax.contour(
                        np.linspace(-snap.L, snap.L, data.shape[0]),
                        np.linspace(-snap.L, snap.L, data.shape[1]),
                        data.T,
                        levels=[1.0],
                        colors="cyan",
                        linewidths=1.0,
                    )
                ax.set_title(f"{label}, m = {key}, t = {snap.t:.4f}")
                ax.grid(False)
                fig.colorbar(im, ax=ax, shrink=0.8)
            _save(fig, out / f"fields_m{key}_{idx:02d}.{fmt}", fmt, result)
    if not any_snapshot:
        result.skipped.append(("fields", "no snapshots in the bundle"))


def render_sweep(bundle: ReportBundle, out_dir, fmt: str = "png") -> RenderResult:
    """Render every figure family; returns written paths, skip notices and
    the fitted residual slope (None when the decay plot is skipped)."""
    if fmt not in ("png", "svg"):
        raise ValueError(f"format must be png or svg, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = RenderResult()
    with plt.rc_context(_FIG_STYLE):
        if not bundle.m_keys:
            result.skipped.extend(
                [
                    ("mass_bound", "empty report"),
                    ("residual_decay", "empty report"),
                    ("cauchy_matrix", "empty report"),
                    ("fields", "empty report"),
                ]
            )
            return result
        _mass_figure(bundle, out, fmt, result)
        _residual_figure(bundle, out, fmt, result)
        _cauchy_figure(bundle, out, fmt, result)
        _field_figures(bundle, out, fmt, result)
    return result
