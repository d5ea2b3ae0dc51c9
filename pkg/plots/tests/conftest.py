"""Synthetic report bundles built directly against the documented formats."""

import json
import struct

import numpy as np
import pytest

PMEF_HEADER = struct.Struct("<4sIIIddd")


def write_pmef(path, values, L, t, m):
    values = np.asarray(values, dtype="<f8")
    n = values.ndim
    N = values.shape[0]
    with open(path, "wb") as fh:
        fh.write(PMEF_HEADER.pack(b"PMEF", 1, n, N, L, t, m))
        fh.write(values.tobytes())


def make_report(dirpath, m_values=(8, 16, 32, 64), samples=9, N=24, L=3.0,
                snapshots_per_m=2, g_zero=0.5):
    """Sweep output with exactly known trends: residual = 0.8/m (slope -1),
    mass(t) growing under the envelope, one saturated density snapshot."""
    dirpath.mkdir(parents=True, exist_ok=True)
    t = np.linspace(0.0, 0.25, samples)
    x = np.linspace(-L, L, N)
    X, Y = np.meshgrid(x, x, indexing="ij")

    summary = {
        "schema_version": 1,
        "kind": "sweep",
        "config": {"grid": {"n": 2, "L": L, "N": N}},
        "g_zero": g_zero,
        "out_of_scope_dimension": False,
        "m_values": list(float(m) for m in m_values),
        "sample_times": t.tolist(),
        "series": {},
        "mass0": {},
        "sup_p_max": {},
        "excess_max": {},
        "steps": {},
        "boundary_flagged": {},
        "residual_decay": {
            "m": list(float(m) for m in m_values),
            "time_avg": [0.8 / m for m in m_values],
            "ratios": [
                (0.8 / b) / (0.8 / a) for a, b in zip(m_values, m_values[1:])
            ],
        },
        "proxies": {
            "excess": [0.05 / m for m in m_values],
            "p_times_onemrho": [0.4 / m for m in m_values],
            "rho_gradp_defect": [0.6 / m for m in m_values],
        },
        "uniform_bounds": {},
        "cauchy": {
            "m": list(float(m) for m in m_values),
            "frac": [
                [abs(1.0 / a - 1.0 / b) for b in m_values] for a in m_values
            ],
            "plain": [
                [1.3 * abs(1.0 / a - 1.0 / b) for b in m_values] for a in m_values
            ],
        },
        "snapshots": {},
        "refinement": None,
    }

    for m in m_values:
        key = f"{m:g}"
        mass = np.exp(0.8 * g_zero * t)
        rows = ["t,m,mass,comp_residual"]
        for ti, mi in zip(t, mass):
            rows.append(f"{ti:.17g},{float(m):.17g},{mi:.17g},{0.8 / m:.17g}")
        csv_name = f"diagnostics_m{key}.csv"
        (dirpath / csv_name).write_text("\n".join(rows) + "\n")
        summary["series"][key] = {"csv": csv_name, "rows": samples}
        summary["mass0"][key] = 1.0
        summary["sup_p_max"][key] = 1.0
        summary["excess_max"][key] = 0.05 / m
        summary["steps"][key] = 100
        summary["boundary_flagged"][key] = False

        snaps = []
        for idx in range(snapshots_per_m):
            tau = t[-1] * idx / max(snapshots_per_m - 1, 1)
            rho = (1.0 + 0.05 / m) * np.exp(-(X**2 + Y**2) / (1.0 + tau))
            p = rho ** float(m)
            rho_name = f"snap_m{key}_{idx:03d}_rho.pmef"
            p_name = f"snap_m{key}_{idx:03d}_p.pmef"
            write_pmef(dirpath / rho_name, rho, L, tau, float(m))
            write_pmef(dirpath / p_name, p, L, tau, float(m))
            snaps.append({"t": tau, "rho": rho_name, "p": p_name})
        summary["snapshots"][key] = snaps

    (dirpath / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return dirpath


@pytest.fixture
def synthetic_report(tmp_path):
    return make_report(tmp_path / "report")
