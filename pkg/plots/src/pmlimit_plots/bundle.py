"""Parsing of a harness output directory.

Consumes only the documented on-disk interfaces of the simulator: the
sweep summary JSON (schema version 1), the per-exponent diagnostics CSV
series, and PMEF snapshot binaries (little-endian: magic "PMEF", u32
version=1, u32 n, u32 N, f64 L, f64 t, f64 m, then N^n f64 row-major).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUPPORTED_SCHEMA = 1
_PMEF_HEADER = struct.Struct("<4sIIIddd")


class SchemaMismatch(Exception):
    """Summary JSON has a schema version this renderer does not understand."""


class MissingSeries(Exception):
    """A required column or series is absent; the message names it."""


@dataclass
class Snapshot:
    t: float
    m: float
    L: float
    rho: np.ndarray
    p: np.ndarray


@dataclass
class ReportBundle:
    """Parsed sweep output: summary dict, per-m column series, snapshots."""

    path: Path
    summary: dict
    series: dict  # m key (str) -> {column -> np.ndarray}
    snapshots: dict = field(default_factory=dict)  # m key -> [Snapshot]

    @property
    def m_values(self):
        return [float(m) for m in self.summary["m_values"]]

    @property
    def m_keys(self):
        return [f"{m:g}" for m in self.m_values]

    def column(self, m_key: str, name: str) -> np.ndarray:
        cols = self.series[m_key]
        if name not in cols:
            raise MissingSeries(f"column {name!r} missing for m={m_key}")
        return cols[name]


def read_pmef(path) -> tuple:
    """(values, n, N, L, t, m) from one PMEF snapshot file."""
    raw = Path(path).read_bytes()
    if len(raw) < _PMEF_HEADER.size:
        raise MissingSeries(f"snapshot {path} truncated")
    magic, version, n, N, L, t, m = _PMEF_HEADER.unpack_from(raw)
    if magic != b"PMEF":
        raise MissingSeries(f"snapshot {path} has bad magic {magic!r}")
    if version != 1:
        raise SchemaMismatch(f"snapshot {path} has version {version}, expected 1")
    values = np.frombuffer(raw, dtype="<f8", count=N**n, offset=_PMEF_HEADER.size)
    return values.reshape((N,) * n), n, N, L, t, m


def _parse_csv(path: Path) -> dict:
    lines = [ln for ln in path.read_text().strip().splitlines() if ln]
    if not lines:
        raise MissingSeries(f"CSV {path.name} is empty")
    header = lines[0].split(",")
    rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def load_bundle(report_dir) -> ReportBundle:
    """Parse a sweep output directory; refuses unknown schema versions."""
    path = Path(report_dir)
    summary_path = path / "summary.json"
    if not summary_path.exists():
        raise MissingSeries(f"no summary.json in {path}")
    summary = json.loads(summary_path.read_text())
    version = summary.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise SchemaMismatch(
            f"summary schema version {version!r}, this renderer supports "
            f"{SUPPORTED_SCHEMA} only"
        )
    if summary.get("kind") != "sweep":
        raise SchemaMismatch(f"expected a sweep report, got {summary.get('kind')!r}")

    series = {}
    for key, entry in summary.get("series", {}).items():
        series[key] = _parse_csv(path / entry["csv"])

    snapshots = {}
    for key, entries in summary.get("snapshots", {}).items():
        snaps = []
        for entry in entries:
            rho, n, N, L, t, m = read_pmef(path / entry["rho"])
            p, *_ = read_pmef(path / entry["p"])
            snaps.append(Snapshot(t=entry["t"], m=m, L=L, rho=rho, p=p))
        snapshots[key] = snaps
    return ReportBundle(path=path, summary=summary, series=series, snapshots=snapshots)
