"""Uniform Cartesian grid, cell-centered fields, discrete operators, quadrature.

The domain is the box [-L, L]^n (n in {1,2,3}) with N cells per axis and
spacing h = 2L/N.  Cell centers sit at x_i = -L + (i + 1/2)h; field values are
stored row-major over the centers.  Fields are assumed negligible at the box
edge, so every stencil closes with zero extension outside the domain.

Operator family:

* ``gradient``   -- centered second-order differences in the interior,
  one-sided at the outermost layer (exact for constants and linears
  everywhere).
* ``divergence`` -- per-axis centered differences, which is identical to the
  conservative flux-difference form with arithmetic face averages; the cell
  sum therefore telescopes to boundary terms only.
* ``laplacian``  -- literally ``divergence(gradient(f))``, so the composition
  identity holds exactly by construction (a 3/5/7-point stencil with 2h arm).
* ``integrate``  -- midpoint rule, h^n * sum.

All operations are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure

SNAPSHOT_MAGIC = b"PMEF"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid on [-L, L]^n."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.n}")
        if self.N < 4:
            raise ValueError(f"need at least 4 cells per axis, got N={self.N}")
        if not self.L > 0:
            raise ValueError(f"box half-width must be positive, got L={self.L}")

    @property
    def h(self) -> float:
        # derived, never stored independently: h*N == 2L exactly
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    def meshgrid(self) -> tuple:
        """Cell-center coordinate arrays, one per axis, 'ij' indexing."""
        return tuple(np.meshgrid(*([self.axis()] * self.n), indexing="ij"))

    def radius_sq(self) -> np.ndarray:
        """|x|^2 at cell centers."""
        coords = self.meshgrid()
        out = coords[0] ** 2
        for c in coords[1:]:
            out = out + c**2
        return out


@dataclass
class ScalarField:
    """Cell-centered scalar samples on a GridSpec."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.spec.shape}"
            )

    def check_finite(self) -> "ScalarField":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        return self

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.values.copy())


@dataclass
class VectorField:
    """One component ScalarField per axis, sharing a single GridSpec."""

    spec: GridSpec
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.components) != self.spec.n:
            raise ValueError(
                f"expected {self.spec.n} components, got {len(self.components)}"
            )
        for c in self.components:
            if c.spec != self.spec:
                raise ValueError("all components must share one GridSpec")

    def magnitude_sq(self) -> np.ndarray:
        out = self.components[0].values ** 2
        for c in self.components[1:]:
            out = out + c.values**2
        return out


def zeros(spec: GridSpec) -> ScalarField:
    return ScalarField(spec, np.zeros(spec.shape))


def from_function(spec: GridSpec, fn) -> ScalarField:
    """Sample fn(*coords) at cell centers."""
    return ScalarField(spec, np.asarray(fn(*spec.meshgrid()), dtype=np.float64))


# -- raw array stencils (shared by the field-level ops and the diagnostics) --


def centered_diff(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """(f[i+1] - f[i-1]) / 2h with zero extension outside the domain."""
    fwd = np.zeros_like(values)
    bwd = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    src[axis] = slice(1, None)
    dst[axis] = slice(0, -1)
    fwd[tuple(dst)] = values[tuple(src)]
    bwd[tuple(src)] = values[tuple(dst)]
    return (fwd - bwd) / (2.0 * h)


def gradient_diff(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Centered differences in the interior, one-sided at the outermost
    layer (exact for constants and linear fields everywhere)."""
    out = centered_diff(values, h, axis)
    first = [slice(None)] * values.ndim
    second = [slice(None)] * values.ndim
    first[axis], second[axis] = 0, 1
    out[tuple(first)] = (values[tuple(second)] - values[tuple(first)]) / h
    first[axis], second[axis] = -1, -2
    out[tuple(first)] = (values[tuple(first)] - values[tuple(second)]) / h
    return out


def second_diff(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Compact (f[i+1] - 2f[i] + f[i-1]) / h^2 with zero extension."""
    fwd = np.zeros_like(values)
    bwd = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    src[axis] = slice(1, None)
    dst[axis] = slice(0, -1)
    fwd[tuple(dst)] = values[tuple(src)]
    bwd[tuple(src)] = values[tuple(dst)]
    return (fwd - 2.0 * values + bwd) / h**2


def face_diff_sq_mean(values: np.ndarray, h: float) -> np.ndarray:
    """Sum over axes of the mean of squared one-sided face differences.

    Energy-consistent discretization of |grad f|^2: per axis the average of
    ((f[i+1]-f[i])/h)^2 and ((f[i]-f[i-1])/h)^2, zero extension at the edge.
    The cell sum equals the face sum of squared differences exactly.
    """
    out = np.zeros_like(values)
    for axis in range(values.ndim):
        fwd = np.zeros_like(values)
        bwd = np.zeros_like(values)
        src = [slice(None)] * values.ndim
        dst = [slice(None)] * values.ndim
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
        fwd[tuple(dst)] = values[tuple(src)]
        bwd[tuple(src)] = values[tuple(dst)]
        out += 0.5 * ((fwd - values) ** 2 + (values - bwd) ** 2) / h**2
    return out


# -- public field operations --


def gradient(f: ScalarField) -> VectorField:
    """Centered second-order gradient; one-sided at the outermost layer."""
    comps = tuple(
        ScalarField(f.spec, gradient_diff(f.values, f.spec.h, axis))
        for axis in range(f.spec.n)
    )
    return VectorField(f.spec, comps)


def divergence(v: VectorField) -> ScalarField:
    """Flux-difference divergence (arithmetic face means), conservative.

    Identical to per-axis centered differences; the cell sum times h^n
    telescopes to boundary fluxes only.
    """
    h = v.spec.h
    out = centered_diff(v.components[0].values, h, 0)
    for axis in range(1, v.spec.n):
        out += centered_diff(v.components[axis].values, h, axis)
    return ScalarField(v.spec, out)


def laplacian(f: ScalarField) -> ScalarField:
    """divergence(gradient(f)), the exact composition."""
    return divergence(gradient(f))


def integrate(f: ScalarField) -> float:
    """Midpoint rule: h^n * sum of values."""
    return float(f.values.sum() * f.spec.cell_volume)


def dot_integral(a: VectorField, b: VectorField) -> float:
    """integrate(a . b) for two vector fields on the same grid."""
    acc = 0.0
    for ca, cb in zip(a.components, b.components):
        acc += float((ca.values * cb.values).sum())
    return acc * a.spec.cell_volume


def boundary_layer_mass(f: ScalarField, layers: int = 2) -> float:
    """integrate(|f|) restricted to the outer `layers` cells on every side."""
    mask = np.zeros(f.spec.shape, dtype=bool)
    for axis in range(f.spec.n):
        sl = [slice(None)] * f.spec.n
        sl[axis] = slice(0, layers)
        mask[tuple(sl)] = True
        sl[axis] = slice(-layers, None)
        mask[tuple(sl)] = True
    return float(np.abs(f.values[mask]).sum() * f.spec.cell_volume)


# -- snapshot binary format --
#
# Little-endian: magic "PMEF", u32 version=1, u32 n, u32 N, f64 L, f64 t,
# f64 m (0 for limit-agnostic fields), then N^n f64 values row-major.
# Round-trips bit-exactly.

_HEADER = struct.Struct("<4sIIIddd")


def write_snapshot(path, f: ScalarField, t: float = 0.0, m: float = 0.0) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(
                _HEADER.pack(
                    SNAPSHOT_MAGIC,
                    SNAPSHOT_VERSION,
                    f.spec.n,
                    f.spec.N,
                    f.spec.L,
                    t,
                    m,
                )
            )
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"snapshot write failed ({exc})", path) from exc


def read_snapshot(path):
    """Returns (ScalarField, t, m)."""
    try:
        with open(path, "rb") as fh:
            header = fh.read(_HEADER.size)
            if len(header) != _HEADER.size:
                raise IoFailure("snapshot truncated", path)
            magic, version, n, N, L, t, m = _HEADER.unpack(header)
            if magic != SNAPSHOT_MAGIC:
                raise IoFailure(f"bad magic {magic!r}", path)
            if version != SNAPSHOT_VERSION:
                raise IoFailure(f"unsupported snapshot version {version}", path)
            spec = GridSpec(n=n, L=L, N=N)
            count = N**n
            data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
            return ScalarField(spec, data.reshape(spec.shape).copy()), t, m
    except OSError as exc:
        raise IoFailure(f"snapshot read failed ({exc})", path) from exc
