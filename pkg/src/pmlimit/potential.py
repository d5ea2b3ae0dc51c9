"""Chemotactic potential: free-space Poisson solve and generalized drift.

The attractive field solves -Lap(phi) = rho on free space.  We convolve with
the continuum Green's function sampled at cell centers (2D: -ln|x|/2pi,
3D: 1/4pi|x|) using zero-padded, size-doubled FFTs, so the result is the
free-space solution rather than the periodic one.  The singular cell is
regularized by the exact cell average of the kernel:

* 2D: mean of ln|x| over the h-square  = ln h - ln2/2 - 3/2 + pi/4
* 3D: mean of 1/|x|  over the h-cube   = 2.3800773639795523 / h

(both verified against quadrature and the corner antiderivative).
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

try:  # torch's single-threaded FFT is markedly faster on small grids
    import torch

    HAVE_TORCH = True
except ImportError:  # pragma: no cover - torch is an optional accelerator
    HAVE_TORCH = False

from . import grid as g
from .errors import DimensionUnsupported, KernelUnbounded, NegativeDensity

log = logging.getLogger(__name__)

NEGATIVE_TOL = -1e-12

# mean of ln|x| over the unit square [-1/2,1/2]^2
LOG_CELL_MEAN_2D = -np.log(2.0) / 2.0 - 1.5 + np.pi / 4.0
# mean of 1/|x| over the unit cube [-1/2,1/2]^3
INV_CELL_MEAN_3D = 2.3800773639795523


@dataclass(frozen=True)
class DriftKernel:
    """Drift field selector.

    kind: "off", "newtonian", or "custom".
    For "custom": `background` is an optional VectorField added to the
    quadrature of kernel(x, Y) against rho; `kernel` is a callable
    kernel(x, Y) -> (M, n) array for one target point x (shape (n,)) and
    sample points Y (shape (M, n)).  Evaluations must be finite and bounded.
    """

    kind: str = "off"
    background: object = None
    kernel: object = None

    def __post_init__(self):
        if self.kind not in ("off", "newtonian", "custom"):
            raise ValueError(f"unknown drift kernel kind {self.kind!r}")
        if self.kind == "custom" and self.kernel is None and self.background is None:
            raise ValueError("custom kernel needs a callable and/or a background field")

    def validate_dimension(self, n: int) -> None:
        if self.kind == "newtonian" and n not in (2, 3):
            raise DimensionUnsupported(
                f"Newtonian kernel is defined for n in {{2,3}}, got n={n}"
            )


def _check_density(values: np.ndarray) -> None:
    if values.min() < NEGATIVE_TOL:
        raise NegativeDensity(
            f"density has values down to {values.min():.3e} (< {NEGATIVE_TOL})"
        )


class NewtonianSolver:
    """Free-space Poisson solver bound to one grid.

    Immutable after construction (kernel spectrum precomputed); safe to share
    across threads.  solve_raw() reuses internal scratch only through
    per-call temporaries except the padded source buffer, so concurrent
    callers should use separate instances (the module-level cache hands out
    one per grid; harness runs own their states and solvers).
    """

    def __init__(self, spec: g.GridSpec):
        if spec.n not in (2, 3):
            raise DimensionUnsupported(
                f"Newtonian solver supports n in {{2,3}}, got n={spec.n}"
            )
        self.spec = spec
        N, h, n = spec.N, spec.h, spec.n
        P = 2 * N
        # displacement coordinates on the padded grid, circulant ordering
        k = np.arange(P)
        d = np.where(k <= P // 2, k, k - P).astype(np.float64) * h
        coords = np.meshgrid(*([d] * n), indexing="ij")
        r2 = coords[0] ** 2
        for c in coords[1:]:
            r2 = r2 + c**2
        with np.errstate(divide="ignore"):
            if n == 2:
                G = -0.5 * np.log(r2) / (2.0 * np.pi)
                G[(0,) * n] = -(np.log(h) + LOG_CELL_MEAN_2D) / (2.0 * np.pi)
            else:
                G = 1.0 / (4.0 * np.pi * np.sqrt(r2))
                G[(0,) * n] = INV_CELL_MEAN_3D / h / (4.0 * np.pi)
        # kernel is even in every axis, so its spectrum is real
        self._ghat = sfft.rfftn(G).real * spec.cell_volume
        self._pad_shape = (P,) * n
        self._src = np.zeros(self._pad_shape)
        if HAVE_TORCH:
            # the transforms are small; intra-op threading only adds
            # oversubscription on the sweep's worker processes
            torch.set_num_threads(1)
            self._ghat_t = torch.from_numpy(self._ghat)
            self._rows_t = (
                torch.zeros((P, P // 2 + 1), dtype=torch.complex128)
                if n == 2
                else None
            )
            self._src_t = torch.from_numpy(self._src)  # shares the buffer

    def solve_raw(self, rho: np.ndarray) -> np.ndarray:
        """phi values for a raw density array (no validation)."""
        N = self.spec.N
        corner = (slice(0, N),) * self.spec.n
        if HAVE_TORCH and self.spec.n == 2:
            # pruned transforms: the source rows beyond N are zero and only
            # the first N output rows are needed
            P = self._pad_shape[0]
            rows = self._rows_t
            rows[:N] = torch.fft.rfft(torch.from_numpy(rho), n=P, dim=1)
            rows[N:] = 0.0
            spec_hat = torch.fft.fft(rows, dim=0)
            spec_hat *= self._ghat_t
            cols = torch.fft.ifft(spec_hat, dim=0)[:N]
            phi = torch.fft.irfft(cols, n=P, dim=1)[:, :N]
            return phi.numpy().copy()
        self._src[corner] = rho
        if HAVE_TORCH:
            spec_hat = torch.fft.rfftn(self._src_t)
            spec_hat *= self._ghat_t
            phi = torch.fft.irfftn(spec_hat, s=self._pad_shape).numpy()
        else:
            spec_hat = sfft.rfftn(self._src)
            spec_hat *= self._ghat
            phi = sfft.irfftn(spec_hat, s=self._pad_shape, overwrite_x=True)
        return phi[corner].copy()

    def solve_raw_reference(self, rho: np.ndarray) -> np.ndarray:
        """scipy-backed solve, kept as the cross-check path."""
        N = self.spec.N
        corner = (slice(0, N),) * self.spec.n
        self._src[corner] = rho
        spec_hat = sfft.rfftn(self._src)
        spec_hat *= self._ghat
        phi = sfft.irfftn(spec_hat, s=self._pad_shape, overwrite_x=True)
        return phi[corner].copy()

    def solve(self, rho: g.ScalarField):
        """Returns (phi, grad_phi) with grad_phi = gradient(phi)."""
        _check_density(rho.values)
        phi = g.ScalarField(self.spec, self.solve_raw(rho.values))
        return phi, g.gradient(phi)


@functools.lru_cache(maxsize=8)
def _solver_for(n: int, L: float, N: int) -> NewtonianSolver:
    return NewtonianSolver(g.GridSpec(n=n, L=L, N=N))


def solver_for(spec: g.GridSpec) -> NewtonianSolver:
    return _solver_for(spec.n, spec.L, spec.N)


def solve_newtonian(rho: g.ScalarField):
    """Solve -Lap(phi) = rho on free space; returns (phi, grad_phi)."""
    return solver_for(rho.spec).solve(rho)


def drift_field(rho: g.ScalarField, kernel: DriftKernel) -> g.VectorField:
    """Evaluate the drift velocity for the given kernel.

    off       -> zero field
    newtonian -> grad_phi from solve_newtonian
    custom    -> background + h^n * sum_y K(x, y) rho(y), checked finite;
                 the L2 norm of the result is logged for the a-posteriori
                 boundedness check.
    """
    spec = rho.spec
    kernel.validate_dimension(spec.n)
    if kernel.kind == "off":
        return g.VectorField(spec, tuple(g.zeros(spec) for _ in range(spec.n)))
    if kernel.kind == "newtonian":
        _, grad_phi = solve_newtonian(rho)
        return grad_phi
    _check_density(rho.values)
    comps = [np.zeros(spec.shape) for _ in range(spec.n)]
    if kernel.background is not None:
        for axis in range(spec.n):
            comps[axis] += kernel.background.components[axis].values
    if kernel.kernel is not None:
        pts = np.stack([c.ravel() for c in spec.meshgrid()], axis=1)
        weights = rho.values.ravel() * spec.cell_volume
        flat = [c.ravel() for c in comps]
        for i in range(pts.shape[0]):
            vals = np.asarray(kernel.kernel(pts[i], pts), dtype=np.float64)
            if vals.shape != (pts.shape[0], spec.n):
                raise ValueError(
                    f"kernel must return shape {(pts.shape[0], spec.n)}, got {vals.shape}"
                )
            if not np.all(np.isfinite(vals)):
                raise KernelUnbounded(f"kernel returned non-finite values at point {i}")
            contrib = weights @ vals
            for axis in range(spec.n):
                flat[axis][i] += contrib[axis]
        for axis in range(spec.n):
            comps[axis] = flat[axis].reshape(spec.shape)
    field = g.VectorField(
        spec, tuple(g.ScalarField(spec, c.reshape(spec.shape)) for c in comps)
    )
    if not np.all(np.isfinite(field.magnitude_sq())):
        raise KernelUnbounded("drift field contains non-finite values")
    l2 = float(np.sqrt(field.magnitude_sq().sum() * spec.cell_volume))
    log.debug("custom drift field L2 norm: %.6e", l2)
    return field
