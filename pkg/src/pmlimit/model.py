"""Pressure law, growth laws, parameter validation, initial data family.

Pressure is the homogeneous law p = rho^m with exponent m >= 2.  Growth is
either off or the smooth saturating law

    G(p) = max_rate * tanh((p_homeo - p) / p_homeo),

which is C^2, bounded by max_rate, vanishes at the homeostatic pressure and
is nonpositive above it.  The strong variant of the assumptions additionally
requires a ceiling P with A + G(P) <= 0 for every A in [1, P]; since G is
nonincreasing the worst case is A = P, which is what the validator checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .errors import NegativeDensity
from .potential import DriftKernel

NEGATIVE_TOL = -1e-12


@dataclass(frozen=True)
class GrowthLaw:
    kind: str = "off"  # "off" | "smooth_tanh"
    max_rate: float = 0.0  # bound on |G|, 1/time
    p_homeo: float = 1.0  # homeostatic pressure, G <= 0 beyond it

    def __post_init__(self):
        if self.kind not in ("off", "smooth_tanh"):
            raise ValueError(f"unknown growth law kind {self.kind!r}")
        if self.kind == "smooth_tanh":
            if not self.max_rate > 0:
                raise ValueError("smooth_tanh needs max_rate > 0")
            if not self.p_homeo > 0:
                raise ValueError("smooth_tanh needs p_homeo > 0")

    def __call__(self, p):
        """Pointwise G(p); accepts scalars or arrays."""
        if self.kind == "off":
            return np.zeros_like(np.asarray(p, dtype=np.float64))
        return self.max_rate * np.tanh((self.p_homeo - np.asarray(p)) / self.p_homeo)

    def at_zero(self) -> float:
        """G(0), the growth rate at vanishing pressure."""
        return float(self(0.0))


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    bounded: bool  # |G| <= max_rate on [0, 10*p_homeo]
    nonpositive_beyond_homeostatic: bool
    ceiling_holds: bool  # P + G(P) <= 0 (worst admissible A)
    messages: tuple = field(default_factory=tuple)


def validate_growth_law(law: GrowthLaw, p_ceiling: float) -> ValidationReport:
    """Check the bounded/nonpositive/ceiling clauses for the given ceiling."""
    if not p_ceiling > 1.0:
        return ValidationReport(
            False, False, False, False, (f"ceiling must exceed 1, got {p_ceiling}",)
        )
    p_ref = law.p_homeo if law.kind == "smooth_tanh" else 1.0
    samples = np.linspace(0.0, 10.0 * p_ref, 2001)
    gvals = law(samples)
    bound = law.max_rate if law.kind == "smooth_tanh" else 0.0
    bounded = bool(np.all(np.abs(gvals) <= bound + 1e-13))
    beyond = samples >= p_ref - 1e-13
    nonpos = bool(np.all(gvals[beyond] <= 1e-13))
    ceiling = bool(p_ceiling + float(law(p_ceiling)) <= 1e-13)
    msgs = []
    if not bounded:
        msgs.append("|G| exceeds max_rate on [0, 10*p_homeo]")
    if not nonpos:
        msgs.append("G is positive beyond the homeostatic pressure")
    if not ceiling:
        msgs.append(
            f"ceiling violated: {p_ceiling} + G({p_ceiling}) = "
            f"{p_ceiling + float(law(p_ceiling)):.4f} > 0"
        )
    return ValidationReport(
        bounded and nonpos and ceiling, bounded, nonpos, ceiling, tuple(msgs)
    )


@dataclass(frozen=True)
class ModelParams:
    m: float
    growth: GrowthLaw
    kernel: DriftKernel
    grid: g.GridSpec
    p_ceiling: float | None = None  # maximum-principle ceiling, optional
    cfl: float = 0.4

    def __post_init__(self):
        if not self.m >= 2:
            raise ValueError(f"pressure exponent must satisfy m >= 2, got {self.m}")
        self.kernel.validate_dimension(self.grid.n)
        if self.p_ceiling is not None:
            report = validate_growth_law(self.growth, self.p_ceiling)
            if not report.passed:
                raise ValueError(
                    "growth law fails the ceiling assumptions: "
                    + "; ".join(report.messages)
                )
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl safety factor must be in (0, 1], got {self.cfl}")


def _clamp_density(values: np.ndarray) -> np.ndarray:
    if values.min() < NEGATIVE_TOL:
        raise NegativeDensity(
            f"density has values down to {values.min():.3e} (< {NEGATIVE_TOL})"
        )
    return np.maximum(values, 0.0)


def int_pow(values: np.ndarray, exponent: float) -> np.ndarray:
    """values**exponent, by squaring when the exponent is a small integer.

    np.power with a float exponent is the single hottest pointwise op in the
    stepper; binary exponentiation is ~10x faster for the integer m used in
    practice and bit-reproducible.
    """
    e = int(exponent)
    if e != exponent or e < 1 or e > 4096:
        return values**exponent
    result = None
    base = values
    while e:
        if e & 1:
            result = base.copy() if result is None else result * base
        e >>= 1
        if e:
            base = base * base
    return result


def pressure(rho: g.ScalarField, m: float) -> g.ScalarField:
    """p = rho^m pointwise (tiny negatives above -1e-12 clamped to zero)."""
    vals = _clamp_density(rho.values)
    return g.ScalarField(rho.spec, int_pow(vals, m))


@dataclass(frozen=True)
class PressurePowers:
    """p and the fractional powers the diagnostics need.

    Computed from rho directly (p^{(m+1)/m} = rho^{m+1} etc.) to avoid 0^0
    and pow-of-tiny issues on the exact zeros outside the support.
    """

    p: g.ScalarField  # rho^m
    p_frac1: g.ScalarField  # p^{(m+1)/m} = rho^{m+1}
    p_frac2: g.ScalarField  # p^{(m+2)/m} = rho^{m+2}
    p_half: g.ScalarField  # p^{(m+1)/2m} = rho^{(m+1)/2}


def pressure_powers(rho: g.ScalarField, m: float) -> PressurePowers:
    vals = _clamp_density(rho.values)
    p = int_pow(vals, m)
    spec = rho.spec
    return PressurePowers(
        p=g.ScalarField(spec, p),
        p_frac1=g.ScalarField(spec, p * vals),
        p_frac2=g.ScalarField(spec, p * vals * vals),
        p_half=g.ScalarField(spec, int_pow(vals, (m + 1.0) / 2.0)),
    )


def growth_eval(p: g.ScalarField, law: GrowthLaw) -> g.ScalarField:
    """Pointwise G(p); off returns the zero field."""
    return g.ScalarField(p.spec, law(p.values))


# -- initial data family --
#
# Smooth compactly supported plateau bumps, independent of m, with amplitude
# at most 1 so the initial mass/moment/pressure integrals are bounded
# uniformly in the exponent.


def plateau_profile(r_over_R: np.ndarray, flat: float = 0.8) -> np.ndarray:
    """1 on [0, flat], quintic smoothstep down to 0 at 1 (C^2), 0 beyond."""
    s = np.clip((r_over_R - flat) / (1.0 - flat), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def bump(
    spec: g.GridSpec,
    centers,
    radius: float = 1.6,
    amplitude: float = 0.9,
    flat: float = 0.8,
) -> g.ScalarField:
    """Sum of plateau bumps at the given centers, clipped to `amplitude`.

    Overlapping bumps saturate at `amplitude` rather than stacking, keeping
    max rho^0 <= 1 for any admissible amplitude.
    """
    if not 0 < amplitude <= 1:
        raise ValueError(f"amplitude must be in (0, 1], got {amplitude}")
    coords = spec.meshgrid()
    total = np.zeros(spec.shape)
    for center in centers:
        if len(center) != spec.n:
            raise ValueError(f"center {center} does not match dimension {spec.n}")
        r2 = np.zeros(spec.shape)
        for c, x0 in zip(coords, center):
            r2 += (c - x0) ** 2
        total += plateau_profile(np.sqrt(r2) / radius, flat)
    return g.ScalarField(spec, amplitude * np.minimum(total, 1.0))


def barenblatt(
    spec: g.GridSpec,
    tau: float,
    exponent: float,
    profile_const: float,
    center=None,
) -> g.ScalarField:
    """Self-similar source solution of du/dtau = Lap(u^exponent) in R^n.

    u(x, tau) = tau^-alpha * (C - k |x|^2 tau^-2beta)_+^{1/(exponent-1)} with
    alpha = n / (n(exponent-1) + 2), beta = alpha/n,
    k = alpha(exponent-1) / (2 exponent n).
    """
    n = spec.n
    alpha = n / (n * (exponent - 1.0) + 2.0)
    beta = alpha / n
    k = alpha * (exponent - 1.0) / (2.0 * exponent * n)
    coords = spec.meshgrid()
    center = center or (0.0,) * n
    r2 = np.zeros(spec.shape)
    for c, x0 in zip(coords, center):
        r2 += (c - x0) ** 2
    core = np.maximum(profile_const - k * r2 * tau ** (-2.0 * beta), 0.0)
    return g.ScalarField(spec, tau ** (-alpha) * core ** (1.0 / (exponent - 1.0)))
