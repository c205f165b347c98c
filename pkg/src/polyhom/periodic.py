"""Periodic boundary data on the unit torus as finite trigonometric polynomials.

A PeriodicFunction stores a finite map from integer frequency vectors m to
complex coefficients c_m and evaluates g(x) = sum c_m exp(2 pi i m . x).
Finite sums are infinitely smooth, so the smoothness thresholds below act as
warnings for externally declared regularity only.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SmoothnessWarning, ValidationError


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """Finite Fourier sum on the d-torus; immutable after construction."""

    dim: int
    coefficients: dict  # tuple[int, ...] -> complex
    real_valued: bool
    declared_smoothness: float | None = None

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(sorted(self.coefficients), dtype=float).reshape(-1, self.dim)

    @property
    def max_frequency(self) -> int:
        if not self.coefficients:
            return 0
        return max(int(np.max(np.abs(m))) for m in self.coefficients)

    def __call__(self, x):
        return evaluate(self, x)


def from_coefficients(dim: int, entries, declared_smoothness: float | None = None) -> PeriodicFunction:
    """Build a PeriodicFunction from (m, c_m) pairs or a {m: c_m} mapping.

    The real-valued flag is set iff the stored support is Hermitian,
    c_{-m} = conj(c_m) for every m (zero coefficients count as absent).
    """
    if dim < 1:
        raise ValidationError("dimension must be >= 1")
    items = entries.items() if hasattr(entries, "items") else entries
    coeffs: dict[tuple[int, ...], complex] = {}
    for m, cm in items:
        if np.isscalar(m):
            # scalar 0 is shorthand for the zero frequency in any dimension
            m = (int(m),) * dim if int(m) == 0 else (int(m),)
        m = tuple(int(v) for v in np.atleast_1d(m))
        if len(m) != dim:
            raise DimensionMismatch(f"frequency {m} has {len(m)} components, expected {dim}")
        cm = complex(cm)
        if cm != 0:
            coeffs[m] = coeffs.get(m, 0.0) + cm
    coeffs = {m: c for m, c in coeffs.items() if c != 0}
    hermitian = all(
        tuple(-v for v in m) in coeffs and np.isclose(coeffs[tuple(-v for v in m)],
                                                      np.conj(c), rtol=0, atol=1e-15)
        for m, c in coeffs.items()
    )
    return PeriodicFunction(dim=dim, coefficients=coeffs, real_valued=bool(hermitian),
                            declared_smoothness=declared_smoothness)


def mean(g: PeriodicFunction) -> complex:
    """Torus mean, i.e. the zero-frequency coefficient."""
    return complex(g.coefficients.get((0,) * g.dim, 0.0))


def evaluate(g: PeriodicFunction, x):
    """sum_m c_m exp(2 pi i m . x); vectorized over leading axes of x."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != g.dim:
        raise DimensionMismatch(f"points have dimension {pts.shape[-1]}, expected {g.dim}")
    if not g.coefficients:
        out = np.zeros(len(pts), dtype=complex)
    else:
        M = np.array(list(g.coefficients), dtype=float)
        cs = np.array(list(g.coefficients.values()), dtype=complex)
        out = np.exp(2j * np.pi * (pts @ M.T)) @ cs
    return out[0] if single else out.reshape(x.shape[:-1])


def subtract_mean(g: PeriodicFunction) -> PeriodicFunction:
    coeffs = dict(g.coefficients)
    coeffs.pop((0,) * g.dim, None)
    return from_coefficients(g.dim, coeffs, g.declared_smoothness)


def sup_norm_lower_bound(g: PeriodicFunction, grid: int = 128) -> float:
    """max |g| over a tensor grid; exact up to grid resolution for finite sums."""
    axes = [np.arange(grid) / grid] * g.dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return float(np.max(np.abs(evaluate(g, pts))))


def smoothness_threshold(d: int, tau: float) -> float:
    """(d-1)/2 + (d-1) tau: the decay order used by the pointwise rate argument."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    return (d - 1) / 2.0 + (d - 1) * tau


def conservative_smoothness_threshold(d: int, tau: float) -> float:
    """d/2 + (d-1) tau: the larger of the two orders quoted for coefficient sums."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    return d / 2.0 + (d - 1) * tau


def check_declared_smoothness(g: PeriodicFunction, tau: float) -> None:
    """Warn when a declared smoothness sits below the conservative threshold."""
    if g.declared_smoothness is None:
        return
    needed = conservative_smoothness_threshold(g.dim, tau)
    if g.declared_smoothness <= needed:
        warnings.warn(
            f"declared smoothness {g.declared_smoothness} is not above the "
            f"threshold {needed} for tau = {tau}", SmoothnessWarning, stacklevel=2)


def load_periodic(source) -> PeriodicFunction:
    """Read {"dim": d, "coeffs": [{"m": [..], "re": a, "im": b}, ...]}."""
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as f:
            doc = json.load(f)
    d = int(doc["dim"])
    entries = [(tuple(int(v) for v in e["m"]), complex(float(e.get("re", 0.0)), float(e.get("im", 0.0))))
               for e in doc["coeffs"]]
    return from_coefficients(d, entries, doc.get("declared_smoothness"))


def periodic_to_dict(g: PeriodicFunction) -> dict:
    coeffs = [{"m": list(m), "re": c.real, "im": c.imag}
              for m, c in sorted(g.coefficients.items())]
    doc = {"dim": g.dim, "coeffs": coeffs}
    if g.declared_smoothness is not None:
        doc["declared_smoothness"] = g.declared_smoothness
    return doc
