"""Oscillatory integrals of exp(2 pi i lambda m . y) over flat face patches.

A patch is the box-constrained piece of a hyperplane
Pi = {y : nu . y = c, y_j in [a_j, b_j] for j != k}; eliminating y_k turns
the surface integral into a product of one-dimensional integrals with an
explicit Jacobian 1/|nu_k| and phase exp(2 pi i lambda c m_k / nu_k).
The adaptive tensor quadrature below validates that derivation numerically;
decay envelopes record how fast the integrals fall with lambda for
Diophantine normals, and face/boundary averages measure equidistribution of
lambda-dilated boundary data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceeded,
    NotApplicable,
    UnsupportedDimension,
    ValidationError,
    ZeroNormalComponent,
)
from .geometry import Face, ConvexPolytope, faces, lattice_partition

_SMALL_PHASE = 1e-13
_GAUSS_ORDER = 8
_GLX, _GLW = np.polynomial.legendre.leggauss(_GAUSS_ORDER)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FacePatch:
    """Box piece of a hyperplane with one eliminated coordinate.

    ``bounds`` has one (a_j, b_j) row per coordinate j != axis, in
    increasing j order; every point of the patch satisfies nu . y = c.
    """

    normal: np.ndarray
    offset: float
    axis: int
    bounds: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.normal, dtype=float)
        d = nu.size
        if abs(np.linalg.norm(nu) - 1.0) > 1e-10:
            raise ValidationError("patch normal must be a unit vector")
        if not 0 <= self.axis < d:
            raise ValidationError(f"axis {self.axis} out of range for d = {d}")
        if abs(nu[self.axis]) <= 1e-12:
            raise ZeroNormalComponent("eliminated axis has zero normal component")
        b = np.asarray(self.bounds, dtype=float).reshape(d - 1, 2)
        if np.any(b[:, 1] <= b[:, 0]):
            raise ValidationError("bounds must satisfy a_j < b_j")
        object.__setattr__(self, "normal", _readonly(nu))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "bounds", _readonly(b))

    @property
    def dim(self) -> int:
        return self.normal.size

    @property
    def free_axes(self) -> list[int]:
        return [j for j in range(self.dim) if j != self.axis]

    def lift(self, u: np.ndarray) -> np.ndarray:
        """Map free-coordinate rows u to points on the patch's hyperplane."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        nu, k = self.normal, self.axis
        out = np.empty((len(u), self.dim))
        out[:, self.free_axes] = u
        out[:, k] = (self.offset - u @ nu[self.free_axes]) / nu[k]
        return out


@dataclass(frozen=True, eq=False)
class OscValue:
    """One evaluated oscillatory integral with its provenance."""

    value: complex
    lam: float
    m: tuple[int, ...]
    method: str  # "closed_form" | "quadrature"


def _checked(value: complex, lam: float, m, method: str, measure: float) -> OscValue:
    value = complex(value)
    if abs(value) > measure * (1.0 + 1e-9) + 1e-12:
        raise ValidationError(
            f"|integral| = {abs(value)!r} exceeds the patch measure {measure!r}")
    return OscValue(value=value, lam=float(lam), m=tuple(int(v) for v in m), method=method)


def patch_measure(patch: FacePatch) -> float:
    """Surface measure: prod (b_j - a_j) / |nu_k| for a unit normal."""
    widths = patch.bounds[:, 1] - patch.bounds[:, 0]
    return float(np.prod(widths) / abs(patch.normal[patch.axis]))


def patch_from_face(face: Face, axis: int | None = None) -> FacePatch:
    """Exact patch description of a 2-D face (a segment)."""
    if face.dim != 2:
        raise UnsupportedDimension("patch_from_face covers d = 2 faces; use lattice cells for d = 3")
    nu = face.normal
    if axis is None:
        axis = int(np.argmax(np.abs(nu)))
    j = 1 - axis
    lo, hi = sorted(float(v[j]) for v in face.vertices)
    if hi - lo <= 1e-14:
        raise ZeroNormalComponent("face is parallel to the kept axis; choose the other one")
    return FacePatch(normal=nu, offset=face.offset, axis=axis, bounds=np.array([[lo, hi]]))


def frequency_axis(m) -> int:
    """Index of the first nonzero component of m (the index-set convention)."""
    for k, v in enumerate(m):
        if int(v) != 0:
            return k
    raise NotApplicable("m = 0 has no oscillation axis")


# ---------------------------------------------------------------------------
# closed form and quadrature oracle
# ---------------------------------------------------------------------------

def _interval_factor(theta: float, lam: float, a: float, b: float) -> complex:
    """int_a^b exp(2 pi i lam theta t) dt, stable for small phases.

    Uses the exact midpoint-sinc form, which equals
    (exp(2 pi i lam theta b) - exp(2 pi i lam theta a)) / (2 pi i lam theta)
    without subtractive cancellation; below the small-phase threshold the
    limit (b - a) is returned directly.
    """
    w = lam * theta
    if abs(w) <= _SMALL_PHASE * max(abs(a), abs(b), 1.0):
        return complex(b - a)
    return (b - a) * np.exp(2j * np.pi * w * (a + b) / 2.0) * np.sinc(w * (b - a))


def patch_integral_closed_form(patch: FacePatch, lam: float, m) -> OscValue:
    """Exact integral of exp(2 pi i lam m . y) over the patch.

    I = (1/|nu_k|) exp(2 pi i lam c m_k / nu_k)
        prod_{j != k} int_{a_j}^{b_j} exp(2 pi i lam theta_j y_j) dy_j,
    with theta_j = m_j - m_k nu_j / nu_k.
    """
    if lam <= 0:
        raise ValidationError("lambda must be positive")
    m = np.asarray(m, dtype=float)
    if m.size != patch.dim:
        raise ValidationError(f"m has {m.size} components, expected {patch.dim}")
    nu, k, c = patch.normal, patch.axis, patch.offset
    mk = m[int(k)]
    value = np.exp(2j * np.pi * lam * c * mk / nu[k]) / abs(nu[k])
    for row, j in enumerate(patch.free_axes):
        theta = m[j] - mk * nu[j] / nu[k]
        a, b = patch.bounds[row]
        value *= _interval_factor(float(theta), lam, float(a), float(b))
    return _checked(value, lam, m.astype(int), "closed_form", patch_measure(patch))


def _axis_sum(patch: FacePatch, m: np.ndarray, lam: float, row: int,
              n_panels: int, u0: np.ndarray, phi0: float) -> complex:
    """Panel Gauss sum of exp(2 pi i lam (m . lift - phi0)) along one free axis."""
    a, b = patch.bounds[row]
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GLX[None, :]).ravel()
    weights = (half[:, None] * _GLW[None, :]).ravel()
    pts = np.tile(u0, (nodes.size, 1))
    pts[:, row] = nodes
    phase = patch.lift(pts) @ m - phi0
    return complex(np.sum(weights * np.exp(2j * np.pi * lam * phase)))


def patch_integral_quadrature(patch: FacePatch, lam: float, m, tol: float = 1e-10,
                              max_panels: int = 4_000_000) -> OscValue:
    """Adaptive tensor quadrature of exp(2 pi i lam m . y) over the patch.

    Panel-doubling Gauss rule per free axis; initial panels are sized to at
    most a quarter period of the fastest phase component, and panel counts
    double until the change is below tol (absolute on the value). The phase
    is affine in the free coordinates, so the tensor-product Gauss sum over
    the box factorizes exactly into per-axis sums; only the parametrization
    of the surface is shared with the closed form, not its antiderivatives.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if lam <= 0:
        raise ValidationError("lambda must be positive")
    m = np.asarray(m, dtype=float)
    nu, k = patch.normal, patch.axis
    jac = 1.0 / abs(nu[k])
    u0 = 0.5 * (patch.bounds[:, 0] + patch.bounds[:, 1])
    phi0 = float(patch.lift(u0)[0] @ m)
    # effective per-axis frequency from the lift map itself
    rates = []
    for row in range(patch.dim - 1):
        e = np.zeros(patch.dim - 1)
        e[row] = 1.0
        rates.append(abs(float(patch.lift(u0 + e)[0] @ m) - phi0))
    widths = patch.bounds[:, 1] - patch.bounds[:, 0]
    panels = [max(1, int(np.ceil(4.0 * lam * r * w))) for r, w in zip(rates, widths)]

    prev = None
    while True:
        if sum(panels) > max_panels:
            raise BudgetExceeded(f"panel count {sum(panels)} exceeds cap {max_panels}")
        value = jac * np.exp(2j * np.pi * lam * phi0)
        for row in range(patch.dim - 1):
            value *= _axis_sum(patch, m, lam, row, panels[row], u0, phi0)
        if prev is not None and abs(value - prev) <= tol:
            return _checked(value, lam, m.astype(int), "quadrature",
                            patch_measure(patch) * (1.0 + 1e-12) + tol)
        prev = value
        panels = [2 * n for n in panels]


# ---------------------------------------------------------------------------
# decay envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecayEnvelope:
    """Per-lambda normalized moduli lambda^{d-1} |I| / |m|_1^{(d-1) tau}."""

    m: tuple[int, ...]
    tau: float
    rows: tuple  # (lam, value, ratio) triples
    sup_ratio: float


def decay_envelope(patch: FacePatch, m, lambdas, tau: float) -> DecayEnvelope:
    """Measure the decay constant of the closed-form integrals on a lambda grid.

    Requires m_k != 0 for the patch's eliminated axis; the normalization
    lambda^{d-1} |I| / |m|_1^{(d-1) tau} stays bounded exactly when the decay
    estimate for Diophantine normals applies.
    """
    m = tuple(int(v) for v in np.atleast_1d(m))
    if int(m[patch.axis]) == 0:
        raise NotApplicable("m has zero component along the eliminated axis")
    d = patch.dim
    l1 = float(sum(abs(v) for v in m))
    rows = []
    sup = 0.0
    for lam in lambdas:
        val = patch_integral_closed_form(patch, float(lam), m).value
        ratio = abs(val) * float(lam) ** (d - 1) / l1 ** ((d - 1) * tau)
        rows.append((float(lam), val, ratio))
        sup = max(sup, ratio)
    return DecayEnvelope(m=m, tau=float(tau), rows=tuple(rows), sup_ratio=float(sup))


def write_envelope_csv(path, envelope: DecayEnvelope) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lambda", "re", "im", "abs", "ratio"])
        for lam, val, ratio in envelope.rows:
            w.writerow([repr(lam), repr(val.real), repr(val.imag),
                        repr(abs(val)), repr(ratio)])


# ---------------------------------------------------------------------------
# face and boundary averages (equidistribution)
# ---------------------------------------------------------------------------

def _segment_integral(p: np.ndarray, q: np.ndarray, lam: float, m: np.ndarray) -> complex:
    """int over the segment [p, q] of exp(2 pi i lam m . y) d sigma."""
    L = float(np.linalg.norm(q - p))
    w = lam * float(m @ (q - p))
    mid = 0.5 * (p + q)
    if abs(w) <= _SMALL_PHASE:
        return L * np.exp(2j * np.pi * lam * float(m @ mid))
    return L * np.exp(2j * np.pi * lam * float(m @ mid)) * np.sinc(w)


_DUFFY_S, _DUFFY_T = np.meshgrid(0.5 * (_GLX + 1.0), 0.5 * (_GLX + 1.0), indexing="ij")
_DUFFY_W = 0.25 * np.outer(_GLW, _GLW)


def _triangle_quad(tris: np.ndarray, lam: float, phase_fn) -> complex:
    """Gauss-Duffy quadrature of exp(2 pi i lam phase) over planar triangles.

    ``tris`` is (T, 3, 2) in the projection plane; phase_fn maps (N, 2)
    points to the phase m . lift(u).
    """
    v0 = tris[:, 0][:, None, None, :]
    e1 = (tris[:, 1] - tris[:, 0])[:, None, None, :]
    e2 = (tris[:, 2] - tris[:, 0])[:, None, None, :]
    s = _DUFFY_S[None, :, :, None]
    t = _DUFFY_T[None, :, :, None]
    pts = v0 + s * ((1.0 - t) * e1 + t * e2)
    areas2 = np.abs((tris[:, 1, 0] - tris[:, 0, 0]) * (tris[:, 2, 1] - tris[:, 0, 1])
                    - (tris[:, 2, 0] - tris[:, 0, 0]) * (tris[:, 1, 1] - tris[:, 0, 1]))
    w = areas2[:, None, None] * _DUFFY_W[None, :, :] * _DUFFY_S[None, :, :]
    phase = phase_fn(pts.reshape(-1, 2)).reshape(pts.shape[:3])
    return complex(np.sum(w * np.exp(2j * np.pi * lam * phase)))


def _subdivide(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])


def _polygon_oscillatory_quad(verts2d: np.ndarray, lam: float, patch_like: FacePatch,
                              m: np.ndarray, tol: float, max_tris: int = 400_000) -> complex:
    """Numerical integral of exp(2 pi i lam m . lift(u)) over a convex 2-D region."""
    centroid = verts2d.mean(axis=0)
    tris = np.stack([
        np.tile(centroid, (len(verts2d), 1)),
        verts2d,
        np.roll(verts2d, -1, axis=0),
    ], axis=1)
    jac = 1.0 / abs(patch_like.normal[patch_like.axis])

    def phase(u):
        return patch_like.lift(u) @ m

    # in-plane frequency from the affine lift, for subdivision sizing
    g = np.array([float(patch_like.lift(centroid + e)[0] @ m - patch_like.lift(centroid)[0] @ m)
                  for e in np.eye(2)])
    diam = float(np.max(np.linalg.norm(verts2d - centroid, axis=1))) * 2.0
    target = 1.0 / max(8.0 * lam * np.linalg.norm(g), 1e-9)
    levels = max(0, int(np.ceil(np.log2(max(diam / target, 1.0)))))
    for _ in range(min(levels, 30)):
        if len(tris) * 4 > max_tris:
            raise BudgetExceeded("triangle subdivision exceeds cap")
        edge = max(np.max(np.linalg.norm(tris[:, 1] - tris[:, 0], axis=1)),
                   np.max(np.linalg.norm(tris[:, 2] - tris[:, 1], axis=1)))
        if edge <= target:
            break
        tris = _subdivide(tris)
    prev = jac * _triangle_quad(tris, lam, phase)
    while True:
        if len(tris) * 4 > max_tris:
            raise BudgetExceeded("triangle subdivision exceeds cap")
        tris = _subdivide(tris)
        value = jac * _triangle_quad(tris, lam, phase)
        if abs(value - prev) <= tol:
            return value
        prev = value


def face_average(face: Face, g, lam: float, rho: float | None = None,
                 tol: float = 1e-10) -> complex:
    """Average of g(lam y) over one face.

    d = 2 faces are a single segment and use exact per-frequency integrals;
    d = 3 faces are covered by lattice-partition cells (closed-form patch
    integrals) plus the numerically integrated leftover.
    """
    if face.dim == 2:
        p, q = face.vertices
        total = 0.0 + 0.0j
        for m, cm in sorted(g.coefficients.items()):
            total += cm * _segment_integral(p, q, lam, np.asarray(m, dtype=float))
        return complex(total / face.measure)
    if face.dim != 3:
        raise UnsupportedDimension("face averages implemented for d = 2, 3")

    nu = face.normal
    axis = int(np.argmax(np.abs(nu)))
    if rho is None:
        rho = max(np.ptp(face.vertices, axis=0)) / 8.0
    part = lattice_partition(face, axis, rho)
    others = [j for j in range(3) if j != axis]
    total = 0.0 + 0.0j
    for m, cm in sorted(g.coefficients.items()):
        mv = np.asarray(m, dtype=float)
        contrib = 0.0 + 0.0j
        for cell in part.cells:
            u = cell.vertices[:, others]
            bounds = np.stack([u.min(axis=0), u.max(axis=0)], axis=1)
            patch = FacePatch(normal=nu, offset=face.offset, axis=axis, bounds=bounds)
            contrib += patch_integral_closed_form(patch, lam, m).value
        helper = FacePatch(normal=nu, offset=face.offset, axis=axis,
                           bounds=np.array([[0.0, 1.0], [0.0, 1.0]]))
        for piece in part.leftover.pieces:
            contrib += _polygon_oscillatory_quad(piece[:, others], lam, helper, mv, tol)
        total += cm * contrib
    return complex(total / face.measure)


def boundary_average(poly: ConvexPolytope, g, lam: float, rho: float | None = None,
                     tol: float = 1e-10) -> complex:
    """Measure-weighted average of g(lam y) over the whole boundary."""
    fs = faces(poly)
    num = 0.0 + 0.0j
    den = 0.0
    for f in fs:
        mu = f.measure
        num += mu * face_average(f, g, lam, rho=rho, tol=tol)
        den += mu
    return complex(num / den)
