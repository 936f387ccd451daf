"""Coordinate charts, evaluable tensor fields, and Riemannian machinery.

Fields are closures over chart points rather than gridded data: they expose
``evaluate`` and ``partials`` (analytic closures when available, 4th-order
centered finite differences otherwise).  All consumers evaluate in batch:
points have shape ``(..., 3)`` and component indices live on trailing axes.

Index conventions used throughout:

    h[..., a, b]            metric components h_ab
    dh[..., a, b, c]        partial derivative d_c h_ab
    d2h[..., a, b, c, d]    second partial d_c d_d h_ab (symmetric in c, d)
    gamma[..., a, b, c]     Christoffel symbols Gamma^a_bc
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DomainError, SingularMetric

__all__ = [
    "Chart",
    "TensorField",
    "CurvatureResult",
    "christoffel",
    "curvature",
    "lie_derivative",
]


# ---------------------------------------------------------------------------
# charts

@dataclass(frozen=True)
class Chart:
    """A 3-coordinate chart: a box, optionally punctured at singular loci.

    ``punctures`` are chart points excluded from the domain together with a
    ball of radius ``guard`` around each (e.g. puncture points of
    Brill-Lindquist data, the coordinate origin of a polar chart).
    """

    names: tuple
    bounds: tuple = (((-1e6, 1e6),) * 3)
    punctures: tuple = ()
    guard: float = DEFAULT_TOLERANCES.puncture_guard

    def __post_init__(self):
        if len(self.names) != 3:
            raise ValueError("charts are three dimensional; got %r" % (self.names,))
        if len(self.bounds) != 3:
            raise ValueError("need bounds for exactly 3 coordinates")

    def contains(self, points) -> np.ndarray:
        """Boolean mask of shape ``points.shape[:-1]``."""
        pts = np.asarray(points, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for c, (lo, hi) in enumerate(self.bounds):
            ok &= (pts[..., c] >= lo) & (pts[..., c] <= hi)
        for p in self.punctures:
            d = np.linalg.norm(pts - np.asarray(p, dtype=float), axis=-1)
            ok &= d > self.guard
        return ok

    def validate(self, points):
        ok = self.contains(points)
        if not np.all(ok):
            n_bad = int(np.size(ok) - np.count_nonzero(ok))
            raise DomainError(
                "%d point(s) outside chart domain (bounds or puncture guard %g)"
                % (n_bad, self.guard)
            )

    def sample(self, n, rng, rmin=0.3, rmax=3.0) -> np.ndarray:
        """Deterministic test points: uniform directions, radii in [rmin, rmax].

        Sampling an annulus keeps points clear of punctures and of the far
        chart boundary for every catalog entry.
        """
        r = rng.uniform(rmin, rmax, size=n)
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        pts = r[:, None] * v
        self.validate(pts)
        return pts


def cartesian_chart(extent=1e6, punctures=(), guard=DEFAULT_TOLERANCES.puncture_guard):
    return Chart(
        names=("x", "y", "z"),
        bounds=(((-extent, extent),) * 3),
        punctures=tuple(tuple(p) for p in punctures),
        guard=guard,
    )


def spherical_chart(rmax=1e6, guard=DEFAULT_TOLERANCES.puncture_guard):
    # open polar angles; no node of any consumer sits on the axis
    eps = 1e-8
    return Chart(
        names=("r", "theta", "phi"),
        bounds=((guard, rmax), (eps, np.pi - eps), (0.0, 2.0 * np.pi)),
    )


# ---------------------------------------------------------------------------
# tensor fields

def _fd_first(fn, points, steps):
    """4th-order centered first derivatives, appended as a trailing axis."""
    pts = np.asarray(points, dtype=float)
    out = None
    for c in range(3):
        h = steps[..., c]
        acc = 0.0
        for off, w in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
            shifted = pts.copy()
            shifted[..., c] = shifted[..., c] + off * h
            acc = acc + w * np.asarray(fn(shifted), dtype=float)
        d = acc / (12.0 * h[(...,) + (None,) * (acc.ndim - h.ndim)])
        if out is None:
            out = np.empty(d.shape + (3,), dtype=float)
        out[..., c] = d
    return out


class TensorField:
    """An evaluable tensor field of rank ``(n_up, n_down)`` on a chart.

    Components are ordered contravariant-first; a vector has shape ``(3,)``,
    a metric ``(3, 3)`` with rank ``(0, 2)``.  ``fn``/``d1``/``d2`` must
    broadcast over leading point axes.  Declared ``symmetries`` (pairs of
    component-axis positions) are validated at every evaluation.
    """

    def __init__(self, rank, fn, d1=None, d2=None, chart: Optional[Chart] = None,
                 symmetries: Sequence = (), name="",
                 tol: Tolerances = DEFAULT_TOLERANCES):
        self.rank = (int(rank[0]), int(rank[1]))
        self.fn = fn
        self.d1 = d1
        self.d2 = d2
        self.chart = chart
        self.symmetries = tuple(tuple(s) for s in symmetries)
        self.name = name
        self.tol = tol

    @property
    def n_components(self):
        return self.rank[0] + self.rank[1]

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.chart is not None:
            self.chart.validate(pts)
        val = np.asarray(self.fn(pts), dtype=float)
        self._check_symmetries(val, pts.ndim - 1)
        return val

    def _check_symmetries(self, val, n_batch):
        if not self.symmetries:
            return
        scale = np.max(np.abs(val))
        if scale == 0.0:
            return
        for (i, j) in self.symmetries:
            ax_i, ax_j = n_batch + i, n_batch + j
            err = np.max(np.abs(val - np.swapaxes(val, ax_i, ax_j)))
            if err > self.tol.tensor_symmetry_rel * scale:
                raise ValueError(
                    "field %r violates declared symmetry (%d,%d): "
                    "relative residual %.3e" % (self.name, i, j, err / scale)
                )

    def _steps(self, pts):
        t = self.tol
        return np.maximum(t.fd_step, t.fd_rel_step * np.abs(pts))

    def partials(self, points, order=1, richardson=False) -> np.ndarray:
        """Component partial derivatives, derivative indices appended last.

        Order 1 returns ``(..., comp, 3)``; order 2 returns
        ``(..., comp, 3, 3)``.  Analytic closures are used when present;
        otherwise 4th-order centered differences of the next available
        closure (so order-2 falls back to differencing an analytic ``d1``).
        ``richardson=True`` adds one extrapolation level to FD results.
        """
        pts = np.asarray(points, dtype=float)
        if self.chart is not None:
            self.chart.validate(pts)
        if order == 1:
            if self.d1 is not None:
                return np.asarray(self.d1(pts), dtype=float)
            return self._fd(lambda p: self.fn(p), pts, richardson)
        if order == 2:
            if self.d2 is not None:
                return np.asarray(self.d2(pts), dtype=float)
            if self.d1 is not None:
                return self._fd(lambda p: self.d1(p), pts, richardson)
            return self._fd(lambda p: self.partials(p, 1, richardson), pts, richardson)
        raise ValueError("only orders 1 and 2 are supported")

    def _fd(self, fn, pts, richardson):
        steps = self._steps(pts)
        d = _fd_first(fn, pts, steps)
        if not richardson:
            return d
        d_half = _fd_first(fn, pts, steps / 2.0)
        return (16.0 * d_half - d) / 15.0


def constant_vector_field(components, chart=None, name="") -> TensorField:
    v = np.asarray(components, dtype=float)

    def fn(pts):
        return np.broadcast_to(v, pts.shape[:-1] + (3,))

    def d1(pts):
        return np.zeros(pts.shape[:-1] + (3, 3))

    return TensorField((1, 0), fn, d1=d1, d2=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3)),
                       chart=chart, name=name or "translation")


def rotation_vector_field(axis, chart=None, name="") -> TensorField:
    """Rotation generator about ``axis`` through the origin: x = axis ^ r."""
    a = np.asarray(axis, dtype=float)
    grad = np.array([[0.0, -a[2], a[1]],
                     [a[2], 0.0, -a[0]],
                     [-a[1], a[0], 0.0]])  # d_c x^a, constant

    def fn(pts):
        return np.cross(np.broadcast_to(a, pts.shape), pts)

    def d1(pts):
        return np.broadcast_to(grad, pts.shape[:-1] + (3, 3))

    return TensorField((1, 0), fn, d1=d1, d2=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3)),
                       chart=chart, name=name or "rotation")


def radial_unit_field(chart=None, name="") -> TensorField:
    """Unit coordinate-radial vector x^a = x_a / |x| (Killing on product slices)."""

    def fn(pts):
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        return pts / r

    def d1(pts):
        r = np.linalg.norm(pts, axis=-1)
        eye = np.eye(3)
        return (eye / r[..., None, None]
                - np.einsum("...a,...c->...ac", pts, pts) / r[..., None, None] ** 3)

    return TensorField((1, 0), fn, d1=d1, chart=chart, name=name or "radial")


# ---------------------------------------------------------------------------
# Riemannian machinery

def _metric_inverse(h, tol: Tolerances):
    det = np.linalg.det(h)
    scale = np.max(np.abs(h), axis=(-2, -1)) ** 3
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) <= tol.metric_det_floor * np.maximum(scale, 1e-300)):
        raise SingularMetric("metric determinant vanishes (or is non-finite) at a point")
    if np.any(det <= 0):
        raise SingularMetric("metric is not positive definite (det <= 0)")
    try:
        return np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - det check fires first
        raise SingularMetric(str(exc)) from exc


def _christoffel_from(h, dh, tol: Tolerances):
    hinv = _metric_inverse(h, tol)
    # bracket[d,b,c] = d_b h_dc + d_c h_db - d_d h_bc
    bracket = np.swapaxes(dh, -1, -2) + dh - np.moveaxis(dh, -1, -3)
    gamma = 0.5 * np.einsum("...ad,...dbc->...abc", hinv, bracket)
    return gamma, hinv, bracket


def christoffel(metric: TensorField, points, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Christoffel symbols Gamma^a_bc of ``metric`` at ``points``."""
    h = metric.evaluate(points)
    dh = metric.partials(points, 1)
    gamma, _, _ = _christoffel_from(h, dh, tol)
    return gamma


@dataclass(frozen=True)
class CurvatureResult:
    riemann: np.ndarray   # R^a_bcd
    ricci: np.ndarray     # R_bd
    scalar: np.ndarray


def curvature(metric: TensorField, points, tol: Tolerances = DEFAULT_TOLERANCES) -> CurvatureResult:
    """Riemann, Ricci and scalar curvature of ``metric`` at ``points``."""
    h = metric.evaluate(points)
    dh = metric.partials(points, 1)
    d2h = metric.partials(points, 2)
    gamma, hinv, bracket = _christoffel_from(h, dh, tol)

    # d_e Gamma^a_bc, via d_e h^ad = -h^af h^dg d_e h_fg
    dhinv = -np.einsum("...af,...dg,...fge->...ade", hinv, hinv, dh)
    dbracket = (np.swapaxes(d2h, -2, -3)      # d2h[d,c,b,e] = d_e d_b h_dc
                + d2h                          # d2h[d,b,c,e] = d_e d_c h_db
                - np.moveaxis(d2h, -2, -4))    # d2h[b,c,d,e] = d_e d_d h_bc
    dgamma = 0.5 * (np.einsum("...ade,...dbc->...abce", dhinv, bracket)
                    + np.einsum("...ad,...dbce->...abce", hinv, dbracket))

    riemann = (np.einsum("...adbc->...abcd", dgamma)
               - np.einsum("...acbd->...abcd", dgamma)
               + np.einsum("...ace,...edb->...abcd", gamma, gamma)
               - np.einsum("...ade,...ecb->...abcd", gamma, gamma))
    ricci = np.einsum("...abad->...bd", riemann)
    scalar = np.einsum("...bd,...bd->...", hinv, ricci)
    return CurvatureResult(riemann=riemann, ricci=ricci, scalar=scalar)


def lie_derivative(t: TensorField, x: TensorField, points) -> np.ndarray:
    """Lie derivative of ``t`` along the vector field ``x`` at ``points``.

    Uses the partial-derivative formula; connection terms cancel, so the
    result agrees with the covariant expression for any torsion-free
    connection.
    """
    if x.rank != (1, 0):
        raise ValueError("x must be a vector field")
    pts = np.asarray(points, dtype=float)
    T = t.evaluate(pts)
    dT = t.partials(pts, 1)
    X = x.evaluate(pts)
    dX = x.partials(pts, 1)  # dX[..., a, c] = d_c x^a

    n_batch = pts.ndim - 1
    n_up, n_down = t.rank
    ncomp = n_up + n_down

    idx = (Ellipsis,) + (None,) * ncomp + (slice(None),)
    out = np.sum(dT * X[idx], axis=-1)

    for slot in range(n_up):
        ax = n_batch + slot
        # -T^{..c..} d_c x^a  on contravariant slot
        term = np.einsum("...ac,...c->...a", dX, np.moveaxis(T, ax, -1))
        out = out - np.moveaxis(term, -1, ax)
    for slot in range(n_down):
        ax = n_batch + n_up + slot
        # +T_{..c..} d_a x^c  on covariant slot
        term = np.einsum("...ca,...c->...a", dX, np.moveaxis(T, ax, -1))
        out = out + np.moveaxis(term, -1, ax)
    return out
