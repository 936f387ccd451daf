"""Closed spherical-topology surfaces embedded in a slice.

A surface is a smooth map from the grid sphere into the chart, stored either
as a radial graph (center + strictly positive profile) or as a bare nodal
embedding (offset and flowed surfaces need no graph structure).  The induced
geometry holds every per-node field the stability and symmetry layers use:
induced metric, outward unit normal, the shape tensor D_a n_b, the projected
extrinsic-curvature trace, mean curvature, both null expansions, outgoing
shear, the rotation 1-form, and the intrinsic scalar curvature.

Tangential calculus keeps a strict discipline: spectral derivatives are only
ever applied to nodal fields that are smooth scalars on the sphere (chart
components of smooth tensors, or invariant scalars).  Grid-frame components
like q_AB appear only as pointwise algebraic factors, which is what preserves
spectral accuracy through the polar caps.  The intrinsic curvature follows
the same discipline via the Bochner identity applied to the three chart
coordinate functions: summed over f in {x, y, z},

    R * |grad f|^2 = Lap|grad f|^2 - 2 |Hess f|^2 - 2 <grad f, grad Lap f>

with the sum of |grad f|^2 equal to the (nowhere vanishing) trace of the
inverse induced metric in the chart frame.
"""

import json
from typing import Callable, Optional, Union

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DegenerateMetric, OffsetOutOfDomain
from .fields import _metric_inverse, christoffel
from .initial_data import InitialDataSet
from .sphere import SurfaceGrid

__all__ = [
    "EmbeddedSurface",
    "SurfaceGeometry",
    "induced_geometry",
    "integrate",
    "normal_variation",
]


class EmbeddedSurface:
    """A closed 2-surface given by nodal chart positions over a sphere grid."""

    def __init__(self, data: InitialDataSet, grid: SurfaceGrid, embedding,
                 center=(0.0, 0.0, 0.0), profile=None, finder_report=None,
                 tol: Tolerances = DEFAULT_TOLERANCES):
        self.data = data
        self.grid = grid
        self.center = np.asarray(center, dtype=float)
        self.X = np.asarray(embedding, dtype=float)
        if self.X.shape != (grid.ntheta, grid.nphi, 3):
            raise ValueError("embedding must have shape (ntheta, nphi, 3)")
        self.profile = None if profile is None else np.asarray(profile, dtype=float)
        self.finder_report = finder_report
        self.tol = tol
        if self.profile is not None and np.any(self.profile <= 0):
            raise ValueError("radial profile must be strictly positive")
        data.chart.validate(self.X)
        self.X.setflags(write=False)
        if self.profile is not None:
            self.profile.setflags(write=False)
        self._geometry = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_profile(cls, data, profile, center=(0.0, 0.0, 0.0),
                     grid: Optional[SurfaceGrid] = None, **kw):
        grid = grid or SurfaceGrid()
        prof = np.asarray(profile, dtype=float)
        if prof.ndim == 0:
            prof = np.full((grid.ntheta, grid.nphi), float(prof))
        elif prof.shape == (grid.ntheta,):
            prof = np.repeat(prof[:, None], grid.nphi, axis=1)
        elif prof.shape != (grid.ntheta, grid.nphi):
            raise ValueError("profile must be scalar, (ntheta,) or (ntheta, nphi)")
        X = np.asarray(center, dtype=float) + prof[..., None] * grid.unit_directions()
        return cls(data, grid, X, center=center, profile=prof, **kw)

    @classmethod
    def sphere(cls, data, radius, center=(0.0, 0.0, 0.0), grid=None, **kw):
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls.from_profile(data, float(radius), center=center, grid=grid, **kw)

    def offset_surface(self, displacement) -> "EmbeddedSurface":
        """Surface moved along the unit normal by the nodal field ``displacement``."""
        n = self.geometry.normal
        X = self.X + np.asarray(displacement)[..., None] * n
        if not np.all(self.data.chart.contains(X)):
            raise OffsetOutOfDomain("normally offset surface left the chart domain")
        return EmbeddedSurface(self.data, self.grid, X, center=self.center, tol=self.tol)

    def flowed_surface(self, x, delta) -> "EmbeddedSurface":
        """Surface dragged along the vector field ``x`` by flow parameter ``delta``."""
        X = self.X + delta * x.evaluate(self.X)
        if not np.all(self.data.chart.contains(X)):
            raise OffsetOutOfDomain("flowed surface left the chart domain")
        return EmbeddedSurface(self.data, self.grid, X, center=self.center, tol=self.tol)

    # -- geometry -----------------------------------------------------------

    @property
    def geometry(self) -> "SurfaceGeometry":
        if self._geometry is None:
            self._geometry = SurfaceGeometry(self)
        return self._geometry

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        if self.profile is None:
            raise ValueError("only radial-graph surfaces serialize to JSON")
        return json.dumps({
            "schema_version": 1,
            "ntheta": self.grid.ntheta,
            "nphi": self.grid.nphi,
            "center": [float(c) for c in self.center],
            "profile": [[float(v) for v in row] for row in self.profile],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, data: InitialDataSet, text: str, grid=None) -> "EmbeddedSurface":
        payload = json.loads(text)
        grid = grid or SurfaceGrid(payload["ntheta"], payload["nphi"])
        if (grid.ntheta, grid.nphi) != (payload["ntheta"], payload["nphi"]):
            raise ValueError("grid sizes disagree with serialized surface")
        return cls.from_profile(data, np.asarray(payload["profile"], dtype=float),
                                center=payload["center"], grid=grid)


class SurfaceGeometry:
    """Induced geometry of an embedded surface, one value per node.

    Chart-index fields have trailing component axes; grid-index fields use
    axes of length 2 ordered (theta, phi).
    """

    def __init__(self, surface: EmbeddedSurface):
        self.surface = surface
        self.grid = surface.grid
        self.tol = surface.tol
        data = surface.data
        g = self.grid
        X = surface.X

        self.metric = data.h.evaluate(X)
        self.metric_inv = _metric_inverse(self.metric, self.tol)
        self.gamma = christoffel(data.h, X, self.tol)
        self.K_slice = data.K.evaluate(X)

        # tangents e_A^a from spectral derivatives of the embedding
        self.tangents = np.stack([g.dtheta(X), g.dphi(X)], axis=-2)  # (..., A, a)
        self.q = np.einsum("...Aa,...ab,...Bb->...AB", self.tangents,
                           self.metric, self.tangents)
        det_q = self.q[..., 0, 0] * self.q[..., 1, 1] - self.q[..., 0, 1] * self.q[..., 1, 0]
        if np.any(det_q <= 0):
            raise DegenerateMetric("induced metric is degenerate at a node")
        self.det_q = det_q
        self.q_inv = np.empty_like(self.q)
        self.q_inv[..., 0, 0] = self.q[..., 1, 1] / det_q
        self.q_inv[..., 1, 1] = self.q[..., 0, 0] / det_q
        self.q_inv[..., 0, 1] = -self.q[..., 0, 1] / det_q
        self.q_inv[..., 1, 0] = -self.q[..., 1, 0] / det_q

        # outward unit normal: the coordinate cross product annihilates both
        # tangents; normalize with the slice metric, orient radially outward
        N = np.cross(self.tangents[..., 0, :], self.tangents[..., 1, :])
        norm2 = np.einsum("...ab,...a,...b->...", self.metric_inv, N, N)
        n_dn = N / np.sqrt(norm2)[..., None]
        n_up = np.einsum("...ab,...b->...a", self.metric_inv, n_dn)
        radial = X - surface.center
        orient = np.sum(n_up * radial, axis=-1)
        if np.any(orient == 0):
            raise DegenerateMetric("cannot orient the unit normal at a node")
        flip = np.sign(orient)[..., None]
        self.normal = n_up * flip
        self.normal_form = n_dn * flip

        # shape tensor y_AB = e_A^a e_B^b grad_a n_b (slice connection)
        dn = np.stack([g.dtheta(self.normal_form), g.dphi(self.normal_form)], axis=-2)
        cov = dn - np.einsum("...cab,...Aa,...c->...Ab", self.gamma,
                             self.tangents, self.normal_form)
        self.shape_tensor = np.einsum("...Ab,...Bb->...AB", cov, self.tangents)

        # projected extrinsic curvature and the scalar inventory
        self.K_proj = np.einsum("...Aa,...ab,...Bb->...AB", self.tangents,
                                self.K_slice, self.tangents)
        self.k_trace = np.einsum("...AB,...AB->...", self.q_inv, self.K_proj)
        self.mean_curvature = np.einsum("...AB,...AB->...", self.q_inv, self.shape_tensor)
        self.expansion_out = self.k_trace + self.mean_curvature
        self.expansion_in = self.k_trace - self.mean_curvature

        deform = self.K_proj + self.shape_tensor
        trace = np.einsum("...AB,...AB->...", self.q_inv, deform)
        self.shear_out = deform - 0.5 * trace[..., None, None] * self.q
        self.shear_sq = np.einsum("...AB,...CD,...AC,...BD->...",
                                  self.shear_out, self.shear_out,
                                  self.q_inv, self.q_inv)

        # rotation 1-form: grid components and the equivalent tangent vector
        Kn = np.einsum("...ab,...b->...a", self.K_slice, self.normal)
        self.rotation_form = np.einsum("...Aa,...a->...A", self.tangents, Kn)
        q_mixed = self.metric_inv - np.einsum("...a,...b->...ab", self.normal, self.normal)
        self.rotation_vec = np.einsum("...ab,...b->...a", q_mixed, Kn)

        # area element and quadrature weights: dA = sqrt(det q) dtheta dphi
        self.sqrt_q = np.sqrt(det_q)
        self.weights = (g.gl_weights[:, None] * (2.0 * np.pi / g.nphi)
                        * self.sqrt_q / g.sin_theta[:, None])

        self._scalar_curvature = None
        self._grad_matrices = None

    # -- tangential calculus (chart-index, spectrally safe) ------------------

    def grad_scalar(self, f):
        """Tangential gradient as a chart vector: q^{AB} e_A^a d_B f."""
        g = self.grid
        df = np.stack([g.dtheta(f), g.dphi(f)], axis=-1)  # (..., B)
        return np.einsum("...AB,...Aa,...B->...a", self.q_inv, self.tangents, df)

    def div_tangent(self, v):
        """Surface divergence of a tangent chart-vector field."""
        g = self.grid
        dv = np.stack([g.dtheta(v), g.dphi(v)], axis=-2)  # (..., B, b)
        cov = dv + np.einsum("...bcd,...Bc,...d->...Bb", self.gamma,
                             self.tangents, v)
        return np.einsum("...AB,...Aa,...ab,...Bb->...",
                         self.q_inv, self.tangents, self.metric, cov)

    def covariant_gradient_form(self, w):
        """Surface covariant derivative of a tangent covector: D_A w_B."""
        g = self.grid
        dw = np.stack([g.dtheta(w), g.dphi(w)], axis=-2)  # (..., A, b)
        cov = dw - np.einsum("...cab,...Aa,...c->...Ab", self.gamma,
                             self.tangents, w)
        return np.einsum("...Ab,...Bb->...AB", cov, self.tangents)

    def directional(self, v, f):
        """Derivative of the scalar ``f`` along the tangent chart vector ``v``."""
        return np.einsum("...a,...ab,...b->...", v, self.metric, self.grad_scalar(f))

    def laplacian(self, f):
        """Laplace-Beltrami operator (strong form) on a nodal scalar."""
        return self.div_tangent(self.grad_scalar(f))

    @property
    def scalar_curvature(self):
        """Intrinsic scalar curvature via the summed Bochner identity."""
        if self._scalar_curvature is None:
            num = 0.0
            den = 0.0
            for a in range(3):
                f = self.surface.X[..., a]
                grad = self.grad_scalar(f)
                g2 = np.einsum("...a,...ab,...b->...", grad, self.metric, grad)
                lap = self.div_tangent(grad)
                w = np.einsum("...ab,...b->...a", self.metric, grad)
                hess = self.covariant_gradient_form(w)
                hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
                hess_sq = np.einsum("...AB,...CD,...AC,...BD->...",
                                    hess, hess, self.q_inv, self.q_inv)
                cross = np.einsum("...a,...ab,...b->...", grad, self.metric,
                                  self.grad_scalar(lap))
                num = num + self.laplacian(g2) - 2.0 * hess_sq - 2.0 * cross
                den = den + g2
            self._scalar_curvature = num / den
        return self._scalar_curvature

    # -- integration ---------------------------------------------------------

    def integrate(self, f):
        return float(np.sum(self.weights * np.asarray(f)))

    @property
    def area(self):
        return self.integrate(np.ones_like(self.sqrt_q))

    def gauss_bonnet_residual(self):
        return self.integrate(self.scalar_curvature) - 8.0 * np.pi

    # -- dense operator ingredients ------------------------------------------

    @property
    def grad_matrices(self):
        """Dense matrices of the chart-component tangential gradient.

        ``grad_matrices[a]`` maps flattened nodal scalars to the a-th chart
        component of the tangential gradient.
        """
        if self._grad_matrices is None:
            g = self.grid
            coef = np.einsum("...AB,...Aa->...Ba", self.q_inv, self.tangents)
            d_ops = (g.dtheta_matrix, g.dphi_matrix)
            mats = []
            for a in range(3):
                m = sum(coef[..., B, a].reshape(-1, 1) * d_ops[B] for B in range(2))
                mats.append(m)
            self._grad_matrices = tuple(mats)
        return self._grad_matrices

    # -- validation ----------------------------------------------------------

    def normal_normalization_error(self):
        nn = np.einsum("...ab,...a,...b->...", self.metric, self.normal, self.normal)
        return float(np.max(np.abs(nn - 1.0)))


def induced_geometry(surface: EmbeddedSurface) -> SurfaceGeometry:
    """All induced-geometry fields of the surface (cached on the surface)."""
    return surface.geometry


def integrate(surface: EmbeddedSurface, f) -> float:
    """Integral of a nodal scalar over the surface with the area measure."""
    return surface.geometry.integrate(f)


def _quantity_evaluator(quantity, x):
    if callable(quantity):
        return quantity
    if quantity in ("k_trace", "Z1"):
        return lambda geom: geom.k_trace
    if quantity in ("mean_curvature", "Z2"):
        return lambda geom: geom.mean_curvature
    if quantity in ("normal_component", "alpha"):
        if x is None:
            raise ValueError("the normal component variation needs the vector field x")
        return lambda geom: np.einsum(
            "...ab,...a,...b->...", geom.metric,
            x.evaluate(geom.surface.X), geom.normal)
    raise ValueError("unknown quantity %r" % (quantity,))


def normal_variation(surface: EmbeddedSurface, quantity, eps=None, x=None,
                     richardson=True, psi=None):
    """Derivative of a surface quantity along the unit normal.

    The quantity is evaluated on surfaces offset by ``s * psi * n`` (psi = 1
    gives the plain normal foliation) and differenced centrally; one
    Richardson level is applied by default.  Returns the restriction of the
    prime to the base surface as a nodal field.
    """
    tol = surface.tol
    eps = tol.variation_step if eps is None else float(eps)
    ev = _quantity_evaluator(quantity, x)
    disp = np.ones((surface.grid.ntheta, surface.grid.nphi)) if psi is None else np.asarray(psi)

    def diff(e):
        plus = ev(surface.offset_surface(e * disp).geometry)
        minus = ev(surface.offset_surface(-e * disp).geometry)
        return (plus - minus) / (2.0 * e)

    d = diff(eps)
    if not richardson:
        return d
    d_half = diff(eps / 2.0)
    return (4.0 * d_half - d) / 3.0
