"""The MOTS stability operator: dense assembly, oracle, spectrum, classification.

The operator acting on a nodal scalar psi is

    L psi = -Lap psi + 2 w^A D_A psi
            + (D_A w^A - w_A w^A + (R2 - |shear|^2 - 2 G_ab k^a u^b) / 2) psi

with R2 the intrinsic scalar curvature, w the rotation 1-form of the normal
bundle and the curvature term supplied by the constraint quantities,
G_ab k^a u^b = energy + n-contracted momentum.  The Laplacian block is built
in weak form, -W^{-1} G^T (mu h) G, which makes the area-weighted matrix
exactly symmetric whenever w vanishes and keeps low-degree harmonics exact
eigenfunctions on round surfaces.

Every sign is arbitrated by the deformation oracle: the centered difference
of the outgoing expansion under outward deformation by psi * n.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import EigensolverFailure, NotAMOTS, ZeroCandidate
from .initial_data import constraint_energy, constraint_momentum
from .surface import EmbeddedSurface

__all__ = [
    "StabilityOperator",
    "SpectrumResult",
    "assemble",
    "deformation_oracle",
    "spectrum",
    "classify",
    "kernel_test",
]


class StabilityOperator:
    """Dense discretization of the stability operator over surface nodes."""

    def __init__(self, matrix, weights, grid_shape, coefficients=None):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("operator matrix must be square")
        if not np.all(np.isfinite(self.matrix)):
            raise EigensolverFailure("operator matrix has non-finite entries")
        self.weights = np.asarray(weights, dtype=float).ravel()
        self.grid_shape = tuple(grid_shape)
        self.coefficients = coefficients or {}
        self._norm2 = None

    @property
    def size(self):
        return self.matrix.shape[0]

    def apply(self, psi):
        out = self.matrix @ np.asarray(psi, dtype=float).ravel()
        return out.reshape(self.grid_shape) if self.grid_shape else out

    def weighted_matrix(self):
        """W L, symmetric (to roundoff) in the self-adjoint case w = 0."""
        return self.weights[:, None] * self.matrix

    @property
    def norm(self):
        """2-norm estimate by power iteration on L^T L (deterministic start)."""
        if self._norm2 is None:
            v = np.ones(self.size) / np.sqrt(self.size)
            m = self.matrix
            for _ in range(100):
                w = m.T @ (m @ v)
                nw = np.linalg.norm(w)
                if nw == 0.0:
                    return 0.0
                v = w / nw
            self._norm2 = float(np.sqrt(nw))
        return self._norm2


def _curvature_coupling(surface: EmbeddedSurface, tol: Tolerances):
    """G_ab k^a u^b per node from the constraint quantities."""
    X = surface.X
    geo = surface.geometry
    rho = constraint_energy(surface.data, X, tol)
    j = constraint_momentum(surface.data, X, tol)
    return rho + np.einsum("...a,...a->...", j, geo.normal)


def assemble(surface: EmbeddedSurface, extra_rotation_potential=None,
             tol: Tolerances = DEFAULT_TOLERANCES) -> StabilityOperator:
    """Assemble the dense stability operator for ``surface``.

    ``extra_rotation_potential`` replaces the rotation 1-form w by
    w + D(f) for the nodal scalar f (the scaling-freedom gauge check).
    """
    geo = surface.geometry
    grid = surface.grid
    n = grid.size
    mu = geo.weights.ravel()

    # weak-form Laplacian: -W^{-1} sum_ab G_a^T diag(mu h_ab) G_b
    G = geo.grad_matrices
    h = geo.metric.reshape(n, 3, 3)
    stiff = np.zeros((n, n))
    for b in range(3):
        m_b = np.zeros((n, n))
        for a in range(3):
            m_b += (mu * h[:, a, b])[:, None] * G[a]
        stiff += G[b].T @ m_b
    lap = -stiff / mu[:, None]

    w_vec = geo.rotation_vec
    if extra_rotation_potential is not None:
        w_vec = w_vec + geo.grad_scalar(np.asarray(extra_rotation_potential))
    w_form = np.einsum("...ab,...b->...a", geo.metric, w_vec)
    div_w = geo.div_tangent(w_vec)
    w_sq = np.einsum("...a,...a->...", w_form, w_vec)

    coupling = _curvature_coupling(surface, tol)
    potential = (div_w - w_sq
                 + 0.5 * (geo.scalar_curvature - geo.shear_sq - 2.0 * coupling))

    first_order = np.zeros((n, n))
    wf = w_form.reshape(n, 3)
    for b in range(3):
        first_order += (2.0 * wf[:, b])[:, None] * G[b]

    matrix = -lap + first_order + np.diag(potential.ravel())
    return StabilityOperator(
        matrix, mu, (grid.ntheta, grid.nphi),
        coefficients={
            "scalar_curvature": geo.scalar_curvature,
            "shear_sq": geo.shear_sq,
            "rotation_form": geo.rotation_form,
            "curvature_coupling": coupling,
            "potential": potential,
        })


def deformation_oracle(surface: EmbeddedSurface, psi, eps=None,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """First variation of the outgoing expansion under deformation psi * n.

    Centered difference with one Richardson level, fully independent of the
    assembled matrix; this is the arbitration check for every sign convention
    in ``assemble``.
    """
    geo = surface.geometry
    if float(np.max(np.abs(geo.expansion_out))) > tol.oracle_mots_gate:
        raise NotAMOTS("deformation oracle requires max |theta_k| <= %g"
                       % tol.oracle_mots_gate)
    eps = tol.variation_step if eps is None else float(eps)
    psi = np.asarray(psi, dtype=float)

    def diff(e):
        plus = surface.offset_surface(e * psi).geometry.expansion_out
        minus = surface.offset_surface(-e * psi).geometry.expansion_out
        return (plus - minus) / (2.0 * e)

    d = diff(eps)
    d_half = diff(eps / 2.0)
    return (4.0 * d_half - d) / 3.0


@dataclass
class SpectrumResult:
    """Full eigendecomposition of a stability operator.

    Eigenvalues are sorted by real part; the principal eigenvalue is the
    first entry and is validated to be real.  Right eigenvectors are stored
    column-wise in the sorted order.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray
    grid_shape: tuple
    max_residual: float

    @property
    def principal(self) -> float:
        return float(self.eigenvalues[0].real)

    def eigenfunction(self, index) -> np.ndarray:
        v = self.eigenvectors[:, index]
        if np.max(np.abs(v.imag)) <= 1e-12 * max(np.max(np.abs(v.real)), 1e-300):
            v = v.real
        return v.reshape(self.grid_shape)

    def near(self, value, atol) -> np.ndarray:
        """Indices of eigenvalues within ``atol`` of ``value`` (complex norm)."""
        return np.nonzero(np.abs(self.eigenvalues - value) <= atol)[0]

    def export_csv(self, path):
        with open(path, "w") as fh:
            fh.write("re,im\n")
            for ev in self.eigenvalues:
                fh.write("%.17g,%.17g\n" % (ev.real, ev.imag))


def spectrum(op: StabilityOperator,
             tol: Tolerances = DEFAULT_TOLERANCES) -> SpectrumResult:
    """Dense full eigendecomposition (LAPACK Hessenberg + shifted QR)."""
    if op.size > tol.dense_eig_limit:
        raise EigensolverFailure("matrix size %d exceeds the dense limit %d"
                                 % (op.size, tol.dense_eig_limit))
    try:
        evals, evecs = scipy.linalg.eig(op.matrix, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure("dense eigensolver failed: %s" % exc) from exc

    order = np.lexsort((evals.imag, evals.real))
    evals = evals[order]
    evecs = evecs[:, order]

    scale = max(np.max(np.abs(evals)), 1e-300)
    resid = op.matrix @ evecs - evecs * evals[None, :]
    col = np.linalg.norm(resid, axis=0) / np.linalg.norm(evecs, axis=0)
    max_residual = float(np.max(col))
    if max_residual > tol.eig_residual_rel * scale:
        raise EigensolverFailure(
            "eigenpair residual %.3e exceeds %.1e * max|lambda| = %.3e"
            % (max_residual, tol.eig_residual_rel, tol.eig_residual_rel * scale))

    lam0 = evals[0]
    if abs(lam0.imag) > tol.eig_reality_rel * max(1.0, abs(lam0.real)):
        raise EigensolverFailure(
            "principal eigenvalue has imaginary part %.3e" % lam0.imag)

    return SpectrumResult(eigenvalues=evals, eigenvectors=evecs,
                          weights=op.weights, grid_shape=op.grid_shape,
                          max_residual=max_residual)


def classify(lam0: float, tol_marginal: float) -> str:
    """Sign classification of the principal eigenvalue.

    Marginal within the tolerance band, otherwise strictly stable (positive)
    or unstable (negative).
    """
    if tol_marginal < 0:
        raise ValueError("marginality tolerance must be nonnegative")
    if abs(lam0) <= tol_marginal:
        return "MarginallyStable"
    return "StrictlyStable" if lam0 > 0 else "Unstable"


def kernel_test(op: StabilityOperator, candidate,
                tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Relative kernel residual ||L c|| / (||L|| ||c||), quadrature-weighted."""
    c = np.asarray(candidate, dtype=float).ravel()
    w = op.weights
    norm_c = float(np.sqrt(np.sum(w * c * c)))
    if norm_c == 0.0:
        raise ZeroCandidate("kernel candidate is identically zero")
    lc = op.matrix @ c
    norm_lc = float(np.sqrt(np.sum(w * lc * lc)))
    return norm_lc / (op.norm * norm_c)
