"""Locate MOTS as zeros of the outgoing expansion over radial profiles.

Damped Newton iteration on the nodal profile values with a dense
finite-difference Jacobian (cheap and trustworthy at desk scale).  When the
data and the initial guess are axisymmetric about the grid axis through the
center, the solve runs on the meridian subproblem with a reduced phi grid and
the result is broadcast; the residual is always re-verified on the requested
grid.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DivergingProfile, NoConvergence
from .initial_data import InitialDataSet
from .sphere import SurfaceGrid
from .surface import EmbeddedSurface

__all__ = ["FinderConfig", "expansion_residual", "find_mots"]

_REDUCED_NPHI = 16  # enough phi modes that axisymmetric products cannot alias to m=0


@dataclass
class FinderConfig:
    center: tuple = (0.0, 0.0, 0.0)
    initial_profile: float | np.ndarray = 1.0
    max_iterations: int = 30
    tolerance: float = DEFAULT_TOLERANCES.mots_residual
    ntheta: int = 24
    nphi: int = 48
    jacobian_step: float = DEFAULT_TOLERANCES.jacobian_step
    max_halvings: int = DEFAULT_TOLERANCES.max_step_halvings
    axisymmetric: Optional[bool] = None   # None = auto-detect
    min_radius: float = 1e-3

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("residual tolerance must be positive")
        if np.any(np.asarray(self.initial_profile) <= 0):
            raise ValueError("initial profile must be strictly positive")


def expansion_residual(data: InitialDataSet, profile, center=(0.0, 0.0, 0.0),
                       grid: Optional[SurfaceGrid] = None) -> np.ndarray:
    """Outgoing expansion at each node of the surface defined by ``profile``."""
    s = EmbeddedSurface.from_profile(data, profile, center=center, grid=grid)
    return s.geometry.expansion_out


def _expand_initial(cfg: FinderConfig, ntheta, nphi):
    prof = np.asarray(cfg.initial_profile, dtype=float)
    if prof.ndim == 0:
        return np.full((ntheta, nphi), float(prof))
    if prof.shape == (ntheta,):
        return np.repeat(prof[:, None], nphi, axis=1)
    if prof.shape == (ntheta, nphi):
        return prof.copy()
    raise ValueError("initial profile must be scalar, (ntheta,) or (ntheta, nphi)")


def _auto_axisymmetric(data, cfg, prof):
    on_axis = abs(cfg.center[0]) < 1e-14 and abs(cfg.center[1]) < 1e-14
    phi_const = np.max(np.abs(prof - prof[:, :1])) < 1e-14
    return data.axisymmetric and on_axis and phi_const


class _NewtonProblem:
    """Residual map over the unknown profile vector, meridian or full grid."""

    def __init__(self, data, cfg, grid, axisym):
        self.data = data
        self.cfg = cfg
        self.grid = grid
        self.axisym = axisym
        self.n_unknowns = grid.ntheta if axisym else grid.size

    def _to_profile(self, vec):
        if self.axisym:
            return np.repeat(vec[:, None], self.grid.nphi, axis=1)
        return vec.reshape(self.grid.ntheta, self.grid.nphi)

    def residual(self, vec):
        prof = self._to_profile(vec)
        if np.any(prof <= self.cfg.min_radius) or not np.all(np.isfinite(prof)):
            raise DivergingProfile("profile collapsed below the minimum radius")
        X = np.asarray(self.cfg.center, dtype=float) \
            + prof[..., None] * self.grid.unit_directions()
        if not np.all(self.data.chart.contains(X)):
            raise DivergingProfile("profile left the chart domain")
        theta_k = EmbeddedSurface(self.data, self.grid, X,
                                  center=self.cfg.center,
                                  profile=prof).geometry.expansion_out
        if self.axisym:
            return theta_k[:, 0]
        return theta_k.ravel()

    def jacobian(self, vec, f0):
        J = np.empty((self.n_unknowns, self.n_unknowns))
        for j in range(self.n_unknowns):
            step = self.cfg.jacobian_step * max(1.0, abs(vec[j]))
            pert = vec.copy()
            pert[j] += step
            J[:, j] = (self.residual(pert) - f0) / step
        return J


def find_mots(data: InitialDataSet, cfg: FinderConfig) -> EmbeddedSurface:
    """Newton search for a surface with vanishing outgoing expansion.

    Returns the surface with an attached ``finder_report`` (iteration trace,
    final residual).  Raises NoConvergence when the iteration budget runs out
    and DivergingProfile (a NoConvergence) when the profile leaves the chart;
    on data without a MOTS these are the expected outcomes.
    """
    full_grid = SurfaceGrid(cfg.ntheta, cfg.nphi)
    prof0 = _expand_initial(cfg, cfg.ntheta, cfg.nphi)
    axisym = cfg.axisymmetric
    if axisym is None:
        axisym = _auto_axisymmetric(data, cfg, prof0)

    if axisym:
        grid = SurfaceGrid(cfg.ntheta, min(_REDUCED_NPHI, cfg.nphi))
        vec = prof0[:, 0].copy()
    else:
        grid = full_grid
        vec = prof0.ravel().copy()

    problem = _NewtonProblem(data, cfg, grid, axisym)
    trace = []
    f = problem.residual(vec)
    res = float(np.max(np.abs(f)))
    trace.append({"iteration": 0, "residual": res, "damping": 1.0})

    iterations = 0
    while res > cfg.tolerance:
        if iterations >= cfg.max_iterations:
            raise NoConvergence(
                "no MOTS found: residual %.3e after %d iterations" % (res, iterations))
        J = problem.jacobian(vec, f)
        try:
            # minimal-norm least squares: homogeneous data (e.g. de Sitter)
            # makes MOTS translation-degenerate, so the Jacobian carries null
            # modes that a direct solve would amplify; the cutoff sits above
            # the forward-difference noise floor of those null columns
            step, _, _, _ = np.linalg.lstsq(J, -f, rcond=1e-5)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton system: %s" % exc) from exc

        damping = 1.0
        for _ in range(cfg.max_halvings + 1):
            try:
                f_new = problem.residual(vec + damping * step)
                res_new = float(np.max(np.abs(f_new)))
            except DivergingProfile:
                res_new = np.inf
            if res_new < res:
                break
            damping *= 0.5
        else:
            raise NoConvergence(
                "damped step stalled at residual %.3e (%d halvings)"
                % (res, cfg.max_halvings))

        vec = vec + damping * step
        f, res = f_new, res_new
        iterations += 1
        trace.append({"iteration": iterations, "residual": res, "damping": damping})

    profile = problem._to_profile(vec)
    if axisym and full_grid.nphi != grid.nphi:
        profile = np.repeat(profile[:, :1], full_grid.nphi, axis=1)
    surface = EmbeddedSurface.from_profile(
        data, profile, center=cfg.center, grid=full_grid,
        finder_report={
            "iterations": iterations,
            "residual": None,
            "trace": trace,
            "axisymmetric_path": bool(axisym),
        })
    final = float(np.max(np.abs(surface.geometry.expansion_out)))
    surface.finder_report["residual"] = final
    if final > cfg.tolerance * 10.0:
        raise NoConvergence(
            "reduced solve converged but full-grid residual is %.3e" % final)
    return surface
