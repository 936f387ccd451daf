"""Initial data sets (slice metric + extrinsic curvature) and the catalog.

The catalog holds exactly solvable entries used by every acceptance test:
time-symmetric Schwarzschild in isotropic coordinates, the flat slicing of
de Sitter, flat space, Brill-Lindquist punctures, and a metric-product slice
(line times round sphere).  All carry analytic first derivatives; curvature
level quantities fall back to differencing those closures where no analytic
second derivative is supplied.

Conventions: K_ab is the pull-back of grad_a u_b, so the projected trace
q^{ab} K_ab enters the outgoing expansion with a plus sign.  A "contracting"
de Sitter slice therefore has K_ab = -H h_ab and carries a marginal sphere
at areal radius 1/H.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import InvalidParameter
from .fields import (Chart, TensorField, cartesian_chart, christoffel,
                     curvature, lie_derivative, _metric_inverse)

__all__ = [
    "InitialDataSet",
    "SchwarzschildIsotropic",
    "DeSitterFlat",
    "FlatSlice",
    "BrillLindquist",
    "ProductSlice",
    "catalog_build",
    "entry_from_config",
    "constraint_energy",
    "constraint_momentum",
    "is_symmetry",
    "SymmetryTest",
]


@dataclass(frozen=True)
class InitialDataSet:
    """The triple (slice, h_ab, K_ab) plus optional spacetime-derived extras.

    ``acceleration`` is the covector field u'_a (normal derivative of the
    slice normal u_a, restricted to the slice) for the canonical radial
    foliation; it is spacetime data, supplied only where the catalog entry
    derives from a known extension.  Flags record declared properties that
    are not derivable from (h, K) alone.
    """

    chart: Chart
    h: TensorField
    K: TensorField
    acceleration: Optional[TensorField] = None
    name: str = ""
    params: dict = dc_field(default_factory=dict)
    vacuum: bool = False
    axisymmetric: bool = False
    genuine_surface: bool = False
    u_prime_along_n: bool = False


# ---------------------------------------------------------------------------
# catalog entries

@dataclass(frozen=True)
class SchwarzschildIsotropic:
    mass: float = 1.0
    entry_name = "schwarzschild_isotropic"


@dataclass(frozen=True)
class DeSitterFlat:
    hubble: float = 1.0
    scale: float = 1.0
    sign: str = "contracting"
    entry_name = "de_sitter_flat"


@dataclass(frozen=True)
class FlatSlice:
    entry_name = "flat_slice"


@dataclass(frozen=True)
class BrillLindquist:
    m1: float = 0.5
    m2: float = 0.5
    separation: float = 0.5
    entry_name = "brill_lindquist"


@dataclass(frozen=True)
class ProductSlice:
    """Metric product of a line with a round sphere of radius ``radius``.

    In Cartesian chart coordinates h = d rho^2 + radius^2 dOmega^2; every
    centered sphere is totally geodesic, so each one is a minimal MOTS, and
    the unit radial field is a slice symmetry with unit normal component.
    """

    radius: float = 1.0
    entry_name = "product_slice"


def _conformally_flat(psi, dpsi, d2psi, chart, name):
    """h_ab = psi^4 delta_ab with analytic first and second derivatives."""
    eye = np.eye(3)

    def fn(pts):
        p = psi(pts)
        return p[..., None, None] ** 4 * eye

    def d1(pts):
        p = psi(pts)[..., None, None, None]
        dp = dpsi(pts)[..., None, None, :]
        return 4.0 * p ** 3 * dp * eye[..., None]

    def d2(pts):
        p = psi(pts)[..., None, None, None, None]
        dp = dpsi(pts)
        ddp = d2psi(pts)
        quad = (12.0 * p ** 2 * np.einsum("...c,...d->...cd", dp, dp)[..., None, None, :, :]
                + 4.0 * p ** 3 * ddp[..., None, None, :, :])
        return quad * eye[..., None, None]

    return TensorField((0, 2), fn, d1=d1, d2=d2, chart=chart,
                       symmetries=((0, 1),), name=name)


def _puncture_psi(masses, centers):
    centers = [np.asarray(c, dtype=float) for c in centers]

    def psi(pts):
        out = np.ones(pts.shape[:-1])
        for m, c in zip(masses, centers):
            out = out + m / (2.0 * np.linalg.norm(pts - c, axis=-1))
        return out

    def dpsi(pts):
        out = np.zeros(pts.shape)
        for m, c in zip(masses, centers):
            d = pts - c
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            out = out - 0.5 * m * d / r ** 3
        return out

    def d2psi(pts):
        eye = np.eye(3)
        out = np.zeros(pts.shape + (3,))
        for m, c in zip(masses, centers):
            d = pts - c
            r = np.linalg.norm(d, axis=-1)[..., None, None]
            out = out - 0.5 * m * (eye / r ** 3
                                   - 3.0 * np.einsum("...a,...b->...ab", d, d) / r ** 5)
        return out

    return psi, dpsi, d2psi


def _zero_sym2(chart, name):
    def fn(pts):
        return np.zeros(pts.shape[:-1] + (3, 3))

    return TensorField((0, 2), fn,
                       d1=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3)),
                       d2=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3, 3)),
                       chart=chart, symmetries=((0, 1),), name=name)


def _zero_covector(chart, name):
    return TensorField((0, 1), lambda p: np.zeros(p.shape),
                       d1=lambda p: np.zeros(p.shape[:-1] + (3, 3)),
                       chart=chart, name=name)


def catalog_build(entry) -> InitialDataSet:
    """Construct the initial data set for a catalog entry."""
    if isinstance(entry, SchwarzschildIsotropic):
        if entry.mass <= 0:
            raise InvalidParameter("mass must be positive")
        chart = cartesian_chart(punctures=((0.0, 0.0, 0.0),))
        psi, dpsi, d2psi = _puncture_psi([entry.mass], [(0.0, 0.0, 0.0)])
        h = _conformally_flat(psi, dpsi, d2psi, chart, "schwarzschild_isotropic_h")
        return InitialDataSet(
            chart=chart, h=h, K=_zero_sym2(chart, "schwarzschild_K"),
            acceleration=_zero_covector(chart, "schwarzschild_uprime"),
            name=entry.entry_name, params={"mass": entry.mass},
            vacuum=True, axisymmetric=True,
            genuine_surface=True, u_prime_along_n=True)

    if isinstance(entry, DeSitterFlat):
        if entry.hubble <= 0 or entry.scale <= 0:
            raise InvalidParameter("hubble rate and scale factor must be positive")
        if entry.sign not in ("contracting", "expanding"):
            raise InvalidParameter("sign must be 'contracting' or 'expanding'")
        chart = cartesian_chart()
        s = -1.0 if entry.sign == "contracting" else 1.0
        a2 = entry.scale ** 2
        eye = np.eye(3)

        def h_fn(pts, _a2=a2):
            return np.broadcast_to(_a2 * eye, pts.shape[:-1] + (3, 3))

        def k_fn(pts, _c=s * entry.hubble * a2):
            return np.broadcast_to(_c * eye, pts.shape[:-1] + (3, 3))

        zero_d1 = lambda p: np.zeros(p.shape[:-1] + (3, 3, 3))
        zero_d2 = lambda p: np.zeros(p.shape[:-1] + (3, 3, 3, 3))
        h = TensorField((0, 2), h_fn, d1=zero_d1, d2=zero_d2, chart=chart,
                        symmetries=((0, 1),), name="de_sitter_h")
        K = TensorField((0, 2), k_fn, d1=zero_d1, d2=zero_d2, chart=chart,
                        symmetries=((0, 1),), name="de_sitter_K")

        # u'_a = K_ab n^b for the canonical foliation by centered spheres
        c_acc = s * entry.hubble * entry.scale

        def acc_fn(pts, _c=c_acc):
            return _c * pts / np.linalg.norm(pts, axis=-1, keepdims=True)

        acc = TensorField((0, 1), acc_fn, chart=chart, name="de_sitter_uprime")
        return InitialDataSet(
            chart=chart, h=h, K=K, acceleration=acc,
            name=entry.entry_name,
            params={"hubble": entry.hubble, "scale": entry.scale, "sign": entry.sign},
            vacuum=False, axisymmetric=True,
            genuine_surface=False, u_prime_along_n=True)

    if isinstance(entry, FlatSlice):
        chart = cartesian_chart()
        eye = np.eye(3)
        h = TensorField((0, 2), lambda p: np.broadcast_to(eye, p.shape[:-1] + (3, 3)),
                        d1=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3)),
                        d2=lambda p: np.zeros(p.shape[:-1] + (3, 3, 3, 3)),
                        chart=chart, symmetries=((0, 1),), name="flat_h")
        return InitialDataSet(chart=chart, h=h, K=_zero_sym2(chart, "flat_K"),
                              name=entry.entry_name, vacuum=True, axisymmetric=True)

    if isinstance(entry, BrillLindquist):
        if entry.m1 <= 0 or entry.m2 <= 0 or entry.separation <= 0:
            raise InvalidParameter("puncture masses and separation must be positive")
        d = entry.separation
        centers = ((0.0, 0.0, d / 2.0), (0.0, 0.0, -d / 2.0))
        chart = cartesian_chart(punctures=centers)
        psi, dpsi, d2psi = _puncture_psi([entry.m1, entry.m2], centers)
        h = _conformally_flat(psi, dpsi, d2psi, chart, "brill_lindquist_h")
        return InitialDataSet(
            chart=chart, h=h, K=_zero_sym2(chart, "brill_lindquist_K"),
            name=entry.entry_name,
            params={"m1": entry.m1, "m2": entry.m2, "separation": entry.separation},
            vacuum=True, axisymmetric=True)

    if isinstance(entry, ProductSlice):
        if entry.radius <= 0:
            raise InvalidParameter("sphere radius must be positive")
        chart = cartesian_chart(punctures=((0.0, 0.0, 0.0),))
        r0sq = entry.radius ** 2
        eye = np.eye(3)

        def h_fn(pts):
            rho2 = np.sum(pts ** 2, axis=-1)[..., None, None]
            P = np.einsum("...a,...b->...ab", pts, pts) / rho2
            beta = r0sq / rho2
            return beta * eye + (1.0 - beta) * P

        def h_d1(pts):
            rho2 = np.sum(pts ** 2, axis=-1)[..., None, None]
            P = np.einsum("...a,...b->...ab", pts, pts) / rho2
            beta = r0sq / rho2
            dbeta = -2.0 * r0sq * pts / rho2 ** 2  # (..., c)
            dP = ((np.einsum("ca,...b->...abc", eye, pts)
                   + np.einsum("cb,...a->...abc", eye, pts)) / rho2[..., None]
                  - 2.0 * np.einsum("...a,...b,...c->...abc", pts, pts, pts)
                  / rho2[..., None] ** 2)
            return (dbeta[..., None, None, :] * (eye - P)[..., None]
                    + (1.0 - beta)[..., None] * dP)

        h = TensorField((0, 2), h_fn, d1=h_d1, chart=chart,
                        symmetries=((0, 1),), name="product_h")
        return InitialDataSet(
            chart=chart, h=h, K=_zero_sym2(chart, "product_K"),
            acceleration=_zero_covector(chart, "product_uprime"),
            name=entry.entry_name, params={"radius": entry.radius},
            vacuum=False, axisymmetric=True,
            genuine_surface=True, u_prime_along_n=True)

    raise InvalidParameter("unknown catalog entry %r" % (entry,))


_ENTRY_TYPES = {
    cls.entry_name: cls
    for cls in (SchwarzschildIsotropic, DeSitterFlat, FlatSlice, BrillLindquist, ProductSlice)
}


def entry_from_config(name: str, params: dict):
    """Resolve a catalog entry from its config name and parameter dict."""
    if name not in _ENTRY_TYPES:
        raise InvalidParameter("unknown catalog entry name %r (known: %s)"
                               % (name, ", ".join(sorted(_ENTRY_TYPES))))
    try:
        return _ENTRY_TYPES[name](**params)
    except TypeError as exc:
        raise InvalidParameter("bad parameters for %s: %s" % (name, exc)) from exc


# ---------------------------------------------------------------------------
# constraints

def constraint_energy(data: InitialDataSet, points,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Energy density G_ab u^a u^b = (R + (tr K)^2 - |K|^2) / 2."""
    pts = np.asarray(points, dtype=float)
    R = curvature(data.h, pts, tol).scalar
    h = data.h.evaluate(pts)
    hinv = _metric_inverse(h, tol)
    K = data.K.evaluate(pts)
    trK = np.einsum("...ab,...ab->...", hinv, K)
    Ksq = np.einsum("...ab,...cd,...ac,...bd->...", K, K, hinv, hinv)
    return 0.5 * (R + trK ** 2 - Ksq)


def constraint_momentum(data: InitialDataSet, points,
                        tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Momentum density j_c = D_b (K^b_c - delta^b_c tr K)."""
    pts = np.asarray(points, dtype=float)
    h = data.h.evaluate(pts)
    dh = data.h.partials(pts, 1)
    hinv = _metric_inverse(h, tol)
    dhinv = -np.einsum("...af,...dg,...fge->...ade", hinv, hinv, dh)
    gamma = christoffel(data.h, pts, tol)
    K = data.K.evaluate(pts)
    dK = data.K.partials(pts, 1)

    T = np.einsum("...ba,...ac->...bc", hinv, K)  # K^b_c
    dT = (np.einsum("...bae,...ac->...bce", dhinv, K)
          + np.einsum("...ba,...ace->...bce", hinv, dK))
    divT = (np.einsum("...bcb->...c", dT)
            + np.einsum("...bbe,...ec->...c", gamma, T)
            - np.einsum("...ebc,...be->...c", gamma, T))
    dtrK = (np.einsum("...abe,...ab->...e", dhinv, K)
            + np.einsum("...ab,...abe->...e", hinv, dK))
    return divT - dtrK


# ---------------------------------------------------------------------------
# symmetry testing

@dataclass(frozen=True)
class SymmetryTest:
    is_symmetry: bool
    residual_h: float
    residual_K: float


def is_symmetry(data: InitialDataSet, x: TensorField, points,
                tol: float = DEFAULT_TOLERANCES.slice_symmetry) -> SymmetryTest:
    """Test L_x h = 0 and L_x K = 0 at the sample points (max norm)."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("sample point set must be nonempty")
    res_h = float(np.max(np.abs(lie_derivative(data.h, x, pts))))
    res_K = float(np.max(np.abs(lie_derivative(data.K, x, pts))))
    return SymmetryTest(is_symmetry=bool(res_h <= tol and res_K <= tol),
                        residual_h=res_h, residual_K=res_K)
