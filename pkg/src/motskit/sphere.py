"""Gauss-Legendre x Fourier grids on the unit sphere with spectral calculus.

Nodes are Gauss-Legendre in cos(theta) (no node touches a pole) and
equispaced in phi.  Differentiation goes through a scalar spherical-harmonic
transform: analysis by exact Gauss-Legendre quadrature against normalized
associated Legendre functions, synthesis with analytic theta-derivative
tables.  For band-limited fields (l <= ntheta-1, |m| <= nphi/2-1) analysis,
synthesis and both derivatives are exact to roundoff, which is what keeps
Laplacian eigenvalues of low-degree harmonics at machine precision.

Plain polynomial differentiation matrices in cos(theta) lose spectral
accuracy on odd-m modes (their meridional profiles carry sin(theta) factors);
the harmonic route does not, and the dense differentiation matrices exposed
here are built from it.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = ["SurfaceGrid"]


def _legendre_tables(lmax, u, sin_theta):
    """Normalized P_l^m(u) and their theta-derivatives, shapes (m, l, node).

    Normalization: 2*pi * integral(P_lm^2 du) = 1, so Y_lm = P_lm e^{i m phi}
    is orthonormal on the sphere.  Standard stable three-term recurrences.
    """
    n = u.size
    P = np.zeros((lmax + 1, lmax + 1, n))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, lmax + 1):
        P[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta * P[m - 1, m - 1]
    for m in range(lmax + 1):
        if m + 1 <= lmax:
            P[m, m + 1] = np.sqrt(2.0 * m + 3.0) * u * P[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[m, l] = a * (u * P[m, l - 1] - b * P[m, l - 2])

    # sin(theta) dP_lm/dtheta = l u P_lm - sqrt((2l+1)/(2l-1)) sqrt(l^2-m^2) P_{l-1,m}
    dP = np.zeros_like(P)
    for m in range(lmax + 1):
        for l in range(m, lmax + 1):
            t = l * u * P[m, l]
            if l - 1 >= m:
                t = t - np.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0)) \
                    * np.sqrt(float(l * l - m * m)) * P[m, l - 1]
            dP[m, l] = t / sin_theta
    return P, dP


class SurfaceGrid:
    """Product grid with quadrature and spectral differentiation.

    Nodal fields have shape ``(ntheta, nphi, ...)``; extra trailing axes
    (tensor components) are broadcast through every operation.
    """

    def __init__(self, ntheta=24, nphi=48):
        if ntheta < 4 or nphi < 4 or nphi % 2:
            raise ValueError("need ntheta >= 4 and even nphi >= 4")
        self.ntheta = int(ntheta)
        self.nphi = int(nphi)
        u, w = leggauss(self.ntheta)
        order = np.argsort(-u)               # theta ascending, no pole nodes
        self.u = u[order]
        self.gl_weights = w[order]
        self.theta = np.arccos(self.u)
        self.sin_theta = np.sqrt(1.0 - self.u ** 2)
        self.phi = 2.0 * np.pi * np.arange(self.nphi) / self.nphi

        self.lmax = self.ntheta - 1
        self.mmax = min(self.lmax, self.nphi // 2 - 1)
        P, dP = _legendre_tables(self.lmax, self.u, self.sin_theta)

        # per-FFT-bin tables; bins with |m| > mmax (incl. Nyquist) are dropped
        m_of_bin = np.minimum(np.arange(self.nphi), self.nphi - np.arange(self.nphi))
        keep = m_of_bin <= self.mmax
        self._P_bins = np.where(keep[:, None, None], P[np.minimum(m_of_bin, self.lmax)], 0.0)
        self._dP_bins = np.where(keep[:, None, None], dP[np.minimum(m_of_bin, self.lmax)], 0.0)
        self._W_bins = 2.0 * np.pi * self._P_bins * self.gl_weights  # analysis weights
        self._m_signed = np.where(np.arange(self.nphi) <= self.nphi // 2,
                                  np.arange(self.nphi),
                                  np.arange(self.nphi) - self.nphi)
        self._m_signed = np.where(keep, self._m_signed, 0)
        self._keep = keep

        self._plm_tables = P
        self._dtheta_matrix = None
        self._dphi_matrix = None

        for arr in (self.u, self.gl_weights, self.theta, self.sin_theta, self.phi):
            arr.setflags(write=False)

    # -- transforms ---------------------------------------------------------

    def analyze(self, f):
        """Spherical-harmonic coefficients, shape (nphi bins, lmax+1, ...)."""
        F = np.fft.fft(np.asarray(f, dtype=complex), axis=1) / self.nphi
        return np.einsum("kli,ik...->kl...", self._W_bins, F)

    def synthesize(self, coeffs):
        F = np.einsum("kli,kl...->ki...", self._P_bins, coeffs)
        return np.fft.ifft(np.moveaxis(F, 0, 1) * self.nphi, axis=1)

    def _apply(self, f, table, m_factor=None):
        f = np.asarray(f)
        coeffs = self.analyze(f)
        if m_factor is not None:
            shape = (self.nphi,) + (1,) * (coeffs.ndim - 1)
            coeffs = coeffs * m_factor.reshape(shape)
        out = np.einsum("kli,kl...->ki...", table, coeffs)
        out = np.fft.ifft(np.moveaxis(out, 0, 1) * self.nphi, axis=1)
        return out.real if np.isrealobj(f) else out

    def dtheta(self, f):
        """d/dtheta of a nodal field (spectrally accurate for smooth scalars)."""
        return self._apply(f, self._dP_bins)

    def dphi(self, f):
        """d/dphi of a nodal field."""
        f = np.asarray(f)
        F = np.fft.fft(np.asarray(f, dtype=complex), axis=1)
        shape = (1, self.nphi) + (1,) * (f.ndim - 2)
        F *= (1j * self._m_signed * self._keep).reshape(shape)
        out = np.fft.ifft(F, axis=1)
        return out.real if np.isrealobj(f) else out

    def project(self, f):
        """Band-limit a nodal field to the resolved harmonic block."""
        return self._apply(f, self._P_bins)

    # -- dense operators ----------------------------------------------------

    @property
    def size(self):
        return self.ntheta * self.nphi

    def _matrix_of(self, op):
        eye = np.eye(self.size).reshape(self.ntheta, self.nphi, self.size)
        return op(eye).reshape(self.size, self.size)

    @property
    def dtheta_matrix(self):
        if self._dtheta_matrix is None:
            self._dtheta_matrix = self._matrix_of(self.dtheta)
            self._dtheta_matrix.setflags(write=False)
        return self._dtheta_matrix

    @property
    def dphi_matrix(self):
        if self._dphi_matrix is None:
            self._dphi_matrix = self._matrix_of(self.dphi)
            self._dphi_matrix.setflags(write=False)
        return self._dphi_matrix

    # -- quadrature ---------------------------------------------------------

    @property
    def sphere_weights(self):
        """Unit-sphere quadrature weights, shape (ntheta, nphi)."""
        return np.broadcast_to(self.gl_weights[:, None] * (2.0 * np.pi / self.nphi),
                               (self.ntheta, self.nphi))

    def integrate_sphere(self, f):
        """Integral over the unit sphere; exact for Y_lm with l <= 2*ntheta-1."""
        return float(np.sum(self.sphere_weights * np.asarray(f)))

    # -- helpers ------------------------------------------------------------

    def unit_directions(self):
        """Radial unit vectors at the nodes, shape (ntheta, nphi, 3)."""
        st = self.sin_theta[:, None]
        ct = self.u[:, None]
        cp = np.cos(self.phi)[None, :]
        sp = np.sin(self.phi)[None, :]
        return np.stack([st * cp, st * sp,
                         np.broadcast_to(ct, (self.ntheta, self.nphi))], axis=-1)

    def plm(self, m, l):
        """Normalized associated Legendre values at the nodes, shape (ntheta,)."""
        return self._plm_tables[m, l]

    def random_bandlimited(self, lmax_band, rng, amplitude=1.0):
        """Real random field with harmonic content l <= lmax_band."""
        if lmax_band > self.mmax:
            raise ValueError("band limit exceeds the resolved block")
        out = np.zeros((self.ntheta, self.nphi))
        cp = [np.cos(m * self.phi) for m in range(lmax_band + 1)]
        sp = [np.sin(m * self.phi) for m in range(lmax_band + 1)]
        for l in range(lmax_band + 1):
            for m in range(l + 1):
                a = rng.normal()
                out += a * self.plm(m, l)[:, None] * cp[m][None, :]
                if m > 0:
                    b = rng.normal()
                    out += b * self.plm(m, l)[:, None] * sp[m][None, :]
        return amplitude * out
