"""Central tolerance configuration.

Every numeric threshold used by the toolkit lives here; call sites receive a
``Tolerances`` instance instead of hard-coding values.  The defaults are tuned
for the desk-scale catalog at the default grid (24 x 48) in double precision.
"""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # finite differences on chart fields
    fd_step: float = 1e-4            # base step for centered stencils
    fd_rel_step: float = 1e-5        # step grows as max(fd_step, fd_rel_step*|coord|)

    # field/domain validation
    tensor_symmetry_rel: float = 1e-13
    puncture_guard: float = 1e-6
    metric_det_floor: float = 1e-12

    # surface geometry
    unit_normal: float = 1e-12
    gauss_bonnet: float = 1e-6

    # normal variations and the deformation oracle
    variation_step: float = 1e-4     # epsilon for offset surfaces, one Richardson level
    flow_step: float = 1e-4          # Lie-dragging flow parameter
    oracle_mots_gate: float = 1e-8   # max |theta_k| allowed before taking variations

    # MOTS finder
    mots_residual: float = 1e-10
    jacobian_step: float = 1e-6
    max_step_halvings: int = 20

    # stability operator / spectrum
    dense_eig_limit: int = 4096
    marginal_rel: float = 1e-6       # marginality band, relative to ||L||
    eig_reality_rel: float = 1e-8
    eig_residual_rel: float = 1e-8
    kernel_residual: float = 1e-8

    # symmetry module scans
    slice_symmetry: float = 1e-10    # is_symmetry default residual bound
    tangency_rel: float = 1e-8       # |alpha| threshold relative to max |x|_h
    minimal_point_rel: float = 1e-8  # |Z2| threshold relative to max |Z2| (plus floor)
    nowhere_vanishing_rel: float = 1e-6
    extremal_gradient_rel: float = 1e-6
    identity_zero: float = 1e-8      # algebraic identities (projected symmetry, Gauss)
    prime_identity: float = 1e-6     # identities involving finite-difference primes
    quadrature_zero: float = 1e-10   # closed-surface integral identities
    einstein_gate_rel: float = 1e-8
    vacuum_residual: float = 1e-9

    def with_overrides(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT_TOLERANCES = Tolerances()
