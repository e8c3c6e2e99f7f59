"""Moment dynamics of quadratic bosonic Hamiltonians.

Incidence-factor encoding of moments, Hermitian moment evolution, readout,
quantum-walk embedding and the clock-register postselection gadget, each
with a brute-force reference path.
"""

from .errors import (
    BosonMomentsError,
    DegenerateStateError,
    InstanceParseError,
    NotPSDError,
    NotReconstructibleError,
    NumericalError,
    ParameterError,
    PostselectionImpossibleError,
    PreconditionError,
    ScaleError,
    SignConventionError,
    StructuralError,
)
from .hamiltonian import (
    HamiltonianTag,
    QuadraticHamiltonian,
    SparseSymmetricMatrix,
    classify,
    decompose_generator,
    first_moment_generator,
    validate,
)
from .encoding import GreekIndex, MomentVector, build_incidence_factor, encode_state, to_greek_moments
from .dynamics import (
    closed_form_evolution,
    effective_hamiltonian,
    evolve_first_moments,
    evolve_moment_vector,
    resource_estimate,
)
from .readout import Decision, IndexSetSpec, decide, parse_index_set, reconstruct, reconstruct_all, zeta
from .walk import WalkGraph, embed_walk, verify_walk_equivalence
from .gadget import Circuit, build_alt_family, build_fk, run_postbqp, solve_clock_spectrum

__version__ = "0.1.0"
