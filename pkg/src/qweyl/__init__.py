"""Exact q-deformed differential operator calculus over Q[x][t]/(t^N)."""

__version__ = "0.1.0"

from .delta import (
    CoordinateSystem,
    Thickening,
    delta_on_epsilon,
    gamma,
    gamma_basis,
    multi_indices,
    shift_system,
    standard_system,
    system_from_label,
)
from .errors import (
    AssemblyInconsistent,
    CoordinateMismatch,
    EpsilonCapExceeded,
    InvalidConfig,
    NotDivisible,
    PrimeTwoUnsupported,
    QweylError,
    RouteMismatch,
)
from .patchwork import PatchBundle, assemble, relevant_primes, verify_uniqueness
from .qconn import (
    QConnection,
    Stratification,
    cocycle_check,
    coherence_check,
    quasi_nilpotent,
    recover,
    stratify,
    transport,
)
from .qdiff import (
    DiffOp,
    a_psi_member,
    apply_op,
    compose,
    dual_basis,
    nabla,
    nabla_power,
    pair,
    structure_constants,
    to_nabla_basis,
)
from .ring import (
    RingElt,
    exact_divide,
    gauss_binomial,
    p_integral,
    q_factorial,
    q_integer,
    unit_u,
)
from .sections import (
    Section,
    canonical_section,
    compose_sections,
    conjugate,
    invert,
    qcrys_member,
    trivial_section,
)
from .serialize import dumps, from_json, loads, to_json

__all__ = [
    "AssemblyInconsistent",
    "CoordinateMismatch",
    "CoordinateSystem",
    "DiffOp",
    "EpsilonCapExceeded",
    "InvalidConfig",
    "NotDivisible",
    "PatchBundle",
    "PrimeTwoUnsupported",
    "QConnection",
    "QweylError",
    "RingElt",
    "RouteMismatch",
    "Section",
    "Stratification",
    "Thickening",
    "a_psi_member",
    "apply_op",
    "assemble",
    "canonical_section",
    "cocycle_check",
    "coherence_check",
    "compose",
    "compose_sections",
    "conjugate",
    "delta_on_epsilon",
    "dual_basis",
    "dumps",
    "exact_divide",
    "from_json",
    "gamma",
    "gamma_basis",
    "gauss_binomial",
    "invert",
    "loads",
    "multi_indices",
    "nabla",
    "nabla_power",
    "p_integral",
    "pair",
    "q_factorial",
    "q_integer",
    "qcrys_member",
    "quasi_nilpotent",
    "recover",
    "relevant_primes",
    "shift_system",
    "standard_system",
    "stratify",
    "structure_constants",
    "system_from_label",
    "to_json",
    "to_nabla_basis",
    "transport",
    "trivial_section",
    "unit_u",
    "verify_uniqueness",
]
