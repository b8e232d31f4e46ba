"""Self-adjointness analysis of (k,l)-order squeezing operators

``A = xi (a^+)^k a^l + conj(xi) (a^+)^l a^k + f(a^+ a)`` on the Fock basis:
classification (essentially self-adjoint vs deficient), deficiency vectors from
the branch recurrences, their formal asymptotics, and truncated-matrix numerics.
"""

from .birkhoff import AsymptoticSolution, RecurrenceExpansion, asymptotics, expand_recurrence, formal_solutions, predict
from .classifier import Classification, Rationale, Verdict, classify, dominance_threshold, kappa_expansion, relative_bound_check
from .deficiency import (
    DeficiencyVector,
    ExtensionDomainBasis,
    RecurrenceSolution,
    SparseVector,
    assemble_vector,
    conjugation_apply,
    count_l2_branches,
    deficiency_residual,
    deficiency_vectors,
    extension_basis,
    solve_branch,
)
from .fock import (
    KerrField,
    OperatorSpec,
    PolynomialField,
    TabulatedField,
    ZeroField,
    action_column,
    beta,
    pochhammer,
)
from .halfseries import HalfPowerSeries
from .matrixlab import SpectrumReport, TruncatedOperator, build_truncated, ground_energy_sweep, parity_study, spectrum, variational_witness

__version__ = "0.1.0"
