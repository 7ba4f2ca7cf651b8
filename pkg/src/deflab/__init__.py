"""Comparison of binary quantum experiments through testing curves and deficiencies."""

from .channels import Channel, ChoiMatrix, choi_from_map, is_completely_positive, random_channel, trace_defect
from .curve import (
    TestingCurve,
    breakpoints,
    eigen_branches,
    eigencurve_derivative,
    extremal_ts,
    f_derivative,
    f_value,
    np_projection,
)
from .deficiency import (
    DeficiencyReport,
    bayes_risk,
    check_deficiency_vs_measurements,
    check_two_deficiency,
    two_deficiency_index,
)
from .errors import (
    ConstructionError,
    DeficiencyPreconditionError,
    PreconditionError,
    SolverError,
    ValidationError,
)
from .experiment import (
    BinaryExperiment,
    ClassicalBinaryExperiment,
    Experiment,
    LossFunction,
    Povm,
    apply_povm,
    classical_reduction,
    is_abelian,
    povm_embed,
    randomize,
    risk,
)
from .morphism import CpExtensionData, MorphismData, cp_extension, statistical_morphism
from .povm_opt import PovmSolveResult, match_povm, minimize_bayes, project_to_povm
from .witness import WitnessConstruction, crossing_points, separation_demo, tangent_witness

__version__ = "0.1.0"
