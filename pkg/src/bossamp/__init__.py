"""Message-passing recovery of sparse, group-sparse and jointly sparse signals."""
from .model import (
    EPS_GAMMA,
    GroupStructure,
    PriorKind,
    ProblemInstance,
    SensingMatrix,
    SignalPrior,
    gen_group_structure,
    gen_sensing_matrix,
    gen_signal,
    make_instance,
    make_joint_instance,
)
from .recover import (
    DivergenceError,
    RecoveryResult,
    StoppingRule,
    amp,
    bamp,
    bossamp_group,
    bossamp_joint,
)

__version__ = "0.1.0"
