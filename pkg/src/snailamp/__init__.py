"""Design and simulation toolkit for SNAIL parametric amplifiers."""

from .circuit import (
    DeviceSpec,
    LumpedEmbedding,
    ModeParameters,
    coupling_kappa,
    distributed_frequency,
    distributed_nonlinearities,
    effective_coefficients,
    equivalent_lumped,
    flux_sweep,
    kerr_free_flux,
    lumped_mode_parameters,
    solve_constraint,
)
from .design import DesignCandidate, DesignTarget, evaluate, search
from .experiments import (
    iip3_analytic,
    iip3_simulated,
    p1db,
    p1db_estimates,
    stark_shift_experiment,
    validity_check,
)
from .hb import (
    DriveSet,
    HBSolution,
    OperatingPoint,
    calibrate_pump,
    drive_from_power,
    gain,
    gain_profile,
    hb_solve,
    linear_response,
    power_from_drive,
)
from .io import parse_device, write_device
from .snail import (
    SnailCoefficients,
    SnailParams,
    find_minimum,
    snail_inductance,
    snail_potential,
    taylor_coefficients,
)

__version__ = "0.1.0"
