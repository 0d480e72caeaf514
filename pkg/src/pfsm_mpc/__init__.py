"""Tracking control toolkit for a dual-axis piezoelectric fast steering mirror.

Pipeline: a Hammerstein plant (Bouc-Wen hysteresis stages feeding identified
MIMO linear dynamics), a Kalman filter over the linear state, a constrained
receding-horizon controller with an error-integral state solved by dual
coordinate descent, exact per-axis hysteresis inversion on the command path,
baseline controllers, and a reproducible experiment harness with a CLI.
"""

from .baselines import DimFeedforward, PidController, PidGains
from .compensator import CompensatorState, HysteresisCompensator, compensate
from .config import ExperimentConfig, load_config, resolve_config
from .estimator import KalmanConfig, KalmanFilter, KalmanState, initial_kalman_state, kalman_step
from .harness import ExperimentRecord, build_plant_model, run_experiment, run_sweep
from .hysteresis import (
    DEFAULT_PARAMS,
    BoucWenParams,
    HysteresisState,
    bouc_wen_inverse_step,
    bouc_wen_step,
)
from .lti import (
    MimoPlantModel,
    StateSpaceModel,
    TransferFunction,
    assemble_mimo,
    default_mirror_model,
    simulate_ss,
    to_ccf,
    tustin_discretize,
)
from .metrics import mae, rmse
from .mpc import (
    AugmentedModel,
    MpcConfig,
    MpcController,
    PredictionMatrices,
    QpSolution,
    build_augmented,
    build_prediction,
    build_qp,
    kkt_residuals,
    solve_dual_cd,
    solve_qp_instance,
)
from .plant import DisturbanceSpec, PfsmPlant, PlantState
from .trajectories import AxisWaveform, TrajectorySpec, generate

__version__ = "0.1.0"
