"""Mean-field Rydberg reservoir: dynamics, bistability analysis and a linear-readout learning pipeline."""

__version__ = "0.1.0"

from .dynamics import (
    DriveSchedule,
    Trajectory,
    TrajectoryConfig,
    integrate_ode,
    integrate_sde,
    relax_to_steady,
)
from .estimators import LinearReadout, ReservoirTransformer, SavitzkyGolayFilter
from .exceptions import (
    ConvergenceError,
    DataError,
    DivergenceError,
    ParameterError,
    ReservoirError,
    SolverError,
    SpinodalError,
)
from .fitting import FitResult, fit_exponential
from .model import (
    HysteresisBranch,
    ModelParams,
    PhaseDiagram,
    StationarySet,
    StationaryState,
    bistable_interval,
    coherence_adiabatic,
    drift,
    drift_derivative,
    hysteresis_sweep,
    phase_diagram,
    relaxation_time,
    stationary_states,
)
from .pipeline import (
    FilterSpec,
    PredictionReport,
    ReadoutModel,
    WindowedDataset,
    aggregate,
    build_dataset,
    evaluate,
    fit_readout,
    multiplex_downsample,
    savitzky_golay,
    split_dataset,
)
from .signals import (
    EncodingSpec,
    LorenzParams,
    TimeSeriesData,
    encode,
    export_csv,
    ingest_csv,
    lorenz_generate,
)
