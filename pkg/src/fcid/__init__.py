"""Online identification of PEMFC polarization-model parameters with Kalman
filters and innovation-based measurement-noise estimation."""

from .errors import (ConfigError, DimensionError, DomainError, EmptyDataError, NotPositiveError,
                     NumericalError, OrderError, ParseError, RangeError)
from .filter import FilterState, StepResult, Trace, init, run, step
from .models import (KimModel, KimParams, LogBase, SquadritoConstants, SquadritoModel,
                     SquadritoParams, kim_jacobian, kim_predict, make_model, squadrito_predict,
                     squadrito_regressors)
from .noise_adapt import NoiseAdapter, init_adapter

__version__ = "0.1.0"
