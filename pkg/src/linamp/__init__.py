"""Phase-preserving linear amplifiers as Lindblad channels on truncated Fock spaces."""

from .certifier import CertificationResult, MomentRecord, certify, estimate_gain, forbidden_region
from .errors import (DegenerateInput, DimensionMismatch, DomainError, GuardExceeded, InconsistentGain,
                     LinampError, NoAmplitudeRecord, NotPhasePreserving, StateError, ToleranceError,
                     TruncationError, Unsupported)
from .fock import DensityMatrix, FockSpace, MomentReport, StateSpec, make_state, moments
from .lindblad import EvolveConfig, JumpTerm, LindbladSpec, evolve, evolve_moments, rhs
from .paramp import ParampSpec, apply_paramp, paramp_predict, squeeze_unitary
from .trajectories import TrajectoryConfig, TrajectoryStats, run_trajectories
from .zoo import A1, A2, A3, TwoPhoton, gain, moment_ode_rhs, predict_moments, to_spec

__version__ = "0.1.0"
