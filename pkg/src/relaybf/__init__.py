"""Minimum-power distributed relay beamforming under per-user SINR targets.

Three designs over the semidefinite relaxation X = w w^H: the nominal
(non-robust) program, a conservative min-over-max robust variant, and the
worst-case robust program that certifies every SINR constraint against
norm-bounded, positive-semidefiniteness-preserving perturbations of the
model matrices; plus Monte-Carlo engines for transmit power, feasibility
and symbol error probability.
"""

__version__ = "0.1.0"

from .model import (ChannelRealization, ChannelStatistics, FadingModel,
                    NetworkConfig, db_to_linear, generate_channels,
                    linear_to_db)
from .matrices import (BeamformingMatrices, build_matrices, qos_margin, sinr,
                       transmit_power)
from .uncertainty import (PerturbationSet, SampleMode, UncertaintyBounds,
                          WorstCaseCertificate, derive_bounds, qos_slack,
                          reconstruct_worst_case, sample_perturbation,
                          sample_perturbations)
from .conic import (ConicProgram, ConicSolution, SolverSettings, SolveStatus,
                    assemble_mom_sdp, assemble_nonrobust_sdp,
                    assemble_robust_sdp, deembed_hermitian, embed_hermitian,
                    export_program, solve)
from .solvers import (DesignMethod, ExtractionFailedError,
                      RandomizationSettings, SolverSolution, design,
                      extract_rank_one)
from .sim import (MethodAggregate, SweepReport, TrialRecord, power_sweep,
                  sep_sweep, simulate_symbol_errors, write_aggregate_csv,
                  write_trials_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
