"""Sample-based Krylov quantum diagonalisation for the lattice Schwinger model with a theta term."""

from .errors import (
    ConfigError,
    CountsParseError,
    CountsSchemaError,
    DetectionError,
    EigensolverError,
    FitError,
    InfeasibleError,
    SkqdError,
)
from .evolution import SectorState, apply_trotter_step, evolve, reference_state
from .experiments import ScanResult, detect_l0c, fit_l0c_model, locate_l0c, scan_l0, table1_report
from .hamiltonian import SchwingerParams, build_pauli_terms, dense_matrix, diagonal_energy, hopping_neighbors
from .krylov import SkqdResult, SubspaceBasis, exact_ground_state, project, run_skqd
from .observables import ObservableRecord, expected_particle_number
from .sampling import NoiseSpec, ShotCounts, ingest_counts, parse_counts, postselect, sample
from .sector import SectorBasis

__version__ = "0.1.0"
