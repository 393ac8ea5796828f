"""percolab: 2D invasion percolation and critical-percolation statistics."""

from .lattice import (AnnulusRegion, BoxRegion, DualEdge, Edge, HORIZONTAL,
                      VERTICAL, WeightField, canonical_edge, derive_seed,
                      edges_in, mix64, site_norm)
from .invasion import (InvasionRun, Outlet, PondDecomposition, ReachRadius,
                       StepCount, WeightDrop, certify_outlets, decompose,
                       format_snapshot, invade, outlet_count,
                       pond_decomposition, read_snapshot, write_snapshot)

__version__ = "0.1.0"
