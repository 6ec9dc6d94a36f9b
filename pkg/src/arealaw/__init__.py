"""Desk-scale numerical laboratory for entanglement area-law diagnostics in
gapped one-dimensional quantum chains.

The package instantiates, at exactly-diagonalizable sizes, the objects
behind the one-dimensional entanglement area law: approximate ground-state
projector triples, Gaussian spectral filters, light-cone constants, entropy
and Schmidt-tail bounds, matrix-product-state truncations, and
expander-graph states that mix too fast to be gapped ground states.
"""

__version__ = "0.1.0"

from .lattice import Hamiltonian1D, block_sites, build_model, load_model, save_model
from .spectral import (
    DegenerateGroundStateError,
    DimensionBudgetError,
    SpectralCache,
    SpectralData,
    diagonalize,
    evolve,
    gaussian_filter_operator,
    gaussian_filter_projector,
)
from .entanglement import (
    CutData,
    lindblad_uhlmann_check,
    reduced_density,
    relative_entropy,
    renyi_entropy,
    schmidt_cut,
    von_neumann_entropy,
)
from .locality import (
    LocalityConstants,
    LocalOperator,
    commutator_norm_profile,
    fit_locality_constants,
    truncate_support,
)
from .agsp import (
    AGSPRecord,
    AGSPTriple,
    assemble_and_measure,
    build_agsp,
    build_o_b,
    build_side_projectors,
    build_truncated_pieces,
    positivize,
    split_hamiltonian,
)
from .mps import (
    MatrixProductState,
    conjecture_probe,
    fwdback_functional,
    k0_from_entropy,
    k0_mass_check,
    schmidt_tail,
    state_to_mps,
)
from .expander import ExpanderMPS, build_expander_mps, expander_interval_rdm
from .bounds import (
    BoundParameters,
    bootstrap_bound,
    claim_iteration,
    relent_gap_check,
    renyi_convergence_ok,
    s_max,
    xbd_chain_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
