//! Numerics for replicating an unknown von Neumann measurement: producing
//! two working copies from a single use of the device, either with the
//! input states in hand (cloning) or before they arrive (learning).
//!
//! Networks are represented by their Choi operators and composed with the
//! link product.  A chain of symmetrizations reduces the optimization over
//! replication strategies to a handful of multiplicity-space blocks; an
//! extremal-point enumeration then recovers the optimal cloning fidelity
//! `4/(3d)` and a closed form plus one-dimensional refinement gives the
//! optimal learning fidelity (`7/12` at `d = 2`).  A control-SWAP network
//! realizes the optimal cloning instrument exactly, element by element, and
//! a verification suite recomputes every published closed form and records
//! the discrepancies it finds.

pub mod closed_forms;
pub mod comb;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod operator;
pub mod optimize;
pub mod realization;
pub mod report;
pub mod rng;
pub mod symmetry;
pub mod verify;

pub use comb::{
    apply_channel, check_comb, check_instrument, choi_of_unitary, link, link_ops, ChoiOperator,
    GeneralizedInstrument, NetworkShape, ReplicationTask, Tooth, WireRole,
};
pub use error::{Error, Result};
pub use measurement::{
    haar_average_fidelity, haar_sample, mp_channel_choi, povm_fidelity, replicated_povm,
    replication_fidelity, Povm, VonNeumannPovm,
};
pub use operator::{
    max_entangled_vector, omega_projector, Operator, Signature, Subsystem, HERMITICITY_TOL,
    PSD_TOL,
};
pub use optimize::{
    cloning_extremal_search, cloning_fidelity_closed_form, estimate_prepare_fidelity,
    feasible_random_blocks, learning_fidelity_closed_form, optimal_cloning_blocks,
    optimal_learning_blocks, OptimizationResult,
};
pub use realization::{
    bipartite_q_povm, born_probabilities, control_povm, realization_instrument, simulate_run,
    ControlPovm, ControlSwapGate, Histogram,
};
pub use report::{ReportEntry, Status, VerificationReport};
pub use symmetry::{
    assemble_instrument, class_of, delta_table, extract_blocks, reduced_fidelity, symmetrize,
    twirl, DeltaTable, FidelityBreakdown, IrrepProjectors, OutcomeClass, ReducedBlocks,
    Symmetrization,
};
pub use verify::{run_verification, VerifyConfig};
