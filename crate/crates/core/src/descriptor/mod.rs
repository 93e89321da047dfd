//! Index-1 descriptor systems: the block model, its Schur-complement view,
//! sparse shifted solves, file I/O, and a synthetic generator.

mod generator;
mod io;
mod system;

pub use generator::{gen_synthetic, gen_synthetic_spec, SyntheticSpec};
pub use io::{
    load_system, manifest_path, matrix_market_string, read_manifest, read_matrix_market,
    write_matrix_market, write_system, Manifest, MANIFEST_NAME,
};
pub use system::{
    oracle_cap, schur_reduce_dense, schur_reduce_dense_with_cap, shifted_block_solve,
    transfer_eval, transfer_eval_feedback, DenseGeneralized, Index1System, ShiftedSolveRequest,
    ShiftedSystem, Side, SystemBlocks, DEFAULT_ORACLE_CAP, ORACLE_CAP_ENV,
};
pub(crate) use system::normalize_feedback;
