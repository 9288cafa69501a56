//! Training algorithms and diagnostics.

pub mod bcd;
pub mod conv;
pub mod diagnostics;
pub mod lpgd;
pub mod report;

pub use bcd::{
    bcd_dr, block_coordinate_descent, project_with_radius, soft_threshold, BcdConfig, BlockObjective, RadiusSchedule,
    SdlBlocks, SubStep,
};
pub use conv::{recover_factors, sdl_conv_feat, sdl_conv_filt, sdl_conv_observed, LiftedObjective};
pub use diagnostics::{
    conditioning, default_tau, encode, epsilon_stationarity, epsilon_stationarity_blocks, gradient_mapping, is_epsilon_stationary,
    predict, predict_batch, ConditioningReport, DEFAULT_TAU,
};
pub use lpgd::{lpgd, lpgd_observed, rank_project_point, LpgdConfig, LpgdObjective, LpgdPoint};
pub use report::{BlockMove, IterRecord, SolverReport, Termination};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{ConstraintSpec, DenseMatrix};
use crate::loss::{FactorState, SdlProblem};

pub(crate) fn init_block(rng: &mut ChaCha8Rng, rows: usize, cols: usize, c: &ConstraintSpec) -> DenseMatrix {
    let m = DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
    let m = match c.radius() {
        Some(radius) if m.frobenius_norm() > 0.0 => m.scale(0.1 * radius / m.frobenius_norm()),
        _ => m.scale(0.1),
    };
    c.project(&m)
}

/// Seeded feasible starting point: uniform `[0, 1)` entries shrunk to a
/// tenth of the block's constraint radius (a tenth in absolute terms when
/// the block has no radius), then projected.
pub fn init_factors(prob: &SdlProblem, seed: u64) -> Result<FactorState> {
    prob.constraints.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = &prob.constraints;
    Ok(FactorState {
        w: init_block(&mut rng, prob.p(), prob.r(), &c.dict),
        h: init_block(&mut rng, prob.r(), prob.n(), &c.code),
        beta: init_block(&mut rng, prob.r(), prob.kappa, &c.beta),
        gamma: init_block(&mut rng, prob.q(), prob.kappa, &c.aux),
    })
}
