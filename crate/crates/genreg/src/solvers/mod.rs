//! Reconstruction solvers: the backtracking descent algorithms, proximal
//! maps, PDHG total-variation machinery, method dispatch and parameter
//! sweeps.

pub mod backtrack;
mod methods;
pub mod pdhg;
pub mod prox;
pub mod sweep;

pub use backtrack::{
    alt_gd_backtracking, gd_backtracking, palm_backtracking, BacktrackConfig, FnObjective,
    ProxTerm, RunTrace, SmoothObjective, SmoothObjective2, Stopping, ZeroTerm,
};
pub use methods::{solve, InitPolicy, Method, SolveOptions, SolveResult, SolveSpec};
pub use pdhg::{grad2d, grad2d_adjoint, pdhg_tv, tv_prox, tv_value, PdhgOptions, PdhgResult};
pub use prox::{prox_l1, prox_scaled_sqnorm, L1Term, SqNormTerm};
