//! Parallel successive convex approximation (FLEXA) and its hybrid variants.

pub mod engine;
pub mod hybrid;
pub mod selection;
pub mod surrogate;

pub use engine::{
    flexa_random_greedy, flexa_run, prox_residual_inf, FlexaConfig, FlexaRecord, FlexaResult, FlexaStop, InexactPolicy,
    TauPolicy,
};
pub use hybrid::{flexa_parallel_cyclic, flexa_parallel_greedy_cyclic};
pub use selection::{error_bound, greedy_select, sample_blocks, ErrorBound, Sampling, SelectionRule};
pub use surrogate::{best_response_prox_linear, ProxLinear, SurrogateFamily, SurrogateKind};
