//! Finite-blocklength bounds: the projection-decoder achievability bound, the
//! single-user converse, and reference approximations (normal approximation,
//! treating interference as noise, crystallized-fading successive dropping).

mod achievability;
mod approx;
mod converse;
mod projection;

pub use achievability::{
    achievability_pt_analytic, achievability_pt_mc, achievability_pupe, f_n, sample_projection_stats, slot_error_bound_mc,
    threshold_v, FblParams, LogitKde, OrderStatistics, PtAnalytic, PtBound, SlotBound,
};
pub use approx::{
    crystallized_gains, normal_approx_pe, shamai_bettesh_min_ebn0, shamai_bettesh_outage, tin_pe, FadingSamples,
    NormalApproxModel,
};
pub use converse::{converse_min_ebn0, converse_theorem1, ConverseResult};
pub use projection::{claim1_statistic, max_projection_g, projection_g};
