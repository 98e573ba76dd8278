//! Federated fuzzy c-means.
//!
//! Clustering kernels ([`kmeans`], [`fcm`]), the simulated client/server
//! protocol ([`federation`]), synthetic data ([`datagen`]), text datasets
//! ([`io`]) and quality metrics ([`metrics`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod fcm;
pub mod federation;
pub mod io;
pub mod kmeans;
pub mod matching;
pub mod metrics;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use fcm::{
    fcm_center_update, fcm_fit, fcm_fit_from_centers, fcm_membership_update, fcm_objective, FcmConfig,
    FcmFit, MembershipFormula,
};
pub use federation::{
    client_local_update, run_federated, server_avg1, server_avg2, server_init_centers,
    server_round_converged, Avg2Seeding, AvgMethod, ClientState, ClientUpdate, FedConfig, FedResult,
    InitStrategy,
};
pub use kmeans::{
    kmeans_assign, kmeans_center_update, kmeans_fit, kmeans_objective, kmeanspp_init, KmeansConfig, KmeansFit,
};
pub use metrics::{hard_assign, knowledge_gap, ngap, osse, wsse, MetricsReport, SseNorm};
pub use types::{Centers, Dataset, MembershipMatrix};
