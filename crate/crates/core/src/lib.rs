//! Error exponents for channel coding and Slepian-Wolf source coding over
//! finite alphabets, with a Monte Carlo simulator for the coding schemes.
//!
//! All logarithms are natural; rates and exponents are in nats.

pub mod binary;
pub mod channel;
pub mod error;
pub mod ext;
pub mod info;
pub mod optim;
pub mod parallel;
pub mod sim;
pub mod sw;
pub mod types;

pub use channel::{
    bhattacharyya_distance, capacity, cc_exponent, degeneracy, degeneracy_predicate, ex_zero_rate_envelope,
    general_exponent, rate_thresholds, r_sp_inf_channel, straight_line_exponent, CcSolver, Degeneracy, ExponentKind,
    RateThresholds, StraightLine,
};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use info::{
    binary_entropy, cond_kl_divergence, entropy, kl_divergence, mutual_information, Channel, Distribution, JointSource,
};
pub use types::{enumerate_types, type_class_log_prob, type_class_log_size, type_class_size, TypeDescriptor};
