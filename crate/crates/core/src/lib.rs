//! Data-driven virtual battery models of building flexibility.
//!
//! The crate learns a nominal state model from request-free controller
//! logs ([`nominal`]), identifies the sample spaces of the battery
//! coefficients from request/recovery data ([`battery`]), turns them into
//! CVaR uncertainty sets ([`risk`]), and predicts flexibility envelopes
//! ([`envelope`]). A single-zone building simulator ([`sim`]) generates
//! training data and ground truth; [`pipeline`] ties everything together.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod envelope;
pub mod io;
pub mod nominal;
pub mod par;
pub mod pipeline;
pub mod plot;
pub mod risk;
pub mod sim;

pub use par::Execution;
