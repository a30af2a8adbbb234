//! Online packet scheduling over a link with adversarial bit errors.
//!
//! The crate simulates a sender that transmits packets of two lengths over a
//! link whose errors are placed by an adaptive adversary, and measures the
//! sender's delivered length against an offline optimum or against the
//! companion schedule built by the adversary.

pub mod adversaries;
pub mod arrivals;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod offline;
pub mod schedulers;

pub use adversaries::{
    Adversary, AdversaryContext, AdversaryDecision, AdversarySpec, InFlight, LinkView, OffBook,
    UnknownAdversary,
};
pub use arrivals::*;
pub use engine::*;
pub use metrics::*;
pub use model::*;
pub use offline::*;
pub use schedulers::*;
