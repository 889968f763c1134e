//! End-to-end bit error model of a relay-assisted molecular link followed
//! by three electromagnetic hops (implant to body surface, on-body,
//! off-body), and the split of a fixed slot between the molecular and the
//! electromagnetic symbols.
//!
//! ```
//! use hybrid_ber::{config::default_scenario, optimize::ber_profile};
//!
//! let scenario = default_scenario();
//! let b = ber_profile(4e-3, &scenario).unwrap();
//! assert_eq!(b.p_e2e, hybrid_ber::combine(b.links()));
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod combine;
pub mod config;
pub mod detection;
pub mod em;
pub mod error;
pub mod mc;
pub mod model;
pub mod optimize;
pub mod presets;
pub mod special;

pub use combine::{combine, BerBreakdown};
pub use error::{ConfigError, Error, NumericError};
pub use model::{
    Hop, In2onConfig, MolecularLinkConfig, OffBodyConfig, OnBodyConfig, Scenario, SlotBudget,
    TissueProfile, Vector3,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/em-links.md")]
    mod em_links {}
    #[doc = include_str!("../../../book/src/combining.md")]
    mod combining {}
    #[doc = include_str!("../../../book/src/slot-split.md")]
    mod slot_split {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
