//! Reliability assessment from expert-elicited data.
//!
//! Two engines share this crate:
//!
//! - [`er`] aggregates weighted, possibly incomplete belief distributions
//!   over a hierarchy of attributes with Dempster's rule.
//! - [`eb`] fits conjugate prior hyperparameters to multi-unit data by
//!   maximizing the marginal likelihood, then reports posteriors and
//!   predictive reliability at the fitted prior.
//!
//! [`oracles`] holds brute-force and quadrature reference implementations
//! used to check both engines; [`io`] handles the JSON file formats and
//! reports behind the `rel` command.

pub mod belief;
pub mod eb;
pub mod er;
pub mod error;
pub mod io;
pub mod oracles;
pub mod synth;

pub use belief::{
    expected_score_interval, make_belief, AggregationConfig, AttributeNode, BeliefDistribution,
    FinalizeMode, GradeFrame, MassFunction, NodePayload, Weighting,
};
pub use error::{Error, Result};
