//! Separable effects of a randomized treatment on an outcome, split into an
//! adherence component and an outcome component.

pub mod error;
pub mod graph;
pub mod ipw;
pub mod models;
pub mod oracle;
pub mod panel;
pub mod risk;
pub mod sim;

pub use error::{ConfigError, Error, ErrorKind, EstimationError, OracleError};
pub use panel::{CovariateLayout, Panel, PersonPeriod};
pub use risk::{RiskCurve, RiskPoint};

/// Guide chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/panels.md")]
    mod panels {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
}
