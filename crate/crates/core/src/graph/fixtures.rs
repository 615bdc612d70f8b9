//! Example graphs shipped with the crate, in the text format of
//! [`CausalDag::parse`](super::CausalDag::parse).

use super::{CausalDag, GraphError};

/// Fixture names with the horizon each one is drawn to.
pub const ALL: [(&str, u32); 9] = [
    ("fig1", 2),
    ("fig2", 2),
    ("fig3", 2),
    ("fig4", 2),
    ("fig5", 3),
    ("fig6", 2),
    ("fig7a", 2),
    ("fig7b", 2),
    ("fig7c", 2),
];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => include_str!("../../fixtures/fig1.dag"),
        "fig2" => include_str!("../../fixtures/fig2.dag"),
        "fig3" => include_str!("../../fixtures/fig3.dag"),
        "fig4" => include_str!("../../fixtures/fig4.dag"),
        "fig5" => include_str!("../../fixtures/fig5.dag"),
        "fig6" => include_str!("../../fixtures/fig6.dag"),
        "fig7a" => include_str!("../../fixtures/fig7a.dag"),
        "fig7b" => include_str!("../../fixtures/fig7b.dag"),
        "fig7c" => include_str!("../../fixtures/fig7c.dag"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<CausalDag, GraphError> {
    let text = source(name).ok_or_else(|| GraphError::UnknownNode(name.to_string()))?;
    CausalDag::parse(text)
}

pub fn horizon(name: &str) -> Option<u32> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, k)| *k)
}
