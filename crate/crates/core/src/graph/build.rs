use super::{CausalDag, GraphError, NodeRole};

/// Which treatment component an edge is routed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    A,
    Y,
}

/// Assignment of the treatment's outgoing edges to its two components.
///
/// Each entry `(component, target)` adds `component -> target`. Every former
/// child of the treatment must appear at least once; the other component may
/// also be named as a target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Routing {
    pub edges: Vec<(Component, String)>,
}

impl Routing {
    pub fn new() -> Routing {
        Routing::default()
    }

    pub fn route(mut self, component: Component, target: &str) -> Routing {
        self.edges.push((component, target.to_string()));
        self
    }
}

pub const COMPONENT_A: &str = "Z_A";
pub const COMPONENT_Y: &str = "Z_Y";

/// Splits the treatment node of `base` into components `Z_A` and `Z_Y`.
pub fn build_separable_dag(base: &CausalDag, routing: &Routing) -> Result<CausalDag, GraphError> {
    let z = base
        .find_role(NodeRole::Treatment)
        .ok_or_else(|| GraphError::MissingRole("base graph has no Z node".into()))?;
    let z_name = base.name(z).to_string();
    let construction = |e: GraphError| GraphError::Construction(e.to_string());

    let mut out = CausalDag::new();
    for (i, node) in base.nodes().iter().enumerate() {
        out.add_node(&node.name, node.role).map_err(construction)?;
        out.set_randomized(&node.name, node.randomized)?;
        if i == z {
            out.add_node(COMPONENT_A, NodeRole::ComponentA).map_err(construction)?;
            out.add_node(COMPONENT_Y, NodeRole::ComponentY).map_err(construction)?;
        }
    }
    out.add_edge(&z_name, COMPONENT_A)?;
    out.add_edge(&z_name, COMPONENT_Y)?;
    for (a, b) in base.edge_names() {
        if a != z_name {
            out.add_edge(&a, &b).map_err(construction)?;
        }
    }

    let former: Vec<&str> = base.children(z).iter().map(|&c| base.name(c)).collect();
    for (component, target) in &routing.edges {
        let (from, other) = match component {
            Component::A => (COMPONENT_A, COMPONENT_Y),
            Component::Y => (COMPONENT_Y, COMPONENT_A),
        };
        if target != other && !former.contains(&target.as_str()) {
            return Err(GraphError::Construction(format!(
                "{from} -> {target} does not replace an edge out of {z_name}"
            )));
        }
        out.add_edge(from, target).map_err(construction)?;
    }
    if let Some(missing) = former.iter().find(|c| !routing.edges.iter().any(|(_, t)| t == *c)) {
        return Err(GraphError::Construction(format!(
            "edge {z_name} -> {missing} is not routed to a component"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;
    use std::collections::BTreeSet;

    fn collapsed_fig1() -> CausalDag {
        CausalDag::parse(
            "node Z role=Z randomized\nnode A1 role=A[1]\nnode A2 role=A[2]\nnode Y2 role=Y[2]\n\
             Z -> A1\nZ -> A2\nZ -> Y2\nA1 -> A2\nA1 -> Y2\nA2 -> Y2\n",
        )
        .unwrap()
    }

    fn fig1_routing() -> Routing {
        Routing::new()
            .route(Component::A, "A1")
            .route(Component::A, "A2")
            .route(Component::Y, "Y2")
    }

    #[test]
    fn reproduces_the_cost_graph() {
        let built = build_separable_dag(&collapsed_fig1(), &fig1_routing()).unwrap();
        let fixture = fixtures::load("fig1").unwrap();
        assert_eq!(built.edge_names(), fixture.edge_names());
    }

    #[test]
    fn no_treatment_edges() {
        let base = CausalDag::parse("node Z role=Z\nnode Y1 role=Y[1]\n").unwrap();
        let built = build_separable_dag(&base, &Routing::new()).unwrap();
        let want: BTreeSet<_> = [("Z", "Z_A"), ("Z", "Z_Y")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(built.edge_names(), want);
    }

    #[test]
    fn errors() {
        let base = collapsed_fig1();
        let partial = Routing::new().route(Component::A, "A1").route(Component::A, "A2");
        assert!(matches!(build_separable_dag(&base, &partial), Err(GraphError::Construction(_))));
        let cyclic = fig1_routing().route(Component::A, "Z_Y").route(Component::Y, "Z_A");
        assert!(matches!(build_separable_dag(&base, &cyclic), Err(GraphError::Construction(_))));
        let stray = fig1_routing().route(Component::Y, "Z");
        assert!(matches!(build_separable_dag(&base, &stray), Err(GraphError::Construction(_))));
    }

    /// Merging the components back into the treatment recovers the base edges.
    #[test]
    fn merge_back_recovers_base() {
        let base = collapsed_fig1();
        for routing in [
            fig1_routing(),
            fig1_routing().route(Component::Y, "A2").route(Component::A, "Y2"),
            fig1_routing().route(Component::A, "Z_Y"),
        ] {
            let built = build_separable_dag(&base, &routing).unwrap();
            let merge = |n: &str| if n == "Z_A" || n == "Z_Y" { "Z".to_string() } else { n.to_string() };
            let merged: BTreeSet<(String, String)> = built
                .edge_names()
                .into_iter()
                .map(|(a, b)| (merge(&a), merge(&b)))
                .filter(|(a, b)| a != b)
                .collect();
            assert_eq!(merged, base.edge_names());
        }
    }
}
