//! Typed causal DAGs, d-separation and identification checks.

mod build;
mod dsep;
pub mod fixtures;
mod identify;

pub use build::{build_separable_dag, Component, Routing};
pub use dsep::{d_separated, DsepResult, Path};
pub use identify::{
    check_identification, classify_covariates, CovariatePartition, IdRule, IdentificationReport, IdViolation,
    STRUCTURE_ASSUMPTION,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge {0} -> {1} would create a cycle")]
    Cycle(String, String),
    #[error("node sets overlap at `{0}`")]
    Overlap(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("missing role: {0}")]
    MissingRole(String),
}

/// What a node stands for. Indexed roles carry the interval `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    Treatment,
    ComponentA,
    ComponentY,
    Adherence(u32),
    CovariateA(u32),
    CovariateY(u32),
    /// Prognostic covariate whose pathway is not declared.
    Covariate(u32),
    NonPrognostic(u32),
    Outcome(u32),
    Unmeasured,
}

impl NodeRole {
    pub fn interval(self) -> Option<u32> {
        match self {
            NodeRole::Adherence(k)
            | NodeRole::CovariateA(k)
            | NodeRole::CovariateY(k)
            | NodeRole::Covariate(k)
            | NodeRole::NonPrognostic(k)
            | NodeRole::Outcome(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_covariate(self) -> bool {
        matches!(
            self,
            NodeRole::CovariateA(_) | NodeRole::CovariateY(_) | NodeRole::Covariate(_) | NodeRole::NonPrognostic(_)
        )
    }

    /// Position within an interval: covariates, adherence, outcome.
    pub(crate) fn slot(self) -> Option<u32> {
        match self {
            NodeRole::CovariateA(_) => Some(0),
            NodeRole::CovariateY(_) => Some(1),
            NodeRole::Adherence(_) => Some(2),
            NodeRole::Outcome(_) => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRole::Treatment => f.write_str("Z"),
            NodeRole::ComponentA => f.write_str("ZA"),
            NodeRole::ComponentY => f.write_str("ZY"),
            NodeRole::Adherence(k) => write!(f, "A[{k}]"),
            NodeRole::CovariateA(k) => write!(f, "LA[{k}]"),
            NodeRole::CovariateY(k) => write!(f, "LY[{k}]"),
            NodeRole::Covariate(k) => write!(f, "L[{k}]"),
            NodeRole::NonPrognostic(k) => write!(f, "V[{k}]"),
            NodeRole::Outcome(k) => write!(f, "Y[{k}]"),
            NodeRole::Unmeasured => f.write_str("U"),
        }
    }
}

impl FromStr for NodeRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, k) = match s.split_once('[') {
            Some((h, rest)) => {
                let k = rest
                    .strip_suffix(']')
                    .and_then(|n| n.parse::<u32>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| format!("bad interval in role `{s}`"))?;
                (h, Some(k))
            }
            None => (s, None),
        };
        let role = match (head, k) {
            ("Z", None) => NodeRole::Treatment,
            ("ZA", None) => NodeRole::ComponentA,
            ("ZY", None) => NodeRole::ComponentY,
            ("U", None) => NodeRole::Unmeasured,
            ("A", Some(k)) => NodeRole::Adherence(k),
            ("LA", Some(k)) => NodeRole::CovariateA(k),
            ("LY", Some(k)) => NodeRole::CovariateY(k),
            ("L", Some(k)) => NodeRole::Covariate(k),
            ("V", Some(k)) => NodeRole::NonPrognostic(k),
            ("Y", Some(k)) => NodeRole::Outcome(k),
            _ => return Err(format!("unknown role `{s}`")),
        };
        Ok(role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
    /// Set on a treatment node assigned at random.
    pub randomized: bool,
}

/// Directed acyclic graph over named, role-tagged nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CausalDag {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
}

impl CausalDag {
    pub fn new() -> CausalDag {
        CausalDag::default()
    }

    pub fn add_node(&mut self, name: &str, role: NodeRole) -> Result<usize, GraphError> {
        if self.index.contains_key(name) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        let i = self.nodes.len();
        self.nodes.push(Node {
            name: name.to_string(),
            role,
            randomized: false,
        });
        self.index.insert(name.to_string(), i);
        self.children.push(Vec::new());
        self.parents.push(Vec::new());
        Ok(i)
    }

    pub fn set_randomized(&mut self, name: &str, randomized: bool) -> Result<(), GraphError> {
        let i = self.id(name)?;
        self.nodes[i].randomized = randomized;
        Ok(())
    }

    /// Adds `from -> to`; repeated edges are ignored.
    pub fn add_edge(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        let (a, b) = (self.id(from)?, self.id(to)?);
        if self.edges.contains(&(a, b)) {
            return Ok(());
        }
        if a == b || self.reaches(b, a) {
            return Err(GraphError::Cycle(from.to_string(), to.to_string()));
        }
        self.edges.insert((a, b));
        insert_sorted(&mut self.children[a], b);
        insert_sorted(&mut self.parents[b], a);
        Ok(())
    }

    pub fn id(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn role(&self, i: usize) -> NodeRole {
        self.nodes[i].role
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&a), Some(&b)) => self.edges.contains(&(a, b)),
            _ => false,
        }
    }

    /// Edges as name pairs, sorted.
    pub fn edge_names(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].name.clone(), self.nodes[b].name.clone()))
            .collect()
    }

    pub fn find_role(&self, role: NodeRole) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == role)
    }

    /// Directed path `from ->* to` (true when equal).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.reaches_via(from, to, |_| true)
    }

    /// Directed path whose interior nodes all satisfy `interior`.
    pub fn reaches_via(&self, from: usize, to: usize, interior: impl Fn(usize) -> bool) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for &c in &self.children[n] {
                if c == to {
                    return true;
                }
                if !seen[c] && interior(c) {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// `set` together with all of its descendants.
    pub fn descendants_of(&self, set: &[usize]) -> Vec<bool> {
        self.closure(set, |i| &self.children[i])
    }

    /// `set` together with all of its ancestors.
    pub fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        self.closure(set, |i| &self.parents[i])
    }

    fn closure<'a>(&'a self, set: &[usize], next: impl Fn(usize) -> &'a [usize]) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = set.to_vec();
        for &s in set {
            mark[s] = true;
        }
        while let Some(n) = stack.pop() {
            for &m in next(n) {
                if !mark[m] {
                    mark[m] = true;
                    stack.push(m);
                }
            }
        }
        mark
    }

    /// Reads the line-oriented text format:
    ///
    /// ```text
    /// # comment
    /// node Z role=Z randomized
    /// node A_1 role=A[1]
    /// Z -> A_1
    /// ```
    pub fn parse(text: &str) -> Result<CausalDag, GraphError> {
        let mut dag = CausalDag::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| GraphError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            if words[0] == "node" {
                let (name, rest) = match words.get(1) {
                    Some(n) => (*n, &words[2..]),
                    None => return Err(err("node without a name".into())),
                };
                let mut role = None;
                let mut randomized = false;
                for w in rest {
                    if let Some(r) = w.strip_prefix("role=") {
                        role = Some(r.parse::<NodeRole>().map_err(&err)?);
                    } else if *w == "randomized" {
                        randomized = true;
                    } else {
                        return Err(err(format!("unexpected `{w}`")));
                    }
                }
                let role = role.ok_or_else(|| err(format!("node `{name}` has no role")))?;
                dag.add_node(name, role).map_err(|e| err(e.to_string()))?;
                dag.nodes.last_mut().unwrap().randomized = randomized;
            } else if words.len() == 3 && words[1] == "->" {
                dag.add_edge(words[0], words[2]).map_err(|e| err(e.to_string()))?;
            } else {
                return Err(err(format!("cannot read `{content}`")));
            }
        }
        Ok(dag)
    }

    /// Inverse of [`CausalDag::parse`]: nodes in insertion order, then edges.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = write!(out, "node {} role={}", n.name, n.role);
            if n.randomized {
                out.push_str(" randomized");
            }
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{} -> {}", self.nodes[a].name, self.nodes[b].name);
        }
        out
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}
