use super::{CausalDag, GraphError};

/// A path in the skeleton, remembering each edge's orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<usize>,
    /// `forward[i]` is true for `nodes[i] -> nodes[i + 1]`.
    pub forward: Vec<bool>,
}

impl Path {
    pub fn render(&self, dag: &CausalDag) -> String {
        let mut out = dag.name(self.nodes[0]).to_string();
        for (i, &f) in self.forward.iter().enumerate() {
            out.push_str(if f { " -> " } else { " <- " });
            out.push_str(dag.name(self.nodes[i + 1]));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    fn key<'a>(&self, dag: &'a CausalDag) -> (usize, Vec<&'a str>) {
        (self.len(), self.nodes.iter().map(|&n| dag.name(n)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsepResult {
    pub separated: bool,
    /// Shortest open path when not separated; ties broken by node names.
    pub path: Option<Path>,
}

/// Tests whether every path between `x` and `y` is blocked given `given`.
pub fn d_separated(dag: &CausalDag, x: &[&str], y: &[&str], given: &[&str]) -> Result<DsepResult, GraphError> {
    let ids = |names: &[&str]| names.iter().map(|n| dag.id(n)).collect::<Result<Vec<_>, _>>();
    let (xs, ys, zs) = (ids(x)?, ids(y)?, ids(given)?);
    for (a, b) in [(&xs, &ys), (&xs, &zs), (&ys, &zs)] {
        if let Some(&n) = a.iter().find(|n| b.contains(n)) {
            return Err(GraphError::Overlap(dag.name(n).to_string()));
        }
    }
    let path = open_path(dag, &xs, &ys, &zs);
    Ok(DsepResult {
        separated: path.is_none(),
        path,
    })
}

/// Shortest path from `xs` to `ys` left open by conditioning on `zs`.
pub(crate) fn open_path(dag: &CausalDag, xs: &[usize], ys: &[usize], zs: &[usize]) -> Option<Path> {
    open_path_filtered(dag, xs, ys, zs, |_| true)
}

/// As [`open_path`], keeping only paths accepted by `accept`.
pub(crate) fn open_path_filtered(
    dag: &CausalDag,
    xs: &[usize],
    ys: &[usize],
    zs: &[usize],
    accept: impl Fn(&Path) -> bool,
) -> Option<Path> {
    let n = dag.len();
    let mut conditioned = vec![false; n];
    for &z in zs {
        conditioned[z] = true;
    }
    let collider_open = dag.ancestors_of(zs);
    let mut endpoint = vec![0u8; n];
    for &x in xs {
        endpoint[x] = 1;
    }
    for &y in ys {
        endpoint[y] = 2;
    }
    let mut search = Search {
        dag,
        conditioned,
        collider_open,
        endpoint,
        on_path: vec![false; n],
        best: None,
        accept: &accept,
    };
    for &x in xs {
        let mut path = Path {
            nodes: vec![x],
            forward: Vec::new(),
        };
        search.on_path[x] = true;
        search.extend(&mut path);
        search.on_path[x] = false;
    }
    search.best
}

struct Search<'a, F: Fn(&Path) -> bool> {
    dag: &'a CausalDag,
    conditioned: Vec<bool>,
    collider_open: Vec<bool>,
    endpoint: Vec<u8>,
    on_path: Vec<bool>,
    best: Option<Path>,
    accept: &'a F,
}

impl<F: Fn(&Path) -> bool> Search<'_, F> {
    fn extend(&mut self, path: &mut Path) {
        if let Some(b) = &self.best {
            if path.len() >= b.len() {
                return;
            }
        }
        let here = *path.nodes.last().unwrap();
        let arrived_forward = path.forward.last().copied();
        let steps: Vec<(usize, bool)> = self
            .dag
            .children(here)
            .iter()
            .map(|&c| (c, true))
            .chain(self.dag.parents(here).iter().map(|&p| (p, false)))
            .collect();
        for (next, forward) in steps {
            if self.on_path[next] || self.endpoint[next] == 1 {
                continue;
            }
            if let Some(into_here) = arrived_forward {
                let collider = into_here && !forward;
                let open = if collider {
                    self.collider_open[here]
                } else {
                    !self.conditioned[here]
                };
                if !open {
                    continue;
                }
            }
            path.nodes.push(next);
            path.forward.push(forward);
            if self.endpoint[next] == 2 {
                if (self.accept)(path) {
                    let better = match &self.best {
                        None => true,
                        Some(b) => path.key(self.dag) < b.key(self.dag),
                    };
                    if better {
                        self.best = Some(path.clone());
                    }
                }
            } else {
                self.on_path[next] = true;
                self.extend(path);
                self.on_path[next] = false;
            }
            path.nodes.pop();
            path.forward.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRole;
    use proptest::prelude::*;

    fn dag(text: &str) -> CausalDag {
        CausalDag::parse(text).unwrap()
    }

    #[test]
    fn chain_and_collider() {
        let chain = dag("node a role=U\nnode b role=U\nnode c role=U\na -> b\nb -> c\n");
        assert!(d_separated(&chain, &["a"], &["c"], &["b"]).unwrap().separated);
        let r = d_separated(&chain, &["a"], &["c"], &[]).unwrap();
        assert_eq!(r.path.unwrap().render(&chain), "a -> b -> c");

        let coll = dag("node a role=U\nnode b role=U\nnode c role=U\nnode d role=U\na -> b\nc -> b\nb -> d\n");
        assert!(d_separated(&coll, &["a"], &["c"], &[]).unwrap().separated);
        let r = d_separated(&coll, &["a"], &["c"], &["b"]).unwrap();
        assert_eq!(r.path.unwrap().render(&coll), "a -> b <- c");
        // conditioning on a descendant of the collider also opens it
        assert!(!d_separated(&coll, &["a"], &["c"], &["d"]).unwrap().separated);
    }

    #[test]
    fn errors() {
        let g = dag("node a role=U\nnode b role=U\n");
        assert_eq!(d_separated(&g, &["a"], &["q"], &[]), Err(GraphError::UnknownNode("q".into())));
        assert_eq!(d_separated(&g, &["a"], &["b"], &["a"]), Err(GraphError::Overlap("a".into())));
        assert!(d_separated(&g, &["a"], &["b"], &[]).unwrap().separated);
    }

    #[test]
    fn shortest_path_with_name_tie_break() {
        let g = dag("node x role=U\nnode m role=U\nnode k role=U\nnode y role=U\nx -> m\nm -> y\nx -> k\nk -> y\nx -> y\n");
        let r = d_separated(&g, &["x"], &["y"], &[]).unwrap();
        assert_eq!(r.path.unwrap().render(&g), "x -> y");
        let r = d_separated(&g, &["x"], &["y"], &[]).unwrap();
        assert!(!r.separated);
        let mut g2 = g.clone();
        g2 = CausalDag::parse(&g2.to_text().replace("x -> y\n", "")).unwrap();
        let r = d_separated(&g2, &["x"], &["y"], &[]).unwrap();
        assert_eq!(r.path.unwrap().render(&g2), "x -> k -> y");
    }

    /// Independent criterion: x and y are separated iff they are disconnected
    /// in the moralized ancestral graph of x ∪ y ∪ z after deleting z.
    fn moral_separated(dag: &CausalDag, x: usize, y: usize, z: &[usize]) -> bool {
        let mut seed = vec![x, y];
        seed.extend_from_slice(z);
        let keep = dag.ancestors_of(&seed);
        let n = dag.len();
        let mut adj = vec![vec![false; n]; n];
        for v in 0..n {
            if !keep[v] {
                continue;
            }
            let ps = dag.parents(v);
            for &p in ps {
                adj[p][v] = true;
                adj[v][p] = true;
            }
            for &p in ps {
                for &q in ps {
                    if p != q {
                        adj[p][q] = true;
                    }
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![x];
        seen[x] = true;
        while let Some(v) = stack.pop() {
            if v == y {
                return false;
            }
            for w in 0..n {
                if adj[v][w] && keep[w] && !seen[w] && !z.contains(&w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        true
    }

    fn random_dag(n: usize, edges: &[bool]) -> CausalDag {
        let mut g = CausalDag::new();
        for i in 0..n {
            g.add_node(&format!("n{i}"), NodeRole::Unmeasured).unwrap();
        }
        let mut e = edges.iter();
        for j in 0..n {
            for i in 0..j {
                if *e.next().unwrap() {
                    g.add_edge(&format!("n{i}"), &format!("n{j}")).unwrap();
                }
            }
        }
        g
    }

    fn path_is_open(dag: &CausalDag, p: &Path, z: &[usize]) -> bool {
        let anc = dag.ancestors_of(z);
        (1..p.nodes.len() - 1).all(|i| {
            let m = p.nodes[i];
            if p.forward[i - 1] && !p.forward[i] {
                anc[m]
            } else {
                !z.contains(&m)
            }
        })
    }

    proptest! {
        #[test]
        fn agrees_with_moralization(
            n in 3usize..8,
            edges in proptest::collection::vec(proptest::bool::weighted(0.35), 28),
            zmask in proptest::collection::vec(proptest::bool::weighted(0.3), 8),
        ) {
            let g = random_dag(n, &edges);
            let (x, y) = (0, n - 1);
            let z: Vec<usize> = (1..n - 1).filter(|&i| zmask[i]).collect();
            let names = |v: &[usize]| v.iter().map(|&i| g.name(i).to_string()).collect::<Vec<_>>();
            let zn = names(&z);
            let zr: Vec<&str> = zn.iter().map(String::as_str).collect();
            let r = d_separated(&g, &[g.name(x)], &[g.name(y)], &zr).unwrap();
            prop_assert_eq!(r.separated, moral_separated(&g, x, y, &z));
            if let Some(p) = &r.path {
                prop_assert!(path_is_open(&g, p, &z));
                prop_assert_eq!(p.nodes[0], x);
                prop_assert_eq!(*p.nodes.last().unwrap(), y);
            }
            let back = d_separated(&g, &[g.name(y)], &[g.name(x)], &zr).unwrap();
            prop_assert_eq!(back.separated, r.separated);
        }
    }
}
