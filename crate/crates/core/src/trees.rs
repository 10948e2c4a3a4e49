//! Combinatorial tree optimizers over weight matrices.
//!
//! [`kruskal_max_tree`] finds the maximum-weight undirected spanning tree of
//! a symmetric weight matrix. [`edmonds_max_arborescence`] finds the
//! maximum-weight directed spanning tree for a fixed root by cycle
//! contraction, and [`best_causal_tree`] takes the best arborescence over
//! all roots, which is the tree whose summed edge weights (directed
//! informations) is maximal over every rooted spanning tree.
//!
//! Tie-breaking is fully specified so results are reproducible: edges
//! compare lexicographically by (source, target) after weight, and root
//! ties go to the smallest root index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{WeightKind, WeightMatrix};

/// A spanning tree over processes (or variables): rooted and directed for
/// causal dependence trees, undirected for Chow-Liu trees. Undirected trees
/// are stored with a canonical orientation away from the smallest node so
/// every tree carries a parent map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTree {
    node_count: usize,
    directed: bool,
    storage_root: usize,
    parent: Vec<Option<usize>>,
    score: f64,
}

impl ProcessTree {
    /// Build from a parent map with exactly one root (`None`). Verifies the
    /// tree invariants: node_count − 1 edges, in-degree one per non-root,
    /// every node reachable from the root.
    pub fn from_parents(directed: bool, parent: Vec<Option<usize>>, score: f64) -> Result<Self> {
        let node_count = parent.len();
        if node_count == 0 {
            return Err(Error::InvalidTree {
                reason: "tree needs at least one node".to_string(),
            });
        }
        let roots: Vec<usize> = (0..node_count).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTree {
                reason: format!("expected exactly one root, found {}", roots.len()),
            });
        }
        let storage_root = roots[0];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= node_count || p == v {
                    return Err(Error::InvalidTree {
                        reason: format!("node {v} has invalid parent {p}"),
                    });
                }
            }
        }
        let tree = ProcessTree {
            node_count,
            directed,
            storage_root,
            parent,
            score,
        };
        if tree.reachable_from_root() != node_count {
            return Err(Error::InvalidTree {
                reason: "not every node is reachable from the root".to_string(),
            });
        }
        Ok(tree)
    }

    /// Build from an edge list. Directed edges are (parent, child) pairs
    /// and require the root; undirected edges may come in any orientation
    /// and are re-rooted at node 0 for storage.
    pub fn from_edges(
        directed: bool,
        root: Option<usize>,
        edges: &[(usize, usize)],
        node_count: usize,
        score: f64,
    ) -> Result<Self> {
        if edges.len() + 1 != node_count {
            return Err(Error::InvalidTree {
                reason: format!(
                    "{} edges cannot span {node_count} nodes",
                    edges.len()
                ),
            });
        }
        if directed {
            let root = root.ok_or_else(|| Error::InvalidTree {
                reason: "directed tree needs a root".to_string(),
            })?;
            let mut parent = vec![None; node_count];
            for &(p, c) in edges {
                if c >= node_count || p >= node_count {
                    return Err(Error::InvalidTree {
                        reason: format!("edge ({p}, {c}) out of range"),
                    });
                }
                if parent[c].is_some() || c == root {
                    return Err(Error::InvalidTree {
                        reason: format!("node {c} has more than one incoming edge"),
                    });
                }
                parent[c] = Some(p);
            }
            let tree = Self::from_parents(true, parent, score)?;
            if tree.storage_root != root {
                return Err(Error::InvalidTree {
                    reason: format!(
                        "declared root {root} but edges root the tree at {}",
                        tree.storage_root
                    ),
                });
            }
            Ok(tree)
        } else {
            let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); node_count];
            for &(a, b) in edges {
                if a >= node_count || b >= node_count || a == b {
                    return Err(Error::InvalidTree {
                        reason: format!("edge ({a}, {b}) out of range"),
                    });
                }
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
            let parent = orient_from(&adjacency, 0)?;
            Self::from_parents(false, parent, score)
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    /// Root of a directed tree; `None` for undirected trees.
    pub fn root(&self) -> Option<usize> {
        self.directed.then_some(self.storage_root)
    }

    pub fn parent_of(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    /// Edges as (parent, child) for directed trees, (min, max) for
    /// undirected trees; sorted for reproducible output.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.node_count)
            .filter_map(|v| {
                self.parent[v].map(|p| {
                    if self.directed {
                        (p, v)
                    } else {
                        (p.min(v), p.max(v))
                    }
                })
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Undirected edge set, for skeleton comparisons.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.node_count)
            .filter_map(|v| self.parent[v].map(|p| (p.min(v), p.max(v))))
            .collect();
        out.sort_unstable();
        out
    }

    /// Same undirected tree, parent map re-oriented away from `root`.
    pub fn rerooted(&self, root: usize) -> Result<Self> {
        if self.directed {
            return Err(Error::InvalidTree {
                reason: "cannot re-root a directed tree".to_string(),
            });
        }
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); self.node_count];
        for (a, b) in self.skeleton() {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let parent = orient_from(&adjacency, root)?;
        Self::from_parents(false, parent, self.score)
    }

    fn reachable_from_root(&self) -> usize {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.node_count];
        for v in 0..self.node_count {
            if let Some(p) = self.parent[v] {
                children[p].push(v);
            }
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.storage_root];
        seen[self.storage_root] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &c in &children[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        count
    }
}

fn orient_from(adjacency: &[Vec<usize>], root: usize) -> Result<Vec<Option<usize>>> {
    let n = adjacency.len();
    if root >= n {
        return Err(Error::InvalidTree {
            reason: format!("root {root} out of range"),
        });
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([root]);
    seen[root] = true;
    let mut visited = 0;
    while let Some(v) = queue.pop_front() {
        visited += 1;
        for &u in &adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                parent[u] = Some(v);
                queue.push_back(u);
            }
        }
    }
    if visited != n {
        return Err(Error::InvalidTree {
            reason: "edge set is not connected".to_string(),
        });
    }
    Ok(parent)
}

/// Sum of tree edge weights under a weight matrix of matching size.
pub fn tree_score(weights: &WeightMatrix, tree: &ProcessTree) -> Result<f64> {
    if weights.size() != tree.node_count() {
        return Err(Error::DimMismatch {
            expected: tree.node_count(),
            actual: weights.size(),
        });
    }
    Ok((0..tree.node_count())
        .filter_map(|v| tree.parent_of(v).map(|p| weights.get(p, v)))
        .sum())
}

fn require_nonnegative(weights: &WeightMatrix) -> Result<Vec<f64>> {
    let size = weights.size();
    let mut out = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let w = weights.get(r, c);
            if w < -1e-9 {
                return Err(Error::NegativeWeight {
                    row: r,
                    col: c,
                    value: w,
                });
            }
            out[r * size + c] = w.max(0.0);
        }
    }
    Ok(out)
}

/// Maximum-weight undirected spanning tree by Kruskal's algorithm on a
/// symmetric weight matrix, ties broken by lexicographic edge
/// (min(a,b), max(a,b)).
pub fn kruskal_max_tree(weights: &WeightMatrix) -> Result<ProcessTree> {
    if !weights.kind().is_symmetric() {
        return Err(Error::KindMismatch {
            expected: "MI or MIvar",
            actual: weights.kind().as_str(),
        });
    }
    let scores = require_nonnegative(weights)?;
    let size = weights.size();
    let mut edges: Vec<(usize, usize)> = (0..size)
        .flat_map(|a| ((a + 1)..size).map(move |b| (a, b)))
        .collect();
    edges.sort_by(|&(a1, b1), &(a2, b2)| {
        scores[a2 * size + b2]
            .total_cmp(&scores[a1 * size + b1])
            .then(a1.cmp(&a2))
            .then(b1.cmp(&b2))
    });

    let mut uf = UnionFind::new(size);
    let mut chosen = Vec::with_capacity(size.saturating_sub(1));
    let mut score = 0.0;
    for (a, b) in edges {
        if uf.union(a, b) {
            chosen.push((a, b));
            score += scores[a * size + b];
            if chosen.len() + 1 == size {
                break;
            }
        }
    }
    ProcessTree::from_edges(false, None, &chosen, size, score)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Maximum-weight spanning arborescence rooted at `root`, by the classic
/// cycle-contraction procedure. Requires a DI-kind matrix with nonnegative
/// weights; ties prefer the smallest source index.
pub fn edmonds_max_arborescence(weights: &WeightMatrix, root: usize) -> Result<ProcessTree> {
    if weights.kind() != WeightKind::ProcessDi {
        return Err(Error::KindMismatch {
            expected: "DI",
            actual: weights.kind().as_str(),
        });
    }
    let size = weights.size();
    if root >= size {
        return Err(Error::IndexOutOfRange {
            index: root,
            dim: size,
        });
    }
    let original = require_nonnegative(weights)?;
    let parent = if size == 1 {
        vec![None]
    } else {
        arborescence_parents(&original, size, root)
    };
    let score: f64 = (0..size)
        .filter_map(|v| parent[v].map(|p| original[p * size + v]))
        .sum();
    ProcessTree::from_parents(true, parent, score)
}

/// Bookkeeping for one contracted cycle, kept for the expansion pass.
struct Contraction {
    rep: usize,
    /// (cycle vertex, its max parent at contraction time).
    cycle_edges: Vec<(usize, usize)>,
    /// Per outside source: which cycle vertex the consolidated incoming
    /// edge really enters.
    enters_at: Vec<Option<usize>>,
    /// Per outside target: which cycle vertex the consolidated outgoing
    /// edge really leaves.
    leaves_from: Vec<Option<usize>>,
    /// Active non-cycle vertices at contraction time.
    outside: Vec<bool>,
}

/// Chu-Liu/Edmonds on a dense score matrix, O(size²) per root: the best
/// incoming edge per vertex is maintained incrementally. Contracting a
/// cycle into its smallest vertex only requires a fresh scan for that one
/// vertex; every vertex whose best parent sat on the cycle keeps it via
/// the consolidated edge, whose weight can only have grown. Ties always
/// resolve to the smallest source index because scans go in ascending
/// order with strict improvement.
fn arborescence_parents(original: &[f64], size: usize, root: usize) -> Vec<Option<usize>> {
    let mut scores = original.to_vec();
    let mut active = vec![true; size];

    let scan_best = |scores: &[f64], active: &[bool], child: usize| -> Option<usize> {
        let mut best = f64::NEG_INFINITY;
        let mut parent = None;
        for source in 0..size {
            if source == child || !active[source] {
                continue;
            }
            let w = scores[source * size + child];
            if w > best {
                best = w;
                parent = Some(source);
            }
        }
        parent
    };

    let mut best: Vec<Option<usize>> = (0..size)
        .map(|child| {
            if child == root {
                None
            } else {
                scan_best(&scores, &active, child)
            }
        })
        .collect();

    let mut records: Vec<Contraction> = Vec::new();
    while let Some(cycle) = find_cycle(&best) {
        let rep = cycle[0];
        let mut in_cycle = vec![false; size];
        for &v in &cycle {
            in_cycle[v] = true;
        }
        let cycle_edges: Vec<(usize, usize)> =
            cycle.iter().map(|&v| (v, best[v].unwrap())).collect();
        let cycle_sum: f64 = cycle_edges
            .iter()
            .map(|&(v, p)| scores[p * size + v])
            .sum();

        // Consolidate all edges between the cycle and each outside vertex
        // into single edges touching the representative. Incoming edges
        // are adjusted by the weight of the cycle edge they displace.
        let mut enters_at = vec![None; size];
        let mut leaves_from = vec![None; size];
        let mut outside = vec![false; size];
        for u in 0..size {
            if !active[u] || in_cycle[u] {
                continue;
            }
            outside[u] = true;
            let mut best_in = f64::NEG_INFINITY;
            let mut best_out = f64::NEG_INFINITY;
            for &(c, p) in &cycle_edges {
                let adjusted = cycle_sum + scores[u * size + c] - scores[p * size + c];
                if adjusted > best_in {
                    best_in = adjusted;
                    enters_at[u] = Some(c);
                }
                if scores[c * size + u] > best_out {
                    best_out = scores[c * size + u];
                    leaves_from[u] = Some(c);
                }
            }
            scores[u * size + rep] = best_in;
            scores[rep * size + u] = best_out;
        }

        for &v in &cycle[1..] {
            active[v] = false;
            best[v] = None;
        }
        debug_assert_ne!(rep, root, "the root has no incoming edge to cycle on");
        best[rep] = scan_best(&scores, &active, rep);
        for u in 0..size {
            if !active[u] || u == root || u == rep {
                continue;
            }
            // The consolidated outgoing edge dominates every cycle edge it
            // replaced, so a best parent on the cycle moves to rep.
            if let Some(b) = best[u] {
                if in_cycle[b] {
                    best[u] = Some(rep);
                }
            }
        }

        records.push(Contraction {
            rep,
            cycle_edges,
            enters_at,
            leaves_from,
            outside,
        });
    }

    // Expand in reverse: the edge entering each contracted vertex displaces
    // exactly one cycle edge, the rest survive, and consolidated edges are
    // restored to their real endpoints.
    let mut parents = best;
    for record in records.into_iter().rev() {
        let entering = parents[record.rep].expect("contracted vertex has a parent");
        let broken = record.enters_at[entering].expect("entering edge was recorded");
        for &(v, p) in &record.cycle_edges {
            parents[v] = Some(p);
        }
        parents[broken] = Some(entering);
        for (u, parent) in parents.iter_mut().enumerate() {
            if record.outside[u] && *parent == Some(record.rep) {
                *parent = record.leaves_from[u];
            }
        }
    }
    parents
}

/// Find a cycle in a functional parent graph; returns its vertices sorted
/// ascending so contraction decisions stay deterministic.
fn find_cycle(parents: &[Option<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    // 0 = unvisited, 1 = on current walk, 2 = settled.
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        loop {
            match state[v] {
                1 => {
                    let pos = path.iter().position(|&x| x == v).unwrap();
                    let mut cycle = path[pos..].to_vec();
                    cycle.sort_unstable();
                    return Some(cycle);
                }
                2 => break,
                _ => {
                    state[v] = 1;
                    path.push(v);
                    match parents[v] {
                        Some(p) => v = p,
                        None => break,
                    }
                }
            }
        }
        for &u in &path {
            state[u] = 2;
        }
    }
    None
}

/// Best arborescence over all roots: the causal dependence tree whose
/// summed pairwise directed informations is maximal. Per-root searches are
/// independent and may run in parallel; root ties go to the smallest index.
pub fn best_causal_tree(weights: &WeightMatrix) -> Result<ProcessTree> {
    let size = weights.size();
    let run = |root: usize| edmonds_max_arborescence(weights, root);

    #[cfg(feature = "parallel")]
    let candidates: Vec<ProcessTree> = {
        use rayon::prelude::*;
        (0..size)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let candidates: Vec<ProcessTree> = (0..size).map(run).collect::<Result<_>>()?;

    let mut best: Option<ProcessTree> = None;
    for tree in candidates {
        let better = match &best {
            None => true,
            Some(b) => tree.score() > b.score(),
        };
        if better {
            best = Some(tree);
        }
    }
    Ok(best.expect("at least one root"))
}

/// Enumeration guard: `7^6 = 117649` rooted trees is the largest batch the
/// oracle is allowed to stream.
pub const ENUMERATION_LIMIT: usize = 7;

/// Stream every rooted directed spanning tree on `m` labelled nodes, root
/// by root, parents encoded by an odometer over the non-root nodes. Emits
/// exactly `m^(m-1)` trees.
pub fn enumerate_causal_trees(m: usize) -> Result<CausalTreeIter> {
    if m == 0 {
        return Err(Error::InvalidTree {
            reason: "tree needs at least one node".to_string(),
        });
    }
    if m > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            nodes: m,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(CausalTreeIter {
        m,
        root: 0,
        counters: vec![0; m.saturating_sub(1)],
        exhausted: false,
    })
}

pub struct CausalTreeIter {
    m: usize,
    root: usize,
    counters: Vec<usize>,
    exhausted: bool,
}

impl CausalTreeIter {
    fn candidate(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.m];
        let mut slot = 0;
        for (v, entry) in parent.iter_mut().enumerate() {
            if v == self.root {
                continue;
            }
            // The counter indexes the parent choices 0..m with v skipped.
            let k = self.counters[slot];
            let p = if k < v { k } else { k + 1 };
            *entry = Some(p);
            slot += 1;
        }
        parent
    }

    fn advance(&mut self) {
        for counter in self.counters.iter_mut() {
            *counter += 1;
            if *counter < self.m - 1 {
                return;
            }
            *counter = 0;
        }
        self.root += 1;
        if self.root >= self.m {
            self.exhausted = true;
        }
    }
}

impl Iterator for CausalTreeIter {
    type Item = ProcessTree;

    fn next(&mut self) -> Option<ProcessTree> {
        if self.m == 1 {
            if self.exhausted {
                return None;
            }
            self.exhausted = true;
            return Some(ProcessTree::from_parents(true, vec![None], 0.0).unwrap());
        }
        while !self.exhausted {
            let parent = self.candidate();
            self.advance();
            if let Ok(tree) = ProcessTree::from_parents(true, parent, 0.0) {
                return Some(tree);
            }
        }
        None
    }
}

/// Which dependency structure to count variable edges for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependencyKind {
    /// Every pair of variables: `mn(mn-1)/2`.
    Full,
    /// A variable-level spanning tree: `mn - 1`.
    ChowLiuVar,
    /// A causal dependence tree: a complete graph within each process plus
    /// present-inclusive cross edges to the conditioned process,
    /// `m·n(n-1)/2 + (m-1)·n(n+1)/2`.
    Causal,
}

/// Count of variable-level dependencies kept by each structure. For the
/// causal kind this is the present-inclusive closed form; a strictly-past
/// variant would use `(m-1)·n(n-1)/2` cross edges instead (495 rather than
/// 545 at m=6, n=10).
pub fn count_dependencies(m: u64, n: u64, kind: DependencyKind) -> u64 {
    match kind {
        DependencyKind::Full => m * n * (m * n - 1) / 2,
        DependencyKind::ChowLiuVar => m * n - 1,
        DependencyKind::Causal => m * n * (n - 1) / 2 + (m - 1) * n * (n + 1) / 2,
    }
}

// ---------------------------------------------------------------------------
// Tree file formats
// ---------------------------------------------------------------------------

/// JSON interchange format for learned trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub directed: bool,
    pub root: Option<usize>,
    pub edges: Vec<[usize; 2]>,
    pub score_nats: f64,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl TreeFile {
    pub fn from_tree(tree: &ProcessTree, labels: Vec<String>, manifest: Option<String>) -> Self {
        TreeFile {
            directed: tree.directed(),
            root: tree.root(),
            edges: tree.edges().iter().map(|&(a, b)| [a, b]).collect(),
            score_nats: tree.score(),
            labels,
            manifest,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("tree JSON: {e}")))
    }

    pub fn into_tree(self) -> Result<(ProcessTree, Vec<String>)> {
        let node_count = if self.labels.is_empty() {
            self.edges
                .iter()
                .flat_map(|e| e.iter().copied())
                .max()
                .map_or(1, |v| v + 1)
        } else {
            self.labels.len()
        };
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&[a, b]| (a, b)).collect();
        let tree = ProcessTree::from_edges(
            self.directed,
            self.root,
            &edges,
            node_count,
            self.score_nats,
        )?;
        Ok((tree, self.labels))
    }
}

/// Graphviz DOT rendering: `digraph` with parent→child arrows for directed
/// trees, `graph` with plain edges for undirected ones.
pub fn tree_to_dot(tree: &ProcessTree, labels: &[String]) -> String {
    let name = |v: usize| -> String {
        labels
            .get(v)
            .cloned()
            .unwrap_or_else(|| format!("n{v}"))
    };
    let mut out = String::new();
    if tree.directed() {
        out.push_str("digraph tree {\n");
        for (p, c) in tree.edges() {
            out.push_str(&format!("  \"{}\" -> \"{}\";\n", name(p), name(c)));
        }
    } else {
        out.push_str("graph tree {\n");
        for (a, b) in tree.edges() {
            out.push_str(&format!("  \"{}\" -- \"{}\";\n", name(a), name(b)));
        }
    }
    out.push_str("}\n");
    out
}
