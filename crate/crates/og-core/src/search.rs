//! Generic labeled-graph matching and hashing internals.
//!
//! Everything here works on a dense, index-based [`LabeledGraph`]; the public
//! modules translate between atom ids (or rule elements) and indices. The
//! matcher is a plain backtracking enumerator with element/degree candidate
//! filtering, which is exhaustive and fast enough at the scale this crate
//! targets (patterns of a few dozen vertices).

use std::collections::BTreeMap;
use std::time::Instant;

use sha2::{Digest as _, Sha256};

/// Dense undirected graph with comparable node and edge labels.
#[derive(Debug, Clone)]
pub(crate) struct LabeledGraph<N, E> {
    nodes: Vec<N>,
    adj: Vec<BTreeMap<usize, E>>,
}

impl<N: Clone + Ord, E: Clone + Ord> LabeledGraph<N, E> {
    pub fn new() -> Self {
        LabeledGraph {
            nodes: Vec::new(),
            adj: Vec::new(),
        }
    }

    pub fn add_node(&mut self, label: N) -> usize {
        self.nodes.push(label);
        self.adj.push(BTreeMap::new());
        self.nodes.len() - 1
    }

    /// Adds an undirected edge; the caller guarantees no parallel edges.
    pub fn add_edge(&mut self, a: usize, b: usize, label: E) {
        debug_assert!(a != b);
        debug_assert!(!self.adj[a].contains_key(&b));
        self.adj[a].insert(b, label.clone());
        self.adj[b].insert(a, label);
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn label(&self, v: usize) -> &N {
        &self.nodes[v]
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&E> {
        self.adj[a].get(&b)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, &E)> + '_ {
        self.adj[v].iter().map(|(n, e)| (*n, e))
    }
}

/// Options for [`monomorphisms`].
#[derive(Debug, Clone, Default)]
pub(crate) struct SearchOptions {
    /// Pattern index pairs whose images must NOT be adjacent in the host.
    pub forbidden: Vec<(usize, usize)>,
    /// Pre-assigned pattern-index -> host-index pairs.
    pub pinned: Vec<(usize, usize)>,
    /// Abort the search once this instant has passed.
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SearchOutcome {
    /// Exhaustive enumeration, sorted by image tuple.
    Complete(Vec<Vec<usize>>),
    TimedOut,
}

/// Enumerates every injective, label-preserving embedding of `pattern` into
/// `host`. A pattern edge must map onto a host edge with an equal label; host
/// edges between image vertices that have no pattern counterpart are allowed
/// unless ruled out via `forbidden`.
pub(crate) fn monomorphisms<N: Clone + Ord, E: Clone + Ord>(
    pattern: &LabeledGraph<N, E>,
    host: &LabeledGraph<N, E>,
    options: &SearchOptions,
) -> SearchOutcome {
    let np = pattern.node_count();
    if np == 0 {
        return SearchOutcome::Complete(vec![Vec::new()]);
    }
    if np > host.node_count() {
        return SearchOutcome::Complete(Vec::new());
    }

    let order = matching_order(pattern);
    // position of each pattern vertex in the matching order
    let mut position = vec![usize::MAX; np];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }

    // forbidden pairs grouped by the endpoint matched later
    let mut forbidden_at: Vec<Vec<usize>> = vec![Vec::new(); np];
    for &(a, b) in &options.forbidden {
        if position[a] < position[b] {
            forbidden_at[b].push(a);
        } else {
            forbidden_at[a].push(b);
        }
    }

    let mut pinned = vec![usize::MAX; np];
    for &(p, h) in &options.pinned {
        pinned[p] = h;
    }

    let mut state = State {
        pattern,
        host,
        order: &order,
        forbidden_at: &forbidden_at,
        pinned: &pinned,
        mapping: vec![usize::MAX; np],
        used: vec![false; host.node_count()],
        results: Vec::new(),
        deadline: options.deadline,
        ticks: 0,
        timed_out: false,
    };
    state.extend(0);
    if state.timed_out {
        return SearchOutcome::TimedOut;
    }
    let mut results = state.results;
    results.sort();
    SearchOutcome::Complete(results)
}

/// Orders pattern vertices so that each one (after the first of its
/// component) is adjacent to an already-placed vertex; within the candidates,
/// higher degree goes first to fail early.
fn matching_order<N: Clone + Ord, E: Clone + Ord>(pattern: &LabeledGraph<N, E>) -> Vec<usize> {
    let n = pattern.node_count();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let connected: Vec<usize> = (0..n)
            .filter(|&v| !placed[v])
            .filter(|&v| pattern.neighbors(v).any(|(u, _)| placed[u]))
            .collect();
        let next = if connected.is_empty() {
            // new component: start from the highest-degree unplaced vertex
            (0..n)
                .filter(|&v| !placed[v])
                .max_by_key(|&v| (pattern.degree(v), std::cmp::Reverse(v)))
                .unwrap()
        } else {
            connected
                .into_iter()
                .max_by_key(|&v| {
                    let matched_neighbors =
                        pattern.neighbors(v).filter(|(u, _)| placed[*u]).count();
                    (matched_neighbors, pattern.degree(v), std::cmp::Reverse(v))
                })
                .unwrap()
        };
        placed[next] = true;
        order.push(next);
    }
    order
}

struct State<'a, N, E> {
    pattern: &'a LabeledGraph<N, E>,
    host: &'a LabeledGraph<N, E>,
    order: &'a [usize],
    forbidden_at: &'a [Vec<usize>],
    pinned: &'a [usize],
    mapping: Vec<usize>,
    used: Vec<bool>,
    results: Vec<Vec<usize>>,
    deadline: Option<Instant>,
    ticks: u32,
    timed_out: bool,
}

impl<N: Clone + Ord, E: Clone + Ord> State<'_, N, E> {
    fn extend(&mut self, depth: usize) {
        if self.timed_out {
            return;
        }
        if let Some(deadline) = self.deadline {
            self.ticks += 1;
            if self.ticks.is_multiple_of(256) && Instant::now() >= deadline {
                self.timed_out = true;
                return;
            }
        }
        if depth == self.order.len() {
            self.results.push(self.mapping.clone());
            return;
        }
        let v = self.order[depth];
        if self.pinned[v] != usize::MAX {
            let h = self.pinned[v];
            if !self.used[h] && self.feasible(v, h) {
                self.assign(v, h, depth);
            }
            return;
        }
        for h in 0..self.host.node_count() {
            if self.used[h] {
                continue;
            }
            if self.feasible(v, h) {
                self.assign(v, h, depth);
            }
        }
    }

    fn assign(&mut self, v: usize, h: usize, depth: usize) {
        self.mapping[v] = h;
        self.used[h] = true;
        self.extend(depth + 1);
        self.mapping[v] = usize::MAX;
        self.used[h] = false;
    }

    fn feasible(&self, v: usize, h: usize) -> bool {
        if self.pattern.label(v) != self.host.label(h) {
            return false;
        }
        if self.pattern.degree(v) > self.host.degree(h) {
            return false;
        }
        // every already-mapped pattern neighbor must be a host neighbor with
        // an equal edge label
        for (u, e) in self.pattern.neighbors(v) {
            let hu = self.mapping[u];
            if hu == usize::MAX {
                continue;
            }
            match self.host.edge(h, hu) {
                Some(he) if he == e => {}
                _ => return false,
            }
        }
        // forbidden pairs: images must not be adjacent
        for &u in &self.forbidden_at[v] {
            let hu = self.mapping[u];
            if hu != usize::MAX && self.host.edge(h, hu).is_some() {
                return false;
            }
        }
        true
    }
}

/// Stable 8-byte color derived from arbitrary label bytes.
fn color_of(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

/// Iterative neighborhood-color refinement folded into a digest.
///
/// Isomorphic graphs always produce equal digests; unequal graphs produce
/// distinct digests except for rare refinement-equivalent cases, so callers
/// must treat the digest as a prefilter and confirm with an exact check.
pub(crate) fn refinement_digest<N: Clone + Ord, E: Clone + Ord>(
    graph: &LabeledGraph<N, E>,
    node_bytes: impl Fn(&N) -> Vec<u8>,
    edge_bytes: impl Fn(&E) -> Vec<u8>,
) -> [u8; 32] {
    let n = graph.node_count();
    let mut colors: Vec<u64> = (0..n)
        .map(|v| color_of(&node_bytes(graph.label(v))))
        .collect();
    let edge_colors: Vec<BTreeMap<usize, u64>> = (0..n)
        .map(|v| {
            graph
                .neighbors(v)
                .map(|(u, e)| (u, color_of(&edge_bytes(e))))
                .collect()
        })
        .collect();

    let mut partition_size = distinct(&colors);
    for _ in 0..n {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let mut signature: Vec<(u64, u64)> = edge_colors[v]
                .iter()
                .map(|(&u, &ec)| (ec, colors[u]))
                .collect();
            signature.sort_unstable();
            let mut bytes = Vec::with_capacity(8 + signature.len() * 16);
            bytes.extend_from_slice(&colors[v].to_be_bytes());
            for (ec, nc) in signature {
                bytes.extend_from_slice(&ec.to_be_bytes());
                bytes.extend_from_slice(&nc.to_be_bytes());
            }
            next.push(color_of(&bytes));
        }
        colors = next;
        let size = distinct(&colors);
        if size == partition_size {
            break;
        }
        partition_size = size;
    }

    let mut hasher = Sha256::new();
    hasher.update(b"og.refine.v1");
    hasher.update((n as u64).to_be_bytes());
    hasher.update((graph.edge_count() as u64).to_be_bytes());
    let mut sorted = colors.clone();
    sorted.sort_unstable();
    for c in sorted {
        hasher.update(c.to_be_bytes());
    }
    let mut edge_sig: Vec<(u64, u64, u64)> = Vec::new();
    for v in 0..n {
        for (u, &ec) in &edge_colors[v] {
            if *u > v {
                let (a, b) = if colors[v] <= colors[*u] {
                    (colors[v], colors[*u])
                } else {
                    (colors[*u], colors[v])
                };
                edge_sig.push((a, b, ec));
            }
        }
    }
    edge_sig.sort_unstable();
    for (a, b, ec) in edge_sig {
        hasher.update(a.to_be_bytes());
        hasher.update(b.to_be_bytes());
        hasher.update(ec.to_be_bytes());
    }
    hasher.finalize().into()
}

fn distinct(colors: &[u64]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}
