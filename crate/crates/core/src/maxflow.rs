//! Exact two-terminal max-flow / min-cut.
//!
//! The solver follows Boykov and Kolmogorov: two search trees grow from the
//! source and the sink, an augmenting path is pushed whenever they touch, and
//! nodes orphaned by saturation are re-adopted or freed. Search trees are
//! reused across augmentations, which suits sparse grid graphs.
//!
//! Patch nodes are numbered `0..node_count`; the source and sink terminals are
//! implicit and connect to nodes through `source_caps` / `target_caps`.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};

/// One bidirectional neighbor link. `capacity_uv` is the capacity from `u` to `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborArc {
    pub u: usize,
    pub v: usize,
    pub capacity_uv: f64,
    pub capacity_vu: f64,
}

/// A validated flow network. Construction checks every invariant so solving
/// never fails.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    node_count: usize,
    arcs: Vec<NeighborArc>,
    source_caps: Vec<f64>,
    target_caps: Vec<f64>,
}

fn check_capacity(what: &str, value: f64) -> Result<()> {
    if value.is_nan() {
        return Err(Error::InvalidNetwork(format!("{what} is NaN")));
    }
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidNetwork(format!(
            "{what} = {value} is not a finite nonnegative number"
        )));
    }
    Ok(())
}

fn check_terminal_caps(node_count: usize, source_caps: &[f64], target_caps: &[f64]) -> Result<()> {
    if source_caps.len() != node_count || target_caps.len() != node_count {
        return Err(Error::InvalidNetwork(format!(
            "terminal capacity vectors have lengths {} and {}, expected {node_count}",
            source_caps.len(),
            target_caps.len()
        )));
    }
    for (i, (&s, &t)) in source_caps.iter().zip(target_caps).enumerate() {
        check_capacity(&format!("source capacity of node {i}"), s)?;
        check_capacity(&format!("target capacity of node {i}"), t)?;
    }
    Ok(())
}

impl FlowNetwork {
    pub fn new(
        node_count: usize,
        arcs: Vec<NeighborArc>,
        source_caps: Vec<f64>,
        target_caps: Vec<f64>,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        check_terminal_caps(node_count, &source_caps, &target_caps)?;
        let mut pairs = HashSet::with_capacity(arcs.len());
        for arc in &arcs {
            if arc.u >= node_count || arc.v >= node_count {
                return Err(Error::InvalidNetwork(format!(
                    "arc ({}, {}) references a node outside 0..{node_count}",
                    arc.u, arc.v
                )));
            }
            if arc.u == arc.v {
                return Err(Error::InvalidNetwork(format!("self-arc on node {}", arc.u)));
            }
            if !pairs.insert((arc.u.min(arc.v), arc.u.max(arc.v))) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate arc between {} and {}",
                    arc.u, arc.v
                )));
            }
            check_capacity("arc capacity", arc.capacity_uv)?;
            check_capacity("arc capacity", arc.capacity_vu)?;
        }
        Ok(Self {
            node_count,
            arcs,
            source_caps,
            target_caps,
        })
    }

    /// Same neighbor arcs, new terminal capacities.
    pub fn with_terminal_caps(&self, source_caps: Vec<f64>, target_caps: Vec<f64>) -> Result<Self> {
        check_terminal_caps(self.node_count, &source_caps, &target_caps)?;
        Ok(Self {
            node_count: self.node_count,
            arcs: self.arcs.clone(),
            source_caps,
            target_caps,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[NeighborArc] {
        &self.arcs
    }

    pub fn source_caps(&self) -> &[f64] {
        &self.source_caps
    }

    pub fn target_caps(&self) -> &[f64] {
        &self.target_caps
    }

    /// Total capacity of arcs leaving `side` (true = source side).
    ///
    /// Panics unless there is one flag per node.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        assert_eq!(source_side.len(), self.node_count, "one side flag per node");
        let mut total = 0.0;
        for ((&src, &s), &t) in source_side
            .iter()
            .zip(&self.source_caps)
            .zip(&self.target_caps)
        {
            total += if src { t } else { s };
        }
        for arc in &self.arcs {
            match (source_side[arc.u], source_side[arc.v]) {
                (true, false) => total += arc.capacity_uv,
                (false, true) => total += arc.capacity_vu,
                _ => {}
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCutResult {
    pub flow_value: f64,
    /// `source_side[i]` is true when node `i` is reachable from the source in
    /// the final residual graph.
    pub source_side: Vec<bool>,
}

impl MinCutResult {
    pub fn is_source(&self, node: usize) -> bool {
        self.source_side[node]
    }

    pub fn source_nodes(&self) -> Vec<usize> {
        self.source_side
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_DIST: u32 = u32::MAX;

/// Residual graph and search-tree state for one solve.
struct Solver {
    // Arcs are stored in pairs: arc `a` and its reverse `a ^ 1`.
    head: Vec<usize>,
    r_cap: Vec<f64>,
    // CSR adjacency: arcs leaving node i are out_arcs[first[i]..first[i + 1]].
    first: Vec<usize>,
    out_arcs: Vec<usize>,
    // > 0: residual capacity from the source, < 0: residual capacity to the sink.
    tr_cap: Vec<f64>,
    parent: Vec<usize>,
    in_sink_tree: Vec<bool>,
    timestamp: Vec<u64>,
    dist: Vec<u32>,
    queued: Vec<bool>,
    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
    flow: f64,
}

impl Solver {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.node_count;
        let m = net.arcs.len();
        let mut head = Vec::with_capacity(2 * m);
        let mut r_cap = Vec::with_capacity(2 * m);
        let mut degree = vec![0usize; n + 1];
        for arc in &net.arcs {
            head.push(arc.v);
            r_cap.push(arc.capacity_uv);
            head.push(arc.u);
            r_cap.push(arc.capacity_vu);
            degree[arc.u] += 1;
            degree[arc.v] += 1;
        }
        let mut first = vec![0usize; n + 1];
        for i in 0..n {
            first[i + 1] = first[i] + degree[i];
        }
        let mut fill = first.clone();
        let mut out_arcs = vec![0usize; 2 * m];
        for (k, arc) in net.arcs.iter().enumerate() {
            out_arcs[fill[arc.u]] = 2 * k;
            fill[arc.u] += 1;
            out_arcs[fill[arc.v]] = 2 * k + 1;
            fill[arc.v] += 1;
        }

        let mut flow = 0.0;
        let mut tr_cap = Vec::with_capacity(n);
        for (&s, &t) in net.source_caps.iter().zip(&net.target_caps) {
            flow += s.min(t);
            tr_cap.push(s - t);
        }

        Self {
            head,
            r_cap,
            first,
            out_arcs,
            tr_cap,
            parent: vec![NONE; n],
            in_sink_tree: vec![false; n],
            timestamp: vec![0; n],
            dist: vec![0; n],
            queued: vec![false; n],
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
            flow,
        }
    }

    #[inline]
    fn arcs_of(&self, i: usize) -> std::ops::Range<usize> {
        self.first[i]..self.first[i + 1]
    }

    fn set_active(&mut self, i: usize) {
        if !self.queued[i] {
            self.queued[i] = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            if self.parent[i] != NONE {
                return Some(i);
            }
            self.queued[i] = false;
        }
        None
    }

    fn make_orphan_front(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i);
    }

    fn make_orphan_rear(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_back(i);
    }

    fn run(&mut self) {
        let n = self.tr_cap.len();
        for i in 0..n {
            if self.tr_cap[i] != 0.0 {
                self.in_sink_tree[i] = self.tr_cap[i] < 0.0;
                self.parent[i] = TERMINAL;
                self.timestamp[i] = 0;
                self.dist[i] = 1;
                self.set_active(i);
            }
        }

        let mut current: Option<usize> = None;
        loop {
            let i = match current.take() {
                Some(i) if self.parent[i] != NONE => i,
                Some(i) => {
                    self.queued[i] = false;
                    match self.next_active() {
                        Some(j) => j,
                        None => break,
                    }
                }
                None => match self.next_active() {
                    Some(j) => j,
                    None => break,
                },
            };

            let middle = self.grow(i);
            self.time += 1;

            match middle {
                Some(a) => {
                    // Keep `i` as the current node; it may touch the other tree again.
                    current = Some(i);
                    self.augment(a);
                    while let Some(o) = self.orphans.pop_front() {
                        if self.in_sink_tree[o] {
                            self.adopt_sink_orphan(o);
                        } else {
                            self.adopt_source_orphan(o);
                        }
                    }
                }
                None => self.queued[i] = false,
            }
        }
    }

    /// Expands the tree containing `i`. Returns an arc from the source tree to
    /// the sink tree if the trees meet.
    fn grow(&mut self, i: usize) -> Option<usize> {
        if !self.in_sink_tree[i] {
            for k in self.arcs_of(i) {
                let a = self.out_arcs[k];
                if self.r_cap[a] > 0.0 {
                    let j = self.head[a];
                    if self.parent[j] == NONE {
                        self.in_sink_tree[j] = false;
                        self.parent[j] = a ^ 1;
                        self.timestamp[j] = self.timestamp[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if self.in_sink_tree[j] {
                        return Some(a);
                    } else if self.timestamp[j] <= self.timestamp[i] && self.dist[j] > self.dist[i]
                    {
                        self.parent[j] = a ^ 1;
                        self.timestamp[j] = self.timestamp[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
            }
        } else {
            for k in self.arcs_of(i) {
                let a = self.out_arcs[k];
                if self.r_cap[a ^ 1] > 0.0 {
                    let j = self.head[a];
                    if self.parent[j] == NONE {
                        self.in_sink_tree[j] = true;
                        self.parent[j] = a ^ 1;
                        self.timestamp[j] = self.timestamp[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if !self.in_sink_tree[j] {
                        return Some(a ^ 1);
                    } else if self.timestamp[j] <= self.timestamp[i] && self.dist[j] > self.dist[i]
                    {
                        self.parent[j] = a ^ 1;
                        self.timestamp[j] = self.timestamp[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
            }
        }
        None
    }

    fn augment(&mut self, middle: usize) {
        let mut bottleneck = self.r_cap[middle];

        // source tree: walk from the tail of `middle` up to the source
        let mut i = self.head[middle ^ 1];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a ^ 1]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);

        // sink tree
        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(-self.tr_cap[i]);

        self.r_cap[middle ^ 1] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = self.head[middle ^ 1];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] -= bottleneck;
                if self.tr_cap[i] <= 0.0 {
                    self.tr_cap[i] = 0.0;
                    self.make_orphan_front(i);
                }
                break;
            }
            self.r_cap[a] += bottleneck;
            self.r_cap[a ^ 1] -= bottleneck;
            if self.r_cap[a ^ 1] <= 0.0 {
                self.r_cap[a ^ 1] = 0.0;
                self.make_orphan_front(i);
            }
            i = self.head[a];
        }

        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] += bottleneck;
                if self.tr_cap[i] >= 0.0 {
                    self.tr_cap[i] = 0.0;
                    self.make_orphan_front(i);
                }
                break;
            }
            self.r_cap[a ^ 1] += bottleneck;
            self.r_cap[a] -= bottleneck;
            if self.r_cap[a] <= 0.0 {
                self.r_cap[a] = 0.0;
                self.make_orphan_front(i);
            }
            i = self.head[a];
        }

        self.flow += bottleneck;
    }

    /// Distance from `j` to its tree's terminal, or `None` if the chain ends at
    /// an orphan. Caches distances for the current timestamp.
    fn origin_distance(&mut self, mut j: usize) -> Option<u32> {
        let mut d: u32 = 0;
        loop {
            if self.timestamp[j] == self.time {
                return Some(d + self.dist[j]);
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.timestamp[j] = self.time;
                self.dist[j] = 1;
                return Some(d);
            }
            if a == ORPHAN {
                return None;
            }
            j = self.head[a];
        }
    }

    fn mark_path(&mut self, start: usize, mut d: u32) {
        let mut j = start;
        while self.timestamp[j] != self.time {
            self.timestamp[j] = self.time;
            self.dist[j] = d;
            d -= 1;
            j = self.head[self.parent[j]];
        }
    }

    fn adopt_source_orphan(&mut self, i: usize) {
        let mut best_arc = NONE;
        let mut best_dist = INFINITE_DIST;
        for k in self.arcs_of(i) {
            let a0 = self.out_arcs[k];
            if self.r_cap[a0 ^ 1] > 0.0 {
                let j = self.head[a0];
                if !self.in_sink_tree[j] && self.parent[j] != NONE {
                    if let Some(d) = self.origin_distance(j) {
                        if d < best_dist {
                            best_arc = a0;
                            best_dist = d;
                        }
                        self.mark_path(j, d);
                    }
                }
            }
        }
        if best_arc != NONE {
            self.parent[i] = best_arc;
            self.timestamp[i] = self.time;
            self.dist[i] = best_dist + 1;
            return;
        }
        self.parent[i] = NONE;
        for k in self.arcs_of(i) {
            let a0 = self.out_arcs[k];
            let j = self.head[a0];
            let a = self.parent[j];
            if !self.in_sink_tree[j] && a != NONE {
                if self.r_cap[a0 ^ 1] > 0.0 {
                    self.set_active(j);
                }
                if a != TERMINAL && a != ORPHAN && self.head[a] == i {
                    self.make_orphan_rear(j);
                }
            }
        }
    }

    fn adopt_sink_orphan(&mut self, i: usize) {
        let mut best_arc = NONE;
        let mut best_dist = INFINITE_DIST;
        for k in self.arcs_of(i) {
            let a0 = self.out_arcs[k];
            if self.r_cap[a0] > 0.0 {
                let j = self.head[a0];
                if self.in_sink_tree[j] && self.parent[j] != NONE {
                    if let Some(d) = self.origin_distance(j) {
                        if d < best_dist {
                            best_arc = a0;
                            best_dist = d;
                        }
                        self.mark_path(j, d);
                    }
                }
            }
        }
        if best_arc != NONE {
            self.parent[i] = best_arc;
            self.timestamp[i] = self.time;
            self.dist[i] = best_dist + 1;
            return;
        }
        self.parent[i] = NONE;
        for k in self.arcs_of(i) {
            let a0 = self.out_arcs[k];
            let j = self.head[a0];
            let a = self.parent[j];
            if self.in_sink_tree[j] && a != NONE {
                if self.r_cap[a0] > 0.0 {
                    self.set_active(j);
                }
                if a != TERMINAL && a != ORPHAN && self.head[a] == i {
                    self.make_orphan_rear(j);
                }
            }
        }
    }

    /// Nodes reachable from the source through positive residual capacity.
    fn source_reachable(&self) -> Vec<bool> {
        let n = self.tr_cap.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for (i, &cap) in self.tr_cap.iter().enumerate() {
            if cap > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for k in self.arcs_of(i) {
                let a = self.out_arcs[k];
                let j = self.head[a];
                if !seen[j] && self.r_cap[a] > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}

/// Computes a maximum flow and the canonical (smallest) source side of a
/// minimum cut. Deterministic for a given network.
pub fn solve_min_cut(net: &FlowNetwork) -> MinCutResult {
    let mut solver = Solver::new(net);
    solver.run();
    MinCutResult {
        flow_value: solver.flow,
        source_side: solver.source_reachable(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum cut capacity over all 2^n source/sink partitions.
    pub(crate) fn brute_force_min_cut(net: &FlowNetwork) -> f64 {
        let n = net.node_count();
        let mut best = f64::INFINITY;
        let mut side = vec![false; n];
        for bits in 0u32..(1 << n) {
            for (i, s) in side.iter_mut().enumerate() {
                *s = bits >> i & 1 == 1;
            }
            best = best.min(net.cut_capacity(&side));
        }
        best
    }

    fn random_network(rng: &mut ChaCha8Rng) -> FlowNetwork {
        let n = rng.gen_range(1..=12);
        let mut arcs = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.35) {
                    arcs.push(NeighborArc {
                        u,
                        v,
                        capacity_uv: f64::from(rng.gen_range(0..=10)),
                        capacity_vu: f64::from(rng.gen_range(0..=10)),
                    });
                }
            }
        }
        let caps = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        f64::from(rng.gen_range(0..=10))
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let s = caps(rng);
        let t = caps(rng);
        FlowNetwork::new(n, arcs, s, t).unwrap()
    }

    #[test]
    fn single_node_bottleneck() {
        let net = FlowNetwork::new(1, vec![], vec![5.0], vec![3.0]).unwrap();
        let cut = solve_min_cut(&net);
        assert_eq!(cut.flow_value, 3.0);
        assert!(cut.is_source(0));
    }

    #[test]
    fn single_path() {
        let arcs = vec![NeighborArc {
            u: 0,
            v: 1,
            capacity_uv: 4.0,
            capacity_vu: 4.0,
        }];
        let net = FlowNetwork::new(2, arcs, vec![10.0, 0.0], vec![0.0, 10.0]).unwrap();
        let cut = solve_min_cut(&net);
        assert_eq!(cut.flow_value, 4.0);
        assert_eq!(cut.source_nodes(), vec![0]);
    }

    #[test]
    fn rejects_bad_networks() {
        let arc = |u, v, c| NeighborArc {
            u,
            v,
            capacity_uv: c,
            capacity_vu: c,
        };
        assert!(FlowNetwork::new(2, vec![arc(0, 0, 1.0)], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(FlowNetwork::new(
            2,
            vec![arc(0, 1, 1.0), arc(1, 0, 1.0)],
            vec![0.0; 2],
            vec![0.0; 2]
        )
        .is_err());
        assert!(
            FlowNetwork::new(2, vec![arc(0, 1, f64::NAN)], vec![0.0; 2], vec![0.0; 2]).is_err()
        );
        assert!(FlowNetwork::new(2, vec![arc(0, 1, -1.0)], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(FlowNetwork::new(2, vec![], vec![f64::NAN, 0.0], vec![0.0; 2]).is_err());
        assert!(FlowNetwork::new(2, vec![arc(0, 2, 1.0)], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(FlowNetwork::new(2, vec![], vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let net = random_network(&mut rng);
            let cut = solve_min_cut(&net);
            assert_eq!(cut.flow_value, brute_force_min_cut(&net));
            assert_eq!(net.cut_capacity(&cut.source_side), cut.flow_value);
        }
    }

    #[test]
    fn crossing_arcs_are_saturated() {
        // Everything leaving the source side must be at capacity, so the BFS
        // set's cut capacity equals the flow.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let net = random_network(&mut rng);
            let cut = solve_min_cut(&net);
            let cap = net.cut_capacity(&cut.source_side);
            assert!((cap - cut.flow_value).abs() <= 1e-9 * cap.max(1.0));
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = random_network(&mut rng);
        assert_eq!(solve_min_cut(&net), solve_min_cut(&net));
    }
}
