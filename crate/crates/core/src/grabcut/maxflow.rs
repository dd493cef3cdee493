//! Dinic max-flow on real capacities.
//!
//! Residual capacities at or below a tolerance proportional to the largest
//! finite capacity are treated as saturated.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    residual: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
    max_cap: f64,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
            max_cap: 0.0,
        }
    }

    pub fn with_capacity(nodes: usize, arcs: usize) -> Self {
        let mut g = Self::new(nodes);
        g.arcs.reserve(arcs * 2);
        g
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Adds `u -> v` with capacity `forward` and `v -> u` with `backward`,
    /// sharing one residual pair.
    pub fn add_edge(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        debug_assert!(forward >= 0.0 && backward >= 0.0);
        self.adjacency[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, residual: forward });
        self.adjacency[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, residual: backward });
        for c in [forward, backward] {
            if c.is_finite() {
                self.max_cap = self.max_cap.max(c);
            }
        }
    }

    fn eps(&self) -> f64 {
        1e-12 * self.max_cap.max(1.0)
    }

    fn levels(&self, s: usize, t: usize, eps: f64) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.nodes()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adjacency[u] {
                let arc = &self.arcs[a];
                if arc.residual > eps && level[arc.to] == u32::MAX {
                    level[arc.to] = level[u] + 1;
                    q.push_back(arc.to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let eps = self.eps();
        let mut total = 0.0;
        while let Some(mut level) = self.levels(s, t, eps) {
            let mut next = vec![0usize; self.nodes()];
            let mut stack: Vec<usize> = Vec::new();
            let mut u = s;
            loop {
                if u == t {
                    let push = stack
                        .iter()
                        .map(|&a| self.arcs[a].residual)
                        .fold(f64::INFINITY, f64::min);
                    total += push;
                    let mut cut_at = None;
                    for (i, &a) in stack.iter().enumerate() {
                        self.arcs[a].residual -= push;
                        self.arcs[a ^ 1].residual += push;
                        if cut_at.is_none() && self.arcs[a].residual <= eps {
                            cut_at = Some(i);
                        }
                    }
                    let i = cut_at.expect("augmenting path saturates an arc");
                    stack.truncate(i);
                    u = stack.last().map_or(s, |&a| self.arcs[a].to);
                    continue;
                }
                let mut advanced = false;
                while next[u] < self.adjacency[u].len() {
                    let a = self.adjacency[u][next[u]];
                    let arc = &self.arcs[a];
                    if arc.residual > eps && level[arc.to] == level[u] + 1 {
                        stack.push(a);
                        u = arc.to;
                        advanced = true;
                        break;
                    }
                    next[u] += 1;
                }
                if advanced {
                    continue;
                }
                if u == s {
                    break;
                }
                level[u] = u32::MAX;
                let a = stack.pop().expect("non-source node has an entry arc");
                u = self.arcs[a ^ 1].to;
                next[u] += 1;
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual graph (the source side of a
    /// minimum cut once [`max_flow`](Self::max_flow) has run).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let eps = self.eps();
        let mut seen = vec![false; self.nodes()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adjacency[u] {
                let arc = &self.arcs[a];
                if arc.residual > eps && !seen[arc.to] {
                    seen[arc.to] = true;
                    q.push_back(arc.to);
                }
            }
        }
        seen
    }
}
