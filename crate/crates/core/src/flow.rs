//! Uncapacitated min-cost flow on king-move grid graphs, solved by successive
//! shortest paths with Dijkstra on reduced costs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{mismatch, Error, Result};
use crate::grid::{checked_cells_with_limit, linear_index, multi_index};

/// Largest node count accepted by [`king_graph`].
pub const MAX_FLOW_NODES: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        MinCostFlow {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds an arc `u → v` and its residual twin; returns the arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64, cost: f64) -> usize {
        let id = self.to.len();
        self.to.extend([v, u]);
        self.cap.extend([cap, 0.0]);
        self.cost.extend([cost, -cost]);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Minimum cost of routing `supply` (positive = source, negative = sink).
    /// Supplies must balance within `1e-9` of the total absolute supply.
    /// Arc costs must be nonnegative.
    pub fn min_cost(&self, supply: &[f64]) -> Result<f64> {
        let n = self.num_nodes();
        if supply.len() != n {
            return Err(mismatch("one supply value per node expected"));
        }
        let abs_total: f64 = supply.iter().map(|s| s.abs()).sum();
        let net: f64 = supply.iter().sum();
        if net.abs() > 1e-9 * abs_total.max(1.0) {
            return Err(mismatch(format!("supplies do not balance (net {net:.3e})")));
        }
        if abs_total == 0.0 {
            return Ok(0.0);
        }
        let mut g = self.clone();
        let (src, sink) = (n, n + 1);
        g.adj.push(Vec::new());
        g.adj.push(Vec::new());
        let mut pending = 0.0;
        for (i, &s) in supply.iter().enumerate() {
            if s > 0.0 {
                g.add_arc(src, i, s, 0.0);
                pending += s;
            } else if s < 0.0 {
                g.add_arc(i, sink, -s, 0.0);
            }
        }
        let tol = 1e-14 * abs_total;
        let total_nodes = n + 2;
        let mut pot = vec![0.0; total_nodes];
        let mut dist = vec![f64::INFINITY; total_nodes];
        let mut via = vec![usize::MAX; total_nodes];
        let mut heap = BinaryHeap::new();
        let mut iterations = 0usize;
        while pending > tol {
            iterations += 1;
            if iterations > 50 * (g.to.len() + total_nodes) {
                return Err(Error::Solver("min-cost flow made no progress".into()));
            }
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            via.iter_mut().for_each(|a| *a = usize::MAX);
            dist[src] = 0.0;
            heap.push(Entry(0.0, src));
            while let Some(Entry(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &a in &g.adj[u] {
                    if g.cap[a] <= tol {
                        continue;
                    }
                    let v = g.to[a];
                    let nd = d + (g.cost[a] + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        via[v] = a;
                        heap.push(Entry(nd, v));
                    }
                }
            }
            if !dist[sink].is_finite() {
                // remaining supply is below the balance tolerance
                break;
            }
            let reach = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
            for (p, d) in pot.iter_mut().zip(&dist) {
                *p += if d.is_finite() { *d } else { reach };
            }
            let mut push = f64::INFINITY;
            let mut v = sink;
            while v != src {
                let a = via[v];
                push = push.min(g.cap[a]);
                v = g.to[a ^ 1];
            }
            let mut v = sink;
            while v != src {
                let a = via[v];
                g.cap[a] -= push;
                g.cap[a ^ 1] += push;
                v = g.to[a ^ 1];
            }
            pending -= push;
        }
        // cost of the flow carried by the original arcs
        let mut total = 0.0;
        for a in (0..self.to.len()).step_by(2) {
            let flow = g.cap[a + 1];
            if flow > 0.0 {
                total += flow * self.cost[a];
            }
        }
        Ok(total)
    }
}

/// Unordered king-move neighbor pairs `(a, b)`, `a < b`, of the `k^r` grid by
/// linear index (cells at ℓ∞ index distance exactly 1).
pub fn king_edges(k: usize, r: usize) -> Result<Vec<(usize, usize)>> {
    let cells = checked_cells_with_limit(k, r, MAX_FLOW_NODES, "flow graph nodes")?;
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(r as u32))
        .map(|c| multi_index(c, 3, r).into_iter().map(|o| o as i64 - 1).collect())
        .filter(|o: &Vec<i64>| o.iter().any(|&x| x != 0))
        .collect();
    let mut edges = Vec::new();
    let mut nb = vec![0usize; r];
    for lin in 0..cells {
        let idx = multi_index(lin, k, r);
        'offsets: for off in &offsets {
            for a in 0..r {
                let v = idx[a] as i64 + off[a];
                if v < 0 || v >= k as i64 {
                    continue 'offsets;
                }
                nb[a] = v as usize;
            }
            let other = linear_index(&nb, k);
            if other > lin {
                edges.push((lin, other));
            }
        }
    }
    Ok(edges)
}

/// Flow network on the `k^r` grid with arcs of cost `1/k` between king-move
/// neighbors. With `ground`, an extra last node connects to every cell with
/// cost 1 in both directions.
pub fn king_graph(k: usize, r: usize, ground: bool) -> Result<MinCostFlow> {
    let cells = checked_cells_with_limit(k, r, MAX_FLOW_NODES, "flow graph nodes")?;
    let mut g = MinCostFlow::new(cells + usize::from(ground));
    let step = 1.0 / k as f64;
    for (a, b) in king_edges(k, r)? {
        g.add_arc(a, b, f64::INFINITY, step);
        g.add_arc(b, a, f64::INFINITY, step);
    }
    if ground {
        for c in 0..cells {
            g.add_arc(c, cells, f64::INFINITY, 1.0);
            g.add_arc(cells, c, f64::INFINITY, 1.0);
        }
    }
    Ok(g)
}
