//! Exact discrete optimal transport between two uniform empirical measures.
//!
//! The transportation problem is solved by a primal network simplex on the
//! bipartite graph rows -> columns, with an artificial root and a strongly
//! feasible spanning tree (so degenerate pivots cannot cycle). Supplies are
//! scaled to integers: every row ships `n_cols` units and every column receives
//! `n_rows` units, so flows stay exact and the coupling is `flow / (n_rows * n_cols)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimal coupling between `rows` and `cols` uniform atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major coupling, total mass 1; row sums `1/rows`, column sums `1/cols`.
    pub coupling: Vec<f64>,
    /// Objective value `sum_ij cost_ij * coupling_ij`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.coupling
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn nonzeros(&self) -> usize {
        self.coupling.iter().filter(|v| **v > 0.0).count()
    }

    pub fn transpose(&self) -> TransportPlan {
        let mut coupling = Vec::with_capacity(self.coupling.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                coupling.push(self.get(i, j));
            }
        }
        TransportPlan {
            rows: self.cols,
            cols: self.rows,
            coupling,
            cost: self.cost,
        }
    }
}

const NONE: usize = usize::MAX;

struct Simplex<'a> {
    n_rows: usize,
    n_cols: usize,
    costs: &'a [f64],
    art_cost: f64,
    // tree
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// true when the tree arc of a node points from the node to its parent
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    // arcs: 0..rows*cols are real, then one artificial arc per non-root node
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    next_arc: usize,
    block: usize,
    eps: f64,
    // scratch for the tree walk
    child_start: Vec<usize>,
    child_list: Vec<usize>,
    queue: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn new(n_rows: usize, n_cols: usize, costs: &'a [f64]) -> Self {
        let nodes = n_rows + n_cols + 1;
        let root = n_rows + n_cols;
        let real = n_rows * n_cols;
        let arcs = real + n_rows + n_cols;
        let max_cost = costs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_cost + 1.0) * nodes as f64;

        let mut parent = vec![root; nodes];
        parent[root] = NONE;
        let mut pred = vec![NONE; nodes];
        let mut up = vec![false; nodes];
        let mut flow = vec![0i64; arcs];
        let mut in_tree = vec![false; arcs];
        for u in 0..(n_rows + n_cols) {
            let e = real + u;
            pred[u] = e;
            in_tree[e] = true;
            if u < n_rows {
                up[u] = true;
                flow[e] = n_cols as i64;
            } else {
                flow[e] = n_rows as i64;
            }
        }
        let block = ((arcs as f64).sqrt().ceil() as usize).max(10);
        let mut s = Simplex {
            n_rows,
            n_cols,
            costs,
            art_cost,
            parent,
            pred,
            up,
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            flow,
            in_tree,
            next_arc: 0,
            block,
            eps: 1e-12 * art_cost,
            child_start: vec![0; nodes + 1],
            child_list: vec![0; nodes],
            queue: Vec::with_capacity(nodes),
        };
        s.refresh_tree();
        s
    }

    fn root(&self) -> usize {
        self.n_rows + self.n_cols
    }

    fn real_arcs(&self) -> usize {
        self.n_rows * self.n_cols
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if e < real {
            (e / self.n_cols, self.n_rows + e % self.n_cols)
        } else {
            let u = e - real;
            if u < self.n_rows {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn cost(&self, e: usize) -> f64 {
        if e < self.real_arcs() {
            self.costs[e]
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (s, t) = self.endpoints(e);
        self.cost(e) + self.pi[s] - self.pi[t]
    }

    /// Recompute depths and potentials from scratch by a breadth-first walk.
    fn refresh_tree(&mut self) {
        let nodes = self.parent.len();
        let root = self.root();
        self.child_start.iter_mut().for_each(|c| *c = 0);
        for u in 0..nodes {
            if u != root {
                self.child_start[self.parent[u] + 1] += 1;
            }
        }
        for u in 0..nodes {
            self.child_start[u + 1] += self.child_start[u];
        }
        let mut fill = self.child_start.clone();
        for u in 0..nodes {
            if u != root {
                let p = self.parent[u];
                self.child_list[fill[p]] = u;
                fill[p] += 1;
            }
        }
        self.queue.clear();
        self.queue.push(root);
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let p = self.queue[head];
            head += 1;
            for k in self.child_start[p]..self.child_start[p + 1] {
                let u = self.child_list[k];
                let c = self.cost(self.pred[u]);
                self.depth[u] = self.depth[p] + 1;
                self.pi[u] = if self.up[u] {
                    self.pi[p] - c
                } else {
                    self.pi[p] + c
                };
                self.queue.push(u);
            }
        }
        debug_assert_eq!(self.queue.len(), nodes, "tree must span every node");
    }

    /// Block search pricing.
    fn entering_arc(&mut self) -> Option<usize> {
        let arcs = self.flow.len();
        let mut best = -self.eps;
        let mut chosen = NONE;
        let mut count = self.block;
        for step in 0..arcs {
            let e = (self.next_arc + step) % arcs;
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < best {
                    best = rc;
                    chosen = e;
                }
            }
            count -= 1;
            if count == 0 {
                if chosen != NONE {
                    break;
                }
                count = self.block;
            }
        }
        if chosen == NONE {
            None
        } else {
            self.next_arc = chosen;
            Some(chosen)
        }
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, e_in: usize) -> Result<()> {
        let (first, second) = self.endpoints(e_in);
        let join = self.join(first, second);

        // leaving arc: last blocking arc in cycle orientation keeps the tree strongly feasible
        let mut delta = i64::MAX;
        let mut u_out = NONE;
        let mut leaving_on_first = false;
        let mut u = first;
        while u != join {
            if self.up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    leaving_on_first = true;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    leaving_on_first = false;
                }
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(Error::Internal(
                "transport problem reported unbounded".into(),
            ));
        }

        if delta > 0 {
            self.flow[e_in] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.up[u] { -delta } else { delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.up[u] { delta } else { -delta };
                u = self.parent[u];
            }
        }

        let (u_in, v_in) = if leaving_on_first {
            (first, second)
        } else {
            (second, first)
        };
        let e_out = self.pred[u_out];
        self.in_tree[e_out] = false;
        self.in_tree[e_in] = true;

        // re-hang the path u_in .. u_out below v_in, reversing parent links
        let mut u = u_in;
        let mut new_parent = v_in;
        let mut new_pred = e_in;
        let mut new_up = self.endpoints(e_in).0 == u_in;
        loop {
            let (old_parent, old_pred, old_up) = (self.parent[u], self.pred[u], self.up[u]);
            self.parent[u] = new_parent;
            self.pred[u] = new_pred;
            self.up[u] = new_up;
            if u == u_out {
                break;
            }
            new_parent = u;
            new_pred = old_pred;
            new_up = !old_up;
            u = old_parent;
        }
        self.refresh_tree();
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        // generous bound; each nondegenerate pivot strictly lowers the objective
        let limit = 50 * self.flow.len() * (self.n_rows + self.n_cols) + 1000;
        for _ in 0..limit {
            match self.entering_arc() {
                Some(e) => self.pivot(e)?,
                None => return Ok(()),
            }
        }
        Err(Error::Internal(
            "network simplex exceeded its pivot limit".into(),
        ))
    }
}

/// Solve `min <cost, T>` over couplings with uniform marginals.
///
/// `costs` is row-major `n_rows x n_cols`. The returned plan is a basic
/// solution: at most `n_rows + n_cols - 1` nonzero entries.
pub fn solve_uniform_transport(
    n_rows: usize,
    n_cols: usize,
    costs: &[f64],
) -> Result<TransportPlan> {
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::invalid("transport between empty sets"));
    }
    if costs.len() != n_rows * n_cols {
        return Err(Error::shape(format!(
            "cost matrix needs {} entries, got {}",
            n_rows * n_cols,
            costs.len()
        )));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("transport costs must be finite"));
    }

    let mut simplex = Simplex::new(n_rows, n_cols, costs);
    simplex.run()?;

    let real = n_rows * n_cols;
    if simplex.flow[real..].iter().any(|f| *f != 0) {
        return Err(Error::Internal(
            "artificial arcs carry flow at optimum".into(),
        ));
    }
    let mass = (n_rows * n_cols) as f64;
    let coupling: Vec<f64> = simplex.flow[..real]
        .iter()
        .map(|f| *f as f64 / mass)
        .collect();
    let cost = simplex.flow[..real]
        .iter()
        .zip(costs)
        .filter(|(f, _)| **f != 0)
        .map(|(f, c)| *f as f64 * c)
        .sum::<f64>()
        / mass;
    Ok(TransportPlan {
        rows: n_rows,
        cols: n_cols,
        coupling,
        cost,
    })
}
