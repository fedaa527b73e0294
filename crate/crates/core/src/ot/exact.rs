//! Exact discrete optimal transport.
//!
//! The transport LP is solved with the transportation simplex (the network
//! simplex specialised to a complete bipartite graph). The basis is a
//! spanning tree over the `n + m` row and column nodes; each pivot prices
//! every non-basic cell against the tree potentials, pushes flow around the
//! cycle the entering cell closes and drops the blocking cell.
//!
//! Degenerate pivots are resolved with Dantzig's rule until a long run of
//! zero-length steps is seen, after which Bland's smallest-index rule takes
//! over to rule out cycling.

use std::collections::VecDeque;

use itertools::Itertools;
use ndarray::Array2;

use super::{check_problem, inner, marginal_violation, TransportPlan};
use crate::cost::CostMatrix;
use crate::error::{Error, Result};

/// Largest `n_src * n_tgt` accepted by [`exact_ot`].
pub const EXACT_MAX_ENTRIES: usize = 10_000;
/// Largest side accepted by [`exact_ot_by_enumeration`].
pub const ENUMERATION_MAX_N: usize = 8;

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

/// Optimal value and an optimal vertex plan of the transport LP.
pub fn exact_ot(cost: &CostMatrix, src: &[f64], tgt: &[f64]) -> Result<(f64, TransportPlan)> {
    let c = &cost.values;
    let (n, m) = c.dim();
    if n * m > EXACT_MAX_ENTRIES {
        return Err(Error::TooLarge(format!("{n}x{m} exceeds {EXACT_MAX_ENTRIES} entries")));
    }
    check_problem(c, src, tgt)?;
    let mut simplex = Transportation::northwest_corner(c, src, tgt);
    let pivots = simplex.solve()?;
    let matrix = simplex.flow;
    let value = inner(&matrix, c);
    let marginal_error = marginal_violation(&matrix, src, tgt);
    Ok((
        value,
        TransportPlan {
            matrix,
            cost_value: value,
            iterations_used: pivots,
            converged: true,
            marginal_error,
        },
    ))
}

/// Exact OT for square problems with uniform weights on both sides by
/// enumerating every permutation; the optimum of such a problem is attained
/// at a permutation matrix.
pub fn exact_ot_by_enumeration(cost: &CostMatrix) -> Result<(f64, TransportPlan)> {
    let c = &cost.values;
    let (n, m) = c.dim();
    if n != m {
        return Err(Error::ShapeMismatch {
            rows: n,
            cols: m,
            n_src: n,
            n_tgt: n,
        });
    }
    if n == 0 || n > ENUMERATION_MAX_N {
        return Err(Error::TooLarge(format!(
            "enumeration needs 1 <= n <= {ENUMERATION_MAX_N}, got {n}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (total, perm) = best.expect("at least one permutation");
    let w = 1.0 / n as f64;
    let mut matrix = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        matrix[[i, j]] = w;
    }
    let value = total / n as f64;
    Ok((
        value,
        TransportPlan {
            matrix,
            cost_value: value,
            iterations_used: 0,
            converged: true,
            marginal_error: 0.0,
        },
    ))
}

struct Transportation<'a> {
    cost: &'a Array2<f64>,
    flow: Array2<f64>,
    basic: Array2<bool>,
    basis: Vec<(usize, usize)>,
}

impl<'a> Transportation<'a> {
    fn northwest_corner(cost: &'a Array2<f64>, src: &[f64], tgt: &[f64]) -> Self {
        let (n, m) = cost.dim();
        let mut supply = src.to_vec();
        let mut demand = tgt.to_vec();
        let mut flow = Array2::zeros((n, m));
        let mut basic = Array2::from_elem((n, m), false);
        let mut basis = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let q = supply[i].min(demand[j]);
            flow[[i, j]] = q;
            basic[[i, j]] = true;
            basis.push((i, j));
            supply[i] -= q;
            demand[j] -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(basis.len(), n + m - 1);
        Transportation {
            cost,
            flow,
            basic,
            basis,
        }
    }

    // Nodes 0..n are rows, n..n+m are columns.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let (n, m) = self.cost.dim();
        let mut adj = vec![Vec::new(); n + m];
        for &(i, j) in &self.basis {
            adj[i].push(n + j);
            adj[n + j].push(i);
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = self.cost.dim();
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; m];
        let mut seen = vec![false; n + m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < n {
                    let j = next - n;
                    v[j] = self.cost[[node, j]] - u[node];
                } else {
                    let j = node - n;
                    u[next] = self.cost[[next, j]] - v[j];
                }
                queue.push_back(next);
            }
        }
        (u, v)
    }

    /// Tree path from row node `i` to column node `n + j`, as a list of cells.
    fn tree_path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<(usize, usize)> {
        let (n, m) = self.cost.dim();
        let goal = n + j;
        let mut parent = vec![usize::MAX; n + m];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = goal;
        while node != i {
            let prev = parent[node];
            let cell = if prev < n { (prev, node - n) } else { (node, prev - n) };
            cells.push(cell);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn solve(&mut self) -> Result<usize> {
        let (n, m) = self.cost.dim();
        let scale = self.cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
        let optimality_tol = 1e-12 * scale;
        let max_pivots = 200 * (n + m) * (n + m) + 10_000;
        let mut degenerate_run = 0;
        let mut bland = false;

        for pivot in 0..max_pivots {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);

            let mut entering = None;
            let mut best = -optimality_tol;
            'price: for i in 0..n {
                for j in 0..m {
                    if self.basic[[i, j]] {
                        continue;
                    }
                    let reduced = self.cost[[i, j]] - u[i] - v[j];
                    if reduced < best {
                        entering = Some((i, j));
                        if bland {
                            break 'price;
                        }
                        best = reduced;
                    }
                }
            }
            let Some((ei, ej)) = entering else {
                return Ok(pivot);
            };

            // Cells along the tree path alternate between losing and gaining
            // flow, starting with a loss at the entering row.
            let path = self.tree_path(&adj, ei, ej);
            let mut theta = f64::INFINITY;
            let mut leaving = None;
            for &(i, j) in path.iter().step_by(2) {
                let x = self.flow[[i, j]];
                let better = match leaving {
                    None => true,
                    Some((li, lj)) => x < theta || (x == theta && (i, j) < (li, lj)),
                };
                if better {
                    theta = x;
                    leaving = Some((i, j));
                }
            }
            let (li, lj) = leaving.expect("cycle has a losing cell");
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[[i, j]] -= theta;
                } else {
                    self.flow[[i, j]] += theta;
                }
            }
            self.flow[[li, lj]] = 0.0;
            self.flow[[ei, ej]] = theta;
            self.basic[[li, lj]] = false;
            self.basic[[ei, ej]] = true;
            let slot = self
                .basis
                .iter()
                .position(|&c| c == (li, lj))
                .expect("leaving cell is basic");
            self.basis[slot] = (ei, ej);

            if theta == 0.0 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
        Err(Error::Numerical(format!(
            "transportation simplex exceeded {max_pivots} pivots"
        )))
    }
}
