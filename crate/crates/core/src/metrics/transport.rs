//! Exact 1-Wasserstein distance between discrete point clouds.
//!
//! Equal-size uniform clouds reduce to a minimum-cost perfect matching, solved
//! with the Hungarian algorithm. Anything else is a transportation problem,
//! solved with the transportation simplex (MODI potentials on a spanning-tree
//! basis).

use std::collections::VecDeque;

use log::warn;

use super::euclidean;
use crate::embeddings::TokenCloud;

/// Exact W1 under Euclidean ground cost. `None` when either cloud is
/// degenerate (no points).
pub fn wasserstein(a: &TokenCloud, b: &TokenCloud) -> Option<f64> {
    if a.is_degenerate() || b.is_degenerate() {
        return None;
    }
    assert_eq!(a.dim(), b.dim(), "wasserstein: clouds differ in dimension");
    let cost = cost_matrix(&a.points, &b.points);
    let uniform = |c: &TokenCloud| c.weights.iter().all(|&w| w == c.weights[0]);
    let value = if a.len() == b.len() && uniform(a) && uniform(b) {
        assignment_cost(&cost, a.len()) / a.len() as f64
    } else {
        transport_cost(&a.weights, &b.weights, &cost)
    };
    Some(value.max(0.0))
}

/// W1 between two uniformly weighted point sets.
pub fn wasserstein_points<P: AsRef<[f64]>>(a: &[P], b: &[P]) -> Option<f64> {
    let to_cloud = |ps: &[P]| TokenCloud::uniform(ps.iter().map(|p| p.as_ref().to_vec()).collect());
    wasserstein(&to_cloud(a), &to_cloud(b))
}

fn cost_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for p in a {
        for q in b {
            cost.push(euclidean(p, q));
        }
    }
    cost
}

/// Minimum total cost of a perfect matching on an `n`×`n` row-major cost
/// matrix (Hungarian algorithm with potentials, O(n³)).
pub fn assignment_cost(cost: &[f64], n: usize) -> f64 {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return 0.0;
    }
    // 1-based rows/columns; column 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n)
        .map(|j| cost[(matched_row[j] - 1) * n + (j - 1)])
        .sum()
}

/// Minimum cost of moving `supply` onto `demand` over an `n`×`m` row-major
/// cost matrix. Both mass vectors are nonnegative; `demand` is rescaled to the
/// total of `supply`.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let plan = TransportPlan::solve(supply, demand, cost);
    plan.cells
        .iter()
        .map(|&(i, j)| plan.flow[i * plan.m + j] * cost[i * plan.m + j])
        .sum()
}

struct TransportPlan {
    m: usize,
    /// Basic cells; always n + m - 1 of them, forming a spanning tree of the
    /// bipartite row/column graph.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl TransportPlan {
    fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        assert!(n > 0 && m > 0, "transport: empty marginals");
        assert_eq!(cost.len(), n * m);
        let total_supply: f64 = supply.iter().sum();
        let total_demand: f64 = demand.iter().sum();
        let demand: Vec<f64> = demand
            .iter()
            .map(|d| d * total_supply / total_demand)
            .collect();

        let mut plan = TransportPlan::northwest_corner(supply, &demand);
        let max_cost = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
        let tol = 1e-12 * max_cost.max(1.0);
        let bland_after = 50 * (n + m);
        let max_pivots = 5000 * (n + m) + 10_000;
        let mut basic = vec![false; n * m];
        for &(i, j) in &plan.cells {
            basic[i * m + j] = true;
        }
        let mut pivots = 0;
        loop {
            let (u, v) = plan.potentials(n, cost);
            let bland = pivots >= bland_after;
            let mut entering = None;
            let mut best = -tol;
            'scan: for i in 0..n {
                for j in 0..m {
                    if basic[i * m + j] {
                        continue;
                    }
                    let reduced = cost[i * m + j] - u[i] - v[j];
                    if reduced < best {
                        entering = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = reduced;
                    }
                }
            }
            let Some(enter) = entering else { break };
            if pivots >= max_pivots {
                warn!("transport simplex stopped after {pivots} pivots without proving optimality");
                break;
            }
            let leave = plan.pivot(n, enter);
            basic[leave.0 * m + leave.1] = false;
            basic[enter.0 * m + enter.1] = true;
            pivots += 1;
        }
        plan
    }

    fn northwest_corner(supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut flow = vec![0.0; n * m];
        let mut cells = Vec::with_capacity(n + m - 1);
        let mut rem_s = supply.to_vec();
        let mut rem_d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = rem_s[i].min(rem_d[j]).max(0.0);
            flow[i * m + j] = x;
            cells.push((i, j));
            rem_s[i] -= x;
            rem_d[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 || (i < n - 1 && rem_s[i] <= rem_d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        // rounding leftovers land in the final cell
        flow[(n - 1) * m + (m - 1)] += rem_s[n - 1].max(0.0);
        TransportPlan { m, cells, flow }
    }

    /// Row potentials `u` and column potentials `v` with `u[i] + v[j] = c[i][j]`
    /// on every basic cell and `u[0] = 0`.
    fn potentials(&self, n: usize, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let adjacency = self.adjacency(n);
        let mut potential = vec![f64::NAN; n + m];
        potential[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &next in &adjacency[node] {
                if !potential[next].is_nan() {
                    continue;
                }
                let (i, j) = if node < n { (node, next - n) } else { (next, node - n) };
                potential[next] = cost[i * m + j] - potential[node];
                queue.push_back(next);
            }
        }
        let v = potential.split_off(n);
        (potential, v)
    }

    fn adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adjacency = vec![Vec::new(); n + self.m];
        for &(i, j) in &self.cells {
            adjacency[i].push(n + j);
            adjacency[n + j].push(i);
        }
        adjacency
    }

    /// Bring `enter` into the basis, shifting flow around the cycle it closes.
    /// Returns the cell that left.
    fn pivot(&mut self, n: usize, enter: (usize, usize)) -> (usize, usize) {
        let m = self.m;
        let adjacency = self.adjacency(n);
        // tree path from row node enter.0 to column node n + enter.1
        let target = n + enter.1;
        let mut parent = vec![usize::MAX; n + m];
        parent[enter.0] = enter.0;
        let mut queue = VecDeque::from([enter.0]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &adjacency[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != enter.0 {
            let prev = parent[node];
            let cell = if prev < n { (prev, node - n) } else { (node, prev - n) };
            path.push(cell);
            node = prev;
        }
        // path runs from the column end back to the row end; the cycle sign
        // alternates starting with a decrease on the edge at the column end.
        let mut theta = f64::INFINITY;
        let mut leave_pos = 0;
        for (pos, &(i, j)) in path.iter().enumerate().step_by(2) {
            let x = self.flow[i * m + j];
            if x < theta {
                theta = x;
                leave_pos = pos;
            }
        }
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.flow[i * m + j] -= theta;
            } else {
                self.flow[i * m + j] += theta;
            }
        }
        let leave = path[leave_pos];
        self.flow[leave.0 * m + leave.1] = 0.0;
        self.flow[enter.0 * m + enter.1] = theta;
        let slot = self
            .cells
            .iter()
            .position(|&c| c == leave)
            .expect("leaving cell is basic");
        self.cells[slot] = enter;
        leave
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn identical_clouds() {
        let a = TokenCloud::uniform(vec![vec![0.0, 1.0], vec![3.0, -2.0], vec![1.5, 1.5]]);
        assert_eq!(wasserstein(&a, &a), Some(0.0));
    }

    #[test]
    fn singletons_in_one_dimension() {
        assert_eq!(wasserstein_points(&pts(&[0.0]), &pts(&[1.0])), Some(1.0));
    }

    #[test]
    fn shifted_pairs() {
        // both matchings: |0-1|+|1-2| = 2 and |0-2|+|1-1| = 2, so W1 = 2/2
        assert_eq!(wasserstein_points(&pts(&[0.0, 1.0]), &pts(&[1.0, 2.0])), Some(1.0));
    }

    #[test]
    fn degenerate_is_none() {
        let empty = TokenCloud::uniform(vec![]);
        let a = TokenCloud::uniform(pts(&[1.0]));
        assert_eq!(wasserstein(&empty, &a), None);
        assert_eq!(wasserstein(&a, &empty), None);
    }

    #[test]
    fn unequal_sizes_in_one_dimension() {
        // 1-D W1 = integral of |F_a - F_b|; a = {0,1,2} uniform, b = {0,2} uniform
        // F_a - F_b: on [0,1): 1/3 - 1/2, on [1,2): 2/3 - 1/2 -> 1/6 + 1/6
        let w = wasserstein_points(&pts(&[0.0, 1.0, 2.0]), &pts(&[0.0, 2.0])).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn weighted_transport() {
        let a = TokenCloud::weighted(pts(&[0.0, 10.0]), vec![3.0, 1.0]).unwrap();
        let b = TokenCloud::uniform(pts(&[0.0]));
        assert!((wasserstein(&a, &b).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn simplex_matches_hungarian_on_square_problems() {
        let a = pts(&[0.3, 4.0, -1.0, 2.2]);
        let b = pts(&[1.0, 1.1, -3.0, 5.0]);
        let cost = cost_matrix(&a, &b);
        let w = vec![0.25; 4];
        let simplex = transport_cost(&w, &w, &cost);
        let hungarian = assignment_cost(&cost, 4) / 4.0;
        assert!((simplex - hungarian).abs() < 1e-12);
    }
}
