//! Independent brute-force oracles for the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

//!
//! The W-graph enumerator here is deliberately written differently from
//! the library: an iterative odometer over raw assignment vectors, cycle
//! detection by Kahn-style peeling, and reachability by breadth-first
//! search over the arrow edges. It must never call into the library's
//! graph code.

/// All arrow assignments for the root set `w` (bitmask) over `l` indices
/// that contain no directed cycle. `None` marks a root.
pub fn oracle_wgraphs(l: usize, w_mask: u32) -> Vec<Vec<Option<usize>>> {
    let free: Vec<usize> = (0..l).filter(|i| w_mask & (1 << i) == 0).collect();
    let mut out = Vec::new();
    let mut odometer = vec![0usize; free.len()];
    loop {
        // Decode: digit d for node free[k] picks the d-th non-self target.
        let mut arrows: Vec<Option<usize>> = vec![None; l];
        for (k, &node) in free.iter().enumerate() {
            let mut targets = (0..l).filter(|&t| t != node);
            arrows[node] = targets.nth(odometer[k]);
        }
        if is_acyclic_kahn(&arrows) {
            out.push(arrows);
        }
        // Advance the odometer.
        let mut pos = 0;
        loop {
            if pos == odometer.len() {
                return out;
            }
            odometer[pos] += 1;
            if odometer[pos] < l - 1 {
                break;
            }
            odometer[pos] = 0;
            pos += 1;
        }
        if free.is_empty() {
            return out;
        }
    }
}

fn is_acyclic_kahn(arrows: &[Option<usize>]) -> bool {
    let l = arrows.len();
    let mut out_deg: Vec<usize> = arrows.iter().map(|a| usize::from(a.is_some())).collect();
    // Peel nodes whose arrow leads nowhere pending; a node is removable
    // when its target is already removed or it has no arrow.
    let mut removed = vec![false; l];
    loop {
        let mut progress = false;
        for i in 0..l {
            if removed[i] {
                continue;
            }
            let ok = match arrows[i] {
                None => true,
                Some(t) => removed[t],
            };
            if ok {
                removed[i] = true;
                if let Some(t) = arrows[i] {
                    out_deg[t] = out_deg[t].saturating_sub(0);
                }
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    removed.iter().all(|&r| r)
}

fn cost_of(vt: &[Vec<f64>], arrows: &[Option<usize>]) -> f64 {
    arrows
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|t| vt[i][t]))
        .sum()
}

fn reaches(arrows: &[Option<usize>], from: usize, to: usize) -> bool {
    // Breadth-first search along arrow edges.
    let mut queue = vec![from];
    let mut seen = vec![false; arrows.len()];
    seen[from] = true;
    while let Some(v) = queue.pop() {
        if v == to {
            return true;
        }
        if let Some(t) = arrows[v] {
            if !seen[t] {
                seen[t] = true;
                queue.push(t);
            }
        }
    }
    false
}

pub fn oracle_min_cost(vt: &[Vec<f64>], l: usize, w_mask: u32) -> f64 {
    oracle_wgraphs(l, w_mask)
        .iter()
        .map(|g| cost_of(vt, g))
        .fold(f64::INFINITY, f64::min)
}

/// `min{Ṽ(g): g ∈ G_{i,j}(W)}`: graphs with an arrow path from i to j.
pub fn oracle_min_cost_reaching(vt: &[Vec<f64>], l: usize, w_mask: u32, i: usize, j: usize) -> f64 {
    oracle_wgraphs(l, w_mask)
        .iter()
        .filter(|g| reaches(g, i, j))
        .map(|g| cost_of(vt, g))
        .fold(f64::INFINITY, f64::min)
}

pub fn oracle_hitting_place(vt: &[Vec<f64>], l: usize, w_mask: u32, i: usize, j: usize) -> f64 {
    oracle_min_cost_reaching(vt, l, w_mask, i, j) - oracle_min_cost(vt, l, w_mask)
}

pub fn oracle_hitting_time(vt: &[Vec<f64>], l: usize, w_mask: u32, i: usize) -> f64 {
    let base = oracle_min_cost(vt, l, w_mask);
    let mut second = oracle_min_cost(vt, l, w_mask | (1 << i));
    for j in 0..l {
        if j != i && w_mask & (1 << j) == 0 {
            second = second.min(oracle_min_cost_reaching(vt, l, w_mask | (1 << j), i, j));
        }
    }
    base - second
}

pub fn oracle_stationary_exponent(vt: &[Vec<f64>], l: usize, i: usize) -> f64 {
    oracle_min_cost(vt, l, 1 << i)
}

/// Per-mask minima tables computed in one enumeration pass per mask:
/// `min_total[mask]` and `min_reach[mask][i][j]` (minimum over graphs in
/// `G(W_mask)` whose arrow path leads from `i` to `j`).
pub struct OracleTables {
    pub min_total: Vec<f64>,
    pub min_reach: Vec<Vec<Vec<f64>>>,
}

pub fn oracle_tables(vt: &[Vec<f64>], l: usize) -> OracleTables {
    let masks = 1usize << l;
    let mut min_total = vec![f64::INFINITY; masks];
    let mut min_reach = vec![vec![vec![f64::INFINITY; l]; l]; masks];
    for mask in 1..masks {
        for graph in oracle_wgraphs(l, mask as u32) {
            let c = cost_of(vt, &graph);
            if c < min_total[mask] {
                min_total[mask] = c;
            }
            for i in 0..l {
                for j in 0..l {
                    if i != j && reaches(&graph, i, j) && c < min_reach[mask][i][j] {
                        min_reach[mask][i][j] = c;
                    }
                }
            }
        }
    }
    OracleTables {
        min_total,
        min_reach,
    }
}

impl OracleTables {
    pub fn hitting_place(&self, mask: u32, i: usize, j: usize) -> f64 {
        self.min_reach[mask as usize][i][j] - self.min_total[mask as usize]
    }

    pub fn hitting_time(&self, l: usize, mask: u32, i: usize) -> f64 {
        let base = self.min_total[mask as usize];
        let mut second = self.min_total[(mask | (1 << i)) as usize];
        for j in 0..l {
            if j != i && mask & (1 << j) == 0 {
                second = second.min(self.min_reach[(mask | (1 << j)) as usize][i][j]);
            }
        }
        base - second
    }

    pub fn w_value(&self, i: usize) -> f64 {
        self.min_total[1usize << i]
    }
}
