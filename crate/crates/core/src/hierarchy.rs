//! Graph combinatorics over the attractor cost matrix.
//!
//! Everything here is driven by the pairwise costs `Ṽ(K_i, K_j)`. A
//! W-graph over the index set `L` assigns exactly one outgoing arrow to
//! each index outside `W` with no directed cycles; minimising the summed
//! arrow costs over graph families yields the hitting-probability and
//! hitting-time exponents `I_{i,j}(W)` and `I_i(W)`, the stationary
//! exponents `W(i)`, and the relaxation constant
//!
//! ```text
//! Λ = min{Ṽ(g): g ∈ G(i)} - min{Ṽ(g): g ∈ G(i, j)},
//! ```
//!
//! where `G(i, j)` is read as `G({i, j})`. The cycle hierarchy groups
//! indices into cycles, cycles of cycles, and so on, producing exit costs
//! `Ṽ(π^k)`, internal depths `V̂(π^k)`, the sets `A_k`, the constants
//! `c_k`, and the annealing threshold `c* = max c_k`. The top-level
//! maxima `V_k` along the branch of the most stable index give a second,
//! independent route to Λ; both are computed and must agree.
//!
//! Enumeration is exact and capped at `l <= 8` indices: these families
//! grow factorially and the tool refuses rather than approximating.

use crate::error::{Error, Result};
use crate::model::SimplexPoint;
use crate::quasipotential::CostMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Exact-enumeration cap on the number of attractor indices.
pub const ENUMERATION_CAP: usize = 8;

const LAMBDA_TOL: f64 = 1e-9;

/// A W-graph: one outgoing arrow per index outside `w`, no cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WGraph {
    pub w: BTreeSet<usize>,
    /// `arrows[i] = Some(target)` for `i` outside `w`, `None` inside.
    pub arrows: Vec<Option<usize>>,
}

fn check_cap(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidInput("need at least one index".into()));
    }
    if l > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            requested: l as u64,
            cap: ENUMERATION_CAP as u64,
        });
    }
    Ok(())
}

/// Visit every W-graph once; `arrows[i] = usize::MAX` marks roots.
fn for_each_wgraph(l: usize, w: &BTreeSet<usize>, mut f: impl FnMut(&[usize])) {
    let free: Vec<usize> = (0..l).filter(|i| !w.contains(i)).collect();
    let mut arrows = vec![usize::MAX; l];
    fn acyclic(arrows: &[usize], free: &[usize]) -> bool {
        for &start in free {
            let mut cur = start;
            let mut steps = 0;
            while arrows[cur] != usize::MAX {
                cur = arrows[cur];
                steps += 1;
                if steps > arrows.len() {
                    return false;
                }
            }
        }
        true
    }
    fn rec(
        free: &[usize],
        pos: usize,
        l: usize,
        arrows: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if pos == free.len() {
            if acyclic(arrows, free) {
                f(arrows);
            }
            return;
        }
        let node = free[pos];
        for target in 0..l {
            if target == node {
                continue;
            }
            arrows[node] = target;
            rec(free, pos + 1, l, arrows, f);
        }
        arrows[node] = usize::MAX;
    }
    rec(&free, 0, l, &mut arrows, &mut f);
}

/// Complete, duplicate-free list of W-graphs for the given root set.
pub fn enumerate_wgraphs(l: usize, w: &BTreeSet<usize>) -> Result<Vec<WGraph>> {
    check_cap(l)?;
    if w.iter().any(|&i| i >= l) {
        return Err(Error::InvalidInput(
            "root set references an index >= l".into(),
        ));
    }
    let mut out = Vec::new();
    for_each_wgraph(l, w, |arrows| {
        out.push(WGraph {
            w: w.clone(),
            arrows: arrows
                .iter()
                .map(|&t| if t == usize::MAX { None } else { Some(t) })
                .collect(),
        });
    });
    Ok(out)
}

fn graph_cost(vtilde: &[Vec<f64>], arrows: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &t) in arrows.iter().enumerate() {
        if t != usize::MAX {
            total += vtilde[i][t];
        }
    }
    total
}

/// Terminal root of the unique arrow walk starting at `i`.
fn walk_terminus(arrows: &[usize], mut i: usize) -> usize {
    while arrows[i] != usize::MAX {
        i = arrows[i];
    }
    i
}

/// Exact minimum of `Ṽ(g)` over `G(W)` with an attaining graph.
pub fn min_wgraph_cost(cost: &CostMatrix, w: &BTreeSet<usize>) -> Result<(f64, WGraph)> {
    let l = cost.size();
    check_cap(l)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_wgraph(l, w, |arrows| {
        let c = graph_cost(&cost.vtilde, arrows);
        if c.is_finite() && best.as_ref().map(|(b, _)| c < *b).unwrap_or(true) {
            best = Some((c, arrows.to_vec()));
        }
    });
    match best {
        Some((value, arrows)) => Ok((
            value,
            WGraph {
                w: w.clone(),
                arrows: arrows
                    .iter()
                    .map(|&t| if t == usize::MAX { None } else { Some(t) })
                    .collect(),
            },
        )),
        None => Err(Error::AllInfinite),
    }
}

fn min_cost(vtilde: &[Vec<f64>], l: usize, w: &BTreeSet<usize>) -> f64 {
    let mut best = f64::INFINITY;
    for_each_wgraph(l, w, |arrows| {
        let c = graph_cost(vtilde, arrows);
        if c < best {
            best = c;
        }
    });
    best
}

/// Minimum over graphs in `G(W)` whose walk from `i` terminates at `j`.
fn min_cost_reaching(
    vtilde: &[Vec<f64>],
    l: usize,
    w: &BTreeSet<usize>,
    i: usize,
    j: usize,
) -> f64 {
    let mut best = f64::INFINITY;
    for_each_wgraph(l, w, |arrows| {
        if walk_terminus(arrows, i) == j {
            let c = graph_cost(vtilde, arrows);
            if c < best {
                best = c;
            }
        }
    });
    best
}

/// The Freidlin-Wentzell graph exponents for one root set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwForRootSet {
    pub w: BTreeSet<usize>,
    /// `I_{i,j}(W)` keyed by (i outside W, j inside W).
    pub hitting_place: Vec<(usize, usize, f64)>,
    /// `I_i(W)` keyed by i outside W.
    pub hitting_time: Vec<(usize, f64)>,
}

/// All graph exponents: `I_{i,j}(W)`, `I_i(W)` for every nonempty proper
/// root set, plus the stationary exponents `W(i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwQuantities {
    pub per_root_set: Vec<FwForRootSet>,
    pub w_values: Vec<f64>,
}

impl FwQuantities {
    pub fn hitting_place(&self, w: &BTreeSet<usize>, i: usize, j: usize) -> Option<f64> {
        self.per_root_set
            .iter()
            .find(|f| &f.w == w)?
            .hitting_place
            .iter()
            .find(|(a, b, _)| *a == i && *b == j)
            .map(|(_, _, v)| *v)
    }

    pub fn hitting_time(&self, w: &BTreeSet<usize>, i: usize) -> Option<f64> {
        self.per_root_set
            .iter()
            .find(|f| &f.w == w)?
            .hitting_time
            .iter()
            .find(|(a, _)| *a == i)
            .map(|(_, v)| *v)
    }
}

/// `W(i) = min{Ṽ(g): g ∈ G({i})}` for every index.
pub fn stationary_exponents(cost: &CostMatrix) -> Result<Vec<f64>> {
    let l = cost.size();
    check_cap(l)?;
    Ok((0..l)
        .map(|i| min_cost(&cost.vtilde, l, &BTreeSet::from([i])))
        .collect())
}

/// Compute `I_{i,j}(W)`, `I_i(W)` for all root sets and `W(i)`.
pub fn fw_quantities(cost: &CostMatrix) -> Result<FwQuantities> {
    let l = cost.size();
    check_cap(l)?;
    let vt = &cost.vtilde;
    let mut per_root_set = Vec::new();
    for mask in 1u32..(1 << l) - 1 {
        let w: BTreeSet<usize> = (0..l).filter(|i| mask & (1 << i) != 0).collect();
        let base = min_cost(vt, l, &w);
        let mut hitting_place = Vec::new();
        let mut hitting_time = Vec::new();
        for i in (0..l).filter(|i| !w.contains(i)) {
            for &j in &w {
                let constrained = min_cost_reaching(vt, l, &w, i, j);
                hitting_place.push((i, j, constrained - base));
            }
            // Second minimum: graphs rooted at W ∪ {i}, or rooted at
            // W ∪ {j} with the walk from i ending at j, over j outside W.
            let mut second = {
                let mut wi = w.clone();
                wi.insert(i);
                min_cost(vt, l, &wi)
            };
            for j in (0..l).filter(|j| !w.contains(j) && *j != i) {
                let mut wj = w.clone();
                wj.insert(j);
                second = second.min(min_cost_reaching(vt, l, &wj, i, j));
            }
            hitting_time.push((i, base - second));
        }
        per_root_set.push(FwForRootSet {
            w,
            hitting_place,
            hitting_time,
        });
    }
    Ok(FwQuantities {
        per_root_set,
        w_values: stationary_exponents(cost)?,
    })
}

/// Rate function of the stationary large-deviation principle:
/// `s(ξ) = min_i {W(i) + V(K_i, ξ)} - min_j W(j)`.
pub fn stationary_rate(
    cost: &CostMatrix,
    vfun: impl Fn(usize, &SimplexPoint) -> Result<f64>,
    xi: &SimplexPoint,
) -> Result<f64> {
    let w = stationary_exponents(cost)?;
    let base = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut best = f64::INFINITY;
    for (i, wi) in w.iter().enumerate() {
        let v = vfun(i, xi)?;
        best = best.min(wi + v);
    }
    Ok((best - base).max(0.0))
}

/// One level of the cycle hierarchy. Every element of `L_k` is stored,
/// carried singletons wrapped like cycles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyLevel {
    /// Per element: indices into the previous level (level 0: attractor ids).
    pub members: Vec<Vec<usize>>,
    /// Per element: the attractor indices it ultimately contains.
    pub leaves: Vec<Vec<usize>>,
    /// Whether the element arose as a genuine cycle (vs carried over).
    pub is_cycle: Vec<bool>,
    /// Exit costs `Ṽ(π^k)`; `None` once the level is a singleton.
    pub exit_cost: Vec<Option<f64>>,
    /// Internal depth `V̂(π^k)` (zero at level 0).
    pub depth: Vec<f64>,
    /// Set-valued most-likely-exit arrows (all minimisers kept).
    pub arrows: Vec<Vec<usize>>,
}

/// Full output of the hierarchy construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyReport {
    /// Echo of the driving costs (`None` = unreachable).
    pub vtilde: Vec<Vec<Option<f64>>>,
    pub w_values: Vec<f64>,
    /// Λ from the W-graph formula.
    pub lambda: f64,
    /// Λ from the cycle-hierarchy maxima `V_k`.
    pub lambda_cross_check: f64,
    pub lambda_agreement: bool,
    /// Smallest k with `L_{k+1}` a singleton.
    pub m: usize,
    pub levels: Vec<HierarchyLevel>,
    /// `A_k` flattened to attractor indices, k = 0..=m.
    pub a_sets: Vec<Vec<usize>>,
    /// `c_k`, k = 0..=m.
    pub c_values: Vec<f64>,
    pub c_star: f64,
    /// Minimisers of `W(i)`.
    pub l_tilde_0: Vec<usize>,
    /// The claim `A_0 = L̃_0`, checked.
    pub a0_equals_l_tilde_0: bool,
}

/// Λ by the W-graph formula together with the hierarchy cross-check.
/// Disagreement beyond `1e-9` is a bug signal and reported as an error.
pub fn lambda_constant(cost: &CostMatrix) -> Result<HierarchyReport> {
    build_cycle_hierarchy(cost)
}

/// Construct the full cycle hierarchy and the derived constants.
pub fn build_cycle_hierarchy(cost: &CostMatrix) -> Result<HierarchyReport> {
    let l = cost.size();
    check_cap(l)?;
    let vt = &cost.vtilde;
    let w_values = stationary_exponents(cost)?;
    let w_min = w_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_tilde_0: Vec<usize> = (0..l)
        .filter(|&i| (w_values[i] - w_min).abs() <= LAMBDA_TOL)
        .collect();

    // Level 0.
    let mut levels = vec![HierarchyLevel {
        members: (0..l).map(|i| vec![i]).collect(),
        leaves: (0..l).map(|i| vec![i]).collect(),
        is_cycle: vec![false; l],
        exit_cost: vec![None; l],
        depth: vec![0.0; l],
        arrows: vec![Vec::new(); l],
    }];
    let mut pair_cost: Vec<Vec<f64>> = vt.clone();

    if l == 1 {
        // Degenerate hierarchy: a single attractor, nothing to climb.
        return Ok(HierarchyReport {
            vtilde: vt
                .iter()
                .map(|row| row.iter().map(|&x| x.is_finite().then_some(x)).collect())
                .collect(),
            w_values,
            lambda: 0.0,
            lambda_cross_check: 0.0,
            lambda_agreement: true,
            m: 0,
            levels,
            a_sets: vec![vec![0]],
            c_values: vec![0.0],
            c_star: 0.0,
            l_tilde_0,
            a0_equals_l_tilde_0: true,
        });
    }

    // Climb until a level has a single element.
    loop {
        let n = levels.last().unwrap().members.len();
        if n == 1 {
            break;
        }
        if levels.len() > l + 1 {
            return Err(Error::NonConvergent(
                "cycle hierarchy failed to terminate".into(),
            ));
        }
        // Exit costs and set-valued arrows at the current level.
        let mut exit = vec![f64::INFINITY; n];
        let mut arrows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, row) in pair_cost.iter().enumerate() {
            for (b, &cost) in row.iter().enumerate() {
                if a != b && cost < exit[a] {
                    exit[a] = cost;
                }
            }
            if !exit[a].is_finite() {
                return Err(Error::AllInfinite);
            }
            for (b, &cost) in row.iter().enumerate() {
                if a != b && cost == exit[a] {
                    arrows[a].push(b);
                }
            }
        }
        {
            let top = levels.last_mut().unwrap();
            top.exit_cost = exit.iter().map(|&x| Some(x)).collect();
            top.arrows = arrows.clone();
        }
        // Reachability closure of the arrow relation.
        let mut reach = vec![vec![false; n]; n];
        for (a, out) in arrows.iter().enumerate() {
            for &b in out {
                reach[a][b] = true;
            }
        }
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if reach[a][k] && reach[k][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
        // Cycles are the sink strongly-connected classes: mutually
        // reachable and closed under the arrow relation.
        let mut assigned = vec![usize::MAX; n];
        let mut groups: Vec<(Vec<usize>, bool)> = Vec::new();
        for a in 0..n {
            if assigned[a] != usize::MAX {
                continue;
            }
            let class: Vec<usize> = (0..n)
                .filter(|&b| a == b || (reach[a][b] && reach[b][a]))
                .collect();
            let closed = class
                .iter()
                .all(|&b| (0..n).all(|c| !reach[b][c] || class.contains(&c)));
            if closed && class.len() >= 2 {
                for &b in &class {
                    assigned[b] = groups.len();
                }
                groups.push((class, true));
            } else {
                assigned[a] = groups.len();
                groups.push((vec![a], false));
            }
        }
        // Deterministic ordering by smallest contained attractor index.
        let prev_leaves = levels.last().unwrap().leaves.clone();
        groups.sort_by_key(|(members, _)| {
            members
                .iter()
                .flat_map(|&m| prev_leaves[m].iter().cloned())
                .min()
                .unwrap()
        });
        let depth: Vec<f64> = groups
            .iter()
            .map(|(members, _)| {
                members
                    .iter()
                    .map(|&m| exit[m])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        // Pairwise costs at the new level.
        let gn = groups.len();
        let mut new_pair = vec![vec![f64::INFINITY; gn]; gn];
        for (ga, (members_a, _)) in groups.iter().enumerate() {
            for (gb, (members_b, _)) in groups.iter().enumerate() {
                if ga == gb {
                    new_pair[ga][gb] = 0.0;
                    continue;
                }
                let mut inner = f64::INFINITY;
                for &a in members_a {
                    for &b in members_b {
                        let delta = pair_cost[a][b] - exit[a];
                        if delta < inner {
                            inner = delta;
                        }
                    }
                }
                new_pair[ga][gb] = depth[ga] + inner;
            }
        }
        let leaves: Vec<Vec<usize>> = groups
            .iter()
            .map(|(members, _)| {
                let mut ls: Vec<usize> = members
                    .iter()
                    .flat_map(|&m| prev_leaves[m].iter().cloned())
                    .collect();
                ls.sort_unstable();
                ls
            })
            .collect();
        levels.push(HierarchyLevel {
            members: groups.iter().map(|(m, _)| m.clone()).collect(),
            leaves,
            is_cycle: groups.iter().map(|(_, c)| *c).collect(),
            exit_cost: vec![None; gn],
            depth,
            arrows: vec![Vec::new(); gn],
        });
        pair_cost = new_pair;
    }

    let m = levels.len() - 2;

    // A_k sets, top down. A_{m+1} is the singleton top level.
    let mut a_sets_elements: Vec<Vec<usize>> = vec![Vec::new(); levels.len()];
    a_sets_elements[m + 1] = vec![0];
    for k in (0..=m).rev() {
        let upper = &levels[k + 1];
        let lower = &levels[k];
        let mut set = BTreeSet::new();
        for &e in &a_sets_elements[k + 1] {
            for &member in &upper.members[e] {
                let exit = lower.exit_cost[member].expect("non-top levels have exit costs");
                if (exit - upper.depth[e]).abs() <= LAMBDA_TOL {
                    set.insert(member);
                }
            }
        }
        a_sets_elements[k] = set.into_iter().collect();
    }
    // c_k constants: over elements of A_{k+1}, the largest exit cost of a
    // member left out of A_k(element); zero when none are left out.
    let mut c_values = vec![0.0; m + 1];
    for (k, ck_out) in c_values.iter_mut().enumerate() {
        let upper = &levels[k + 1];
        let lower = &levels[k];
        let mut ck = 0.0f64;
        for &e in &a_sets_elements[k + 1] {
            let mut ce = 0.0f64;
            for &member in &upper.members[e] {
                let exit = lower.exit_cost[member].unwrap();
                if (exit - upper.depth[e]).abs() > LAMBDA_TOL {
                    ce = ce.max(exit);
                }
            }
            ck = ck.max(ce);
        }
        *ck_out = ck;
    }
    let c_star = c_values.iter().cloned().fold(0.0f64, f64::max);

    // Λ from W-graphs.
    let mut lambda = w_min;
    {
        let mut pair_min = f64::INFINITY;
        for i in 0..l {
            for j in i + 1..l {
                pair_min = pair_min.min(min_cost(vt, l, &BTreeSet::from([i, j])));
            }
        }
        lambda -= pair_min;
    }
    // Λ from the hierarchy: V_k maxima along the branch of i_0.
    let i0 = l_tilde_0[0];
    let mut lambda_cross = 0.0f64;
    for k in 0..=m {
        let lower = &levels[k];
        let upper = &levels[k + 1];
        let pi0_low = (0..lower.members.len())
            .find(|&e| lower.leaves[e].contains(&i0))
            .unwrap();
        let pi0_up = (0..upper.members.len())
            .find(|&e| upper.leaves[e].contains(&i0))
            .unwrap();
        for &member in &upper.members[pi0_up] {
            if member != pi0_low {
                lambda_cross = lambda_cross.max(lower.exit_cost[member].unwrap());
            }
        }
    }
    let lambda_agreement = (lambda - lambda_cross).abs() <= LAMBDA_TOL;
    if !lambda_agreement {
        return Err(Error::LambdaDisagreement {
            graph: lambda,
            hierarchy: lambda_cross,
        });
    }

    let a_sets: Vec<Vec<usize>> = a_sets_elements[0..=m]
        .iter()
        .enumerate()
        .map(|(k, elems)| {
            let mut leaves: Vec<usize> = elems
                .iter()
                .flat_map(|&e| levels[k].leaves[e].iter().cloned())
                .collect();
            leaves.sort_unstable();
            leaves.dedup();
            leaves
        })
        .collect();
    let a0_equals_l_tilde_0 = a_sets[0] == l_tilde_0;

    Ok(HierarchyReport {
        vtilde: vt
            .iter()
            .map(|row| row.iter().map(|&x| x.is_finite().then_some(x)).collect())
            .collect(),
        w_values,
        lambda,
        lambda_cross_check: lambda_cross,
        lambda_agreement,
        m,
        levels,
        a_sets,
        c_values,
        c_star,
        l_tilde_0,
        a0_equals_l_tilde_0,
    })
}

impl HierarchyReport {
    /// Indented text rendering of the cycle tree.
    pub fn render_tree(&self) -> String {
        fn rec(
            report: &HierarchyReport,
            level: usize,
            element: usize,
            indent: usize,
            out: &mut String,
        ) {
            let lv = &report.levels[level];
            let pad = "  ".repeat(indent);
            let kind = if level == 0 {
                "attractor".to_string()
            } else if lv.is_cycle[element] {
                format!("{level}-cycle")
            } else {
                "carried".to_string()
            };
            let exit = match lv.exit_cost[element] {
                Some(v) => format!("{v:.6}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{pad}{kind} leaves={:?} exit={exit} depth={:.6}\n",
                lv.leaves[element], lv.depth[element]
            ));
            if level > 0 {
                for &member in &lv.members[element] {
                    rec(report, level - 1, member, indent + 1, out);
                }
            }
        }
        let mut out = String::new();
        let top = self.levels.len() - 1;
        for e in 0..self.levels[top].members.len() {
            rec(self, top, e, 0, &mut out);
        }
        out
    }
}
