//! The quasipotential `V(ν, ξ)` and the constrained costs `Ṽ(K_i, K_j)`.
//!
//! `V(ν, ξ)` is the infimum of the path action over all finite-horizon
//! paths from `ν` to `ξ`. It is computed by shortest-path search on a
//! discretised simplex: nodes are the points of `M_1^M(Z)`, arcs connect
//! lattice points within a small hop radius, and each arc is priced at the
//! straight-segment action minimised over the travel time. `Ṽ(K_i, K_j)`
//! additionally removes lattice nodes near the other attractors, matching
//! the "avoid the other compact sets" constraint.
//!
//! The compact sets entering the cost matrix are the *stable* attractors:
//! saddle points carry no metastable mass and must stay passable, and the
//! graph-theoretic constants downstream are unchanged by dropping them.
//!
//! For two-state models a Hamilton-Jacobi reduction gives the exact value
//! as a one-dimensional integral, used throughout as an oracle: moving up
//! in `x` costs `∫ max(0, g)` with `g(x) = log[x λ10(x) / ((1-x) λ01(x))]`,
//! and `max(0, ·)` automatically zeroes the with-drift sections, so the
//! integral splits at intermediate stable points on its own.

use crate::action::lagrangian;
use crate::dynamics::AttractorSet;
use crate::error::{Error, Result};
use crate::model::{
    lattice_enumerate, lattice_index, lattice_size, LatticeMeasure, Model, SimplexPoint,
};
use crate::numerics::{adaptive_simpson, golden_section_min, GL7};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Travel-time bracket for per-arc optimisation.
const T_MIN: f64 = 1e-3;
const T_MAX: f64 = 1e3;

/// A discretised simplex with priced arcs.
#[derive(Debug, Clone)]
pub struct CostLattice {
    pub resolution: u64,
    points: Vec<Vec<f64>>,
    removed: Vec<bool>,
    arc_offsets: Vec<usize>,
    arc_targets: Vec<u32>,
    arc_costs: Vec<f64>,
}

impl CostLattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.points[node]
    }

    pub fn is_removed(&self, node: usize) -> bool {
        self.removed[node]
    }

    /// Arc cost between two nodes, if the arc exists.
    pub fn arc_cost(&self, from: usize, to: usize) -> Option<f64> {
        let lo = self.arc_offsets[from];
        let hi = self.arc_offsets[from + 1];
        (lo..hi)
            .find(|&k| self.arc_targets[k] as usize == to)
            .map(|k| self.arc_costs[k])
    }

    /// Index of the lattice node nearest to a simplex point.
    pub fn nearest_node(&self, point: &SimplexPoint) -> Result<usize> {
        let m = LatticeMeasure::round_from(point, self.resolution)?;
        Ok(lattice_index(&m) as usize)
    }

    /// Deterministic single-source shortest paths over non-removed nodes.
    fn dijkstra(&self, source: usize, extra_mask: Option<&[bool]>) -> (Vec<f64>, Vec<u32>) {
        let n = self.len();
        let masked = |v: usize| self.removed[v] || extra_mask.map(|m| m[v]).unwrap_or(false);
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![u32::MAX; n];
        if masked(source) {
            return (dist, pred);
        }
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                // Min-heap on cost, ties broken by node id for determinism.
                other
                    .0
                    .partial_cmp(&self.0)
                    .unwrap()
                    .then(other.1.cmp(&self.1))
            }
        }
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for k in self.arc_offsets[v]..self.arc_offsets[v + 1] {
                let w = self.arc_targets[k] as usize;
                if masked(w) {
                    continue;
                }
                let nd = d + self.arc_costs[k];
                if nd < dist[w] {
                    dist[w] = nd;
                    pred[w] = v as u32;
                    heap.push(Entry(nd, w));
                }
            }
        }
        (dist, pred)
    }

    fn recover_path(&self, pred: &[u32], target: usize) -> Vec<SimplexPoint> {
        let mut rev = vec![target];
        let mut v = target;
        while pred[v] != u32::MAX {
            v = pred[v] as usize;
            rev.push(v);
        }
        rev.into_iter()
            .rev()
            .map(|node| SimplexPoint::new(self.points[node].clone()).unwrap())
            .collect()
    }
}

/// Integer displacement vectors with zero sum and total-variation length
/// at most two lattice steps, so composite diagonal moves are included.
fn neighbor_deltas(dim: usize) -> Vec<Vec<i64>> {
    fn rec(cur: &mut Vec<i64>, pos: usize, out: &mut Vec<Vec<i64>>) {
        if pos == cur.len() {
            let sum: i64 = cur.iter().sum();
            let l1: i64 = cur.iter().map(|x| x.abs()).sum();
            if sum == 0 && l1 > 0 && l1 <= 4 {
                out.push(cur.clone());
            }
            return;
        }
        for v in -2..=2i64 {
            cur[pos] = v;
            rec(cur, pos + 1, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0i64; dim];
    rec(&mut cur, 0, &mut out);
    out
}

/// Straight-segment action for fixed travel time, by Gauss-Legendre
/// panels. Segments that drain a coordinate to exactly zero have a
/// logarithmic cost density at the far end; panels shrink geometrically
/// toward it and the integrable tail below width 1e-10 is dropped.
fn segment_action_fixed(model: &Model, from: &[f64], to: &[f64], t_travel: f64) -> f64 {
    let d = from.len();
    let v: Vec<f64> = (0..d).map(|i| (to[i] - from[i]) / t_travel).collect();
    let density = |s: f64| -> f64 {
        let mut p = vec![0.0; d];
        for i in 0..d {
            p[i] = (from[i] + s * (to[i] - from[i])).max(0.0);
        }
        let total: f64 = p.iter().sum();
        for x in &mut p {
            *x /= total;
        }
        match SimplexPoint::new(p).and_then(|sp| lagrangian(model, &sp, &v)) {
            Ok(lv) => lv.value,
            Err(_) => f64::INFINITY,
        }
    };
    let singular_at_1 = (0..d).any(|i| to[i] == 0.0 && from[i] > 0.0);
    let singular_at_0 = (0..d).any(|i| from[i] == 0.0 && to[i] > 0.0);
    let mut panels: Vec<(f64, f64)> = Vec::new();
    let (mut lo, mut hi) = (0.0, 1.0);
    if singular_at_0 {
        let mut edge = 1e-10;
        while edge < 0.26 {
            panels.push((edge, edge * 2.0));
            edge *= 2.0;
        }
        lo = edge;
    }
    let mut upper_panels: Vec<(f64, f64)> = Vec::new();
    if singular_at_1 {
        let mut gap = 1e-10;
        while gap < 0.26 {
            upper_panels.push((1.0 - 2.0 * gap, 1.0 - gap));
            gap *= 2.0;
        }
        hi = 1.0 - gap;
    }
    panels.push((lo, hi));
    upper_panels.reverse();
    panels.extend(upper_panels);
    let mut integral = 0.0;
    for (a, b) in panels {
        if b <= a {
            continue;
        }
        let mut acc = 0.0;
        for (node, weight) in GL7 {
            acc += weight * density(a + node * (b - a));
        }
        integral += acc * (b - a);
    }
    integral * t_travel
}

/// Arc cost: the straight-segment action minimised over the travel time
/// (golden section on `log T`, bracket `[1e-3, 1e3]`).
pub fn arc_cost(model: &Model, from: &[f64], to: &[f64]) -> f64 {
    let f = |log_t: f64| segment_action_fixed(model, from, to, log_t.exp());
    let (_, best) = golden_section_min(&f, T_MIN.ln(), T_MAX.ln(), 1e-8);
    best.max(0.0)
}

/// Build the priced lattice at resolution `M`, removing nodes inside the
/// given forbidden balls (Euclidean, on simplex coordinates).
pub fn build_cost_lattice(
    model: &Model,
    resolution: u64,
    forbidden: &[(SimplexPoint, f64)],
) -> Result<CostLattice> {
    if resolution < 20 {
        return Err(Error::InvalidInput("resolution must be >= 20".into()));
    }
    lattice_size(resolution, model.dim())?;
    let nodes = lattice_enumerate(resolution, model.dim())?;
    let points: Vec<Vec<f64>> = nodes
        .iter()
        .map(|m| m.to_simplex().weights().to_vec())
        .collect();
    let removed: Vec<bool> = points
        .iter()
        .map(|p| {
            forbidden.iter().any(|(center, radius)| {
                let d2: f64 = p
                    .iter()
                    .zip(center.weights())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() <= *radius
            })
        })
        .collect();
    let deltas = neighbor_deltas(model.dim());
    // Price all arcs in parallel; the per-node layout is deterministic.
    let per_node: Vec<(Vec<u32>, Vec<f64>)> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut targets = Vec::new();
            let mut costs = Vec::new();
            if removed[i] {
                return (targets, costs);
            }
            for delta in &deltas {
                let mut ok = true;
                let mut counts = nodes[i].counts().to_vec();
                for (z, &dz) in delta.iter().enumerate() {
                    let c = counts[z] as i64 + dz;
                    if c < 0 || c as u64 > resolution {
                        ok = false;
                        break;
                    }
                    counts[z] = c as u64;
                }
                if !ok {
                    continue;
                }
                let target = lattice_index(&LatticeMeasure::new(counts).unwrap()) as usize;
                if removed[target] {
                    continue;
                }
                targets.push(target as u32);
                costs.push(arc_cost(model, &points[i], &points[target]));
            }
            (targets, costs)
        })
        .collect();
    let mut arc_offsets = Vec::with_capacity(nodes.len() + 1);
    let mut arc_targets = Vec::new();
    let mut arc_costs = Vec::new();
    arc_offsets.push(0);
    for (targets, costs) in per_node {
        arc_targets.extend(targets);
        arc_costs.extend(costs);
        arc_offsets.push(arc_targets.len());
    }
    Ok(CostLattice {
        resolution,
        points,
        removed,
        arc_offsets,
        arc_targets,
        arc_costs,
    })
}

/// Shortest-path quasipotential on a prebuilt lattice.
pub fn quasipotential_on(
    lattice: &CostLattice,
    from: &SimplexPoint,
    to: &SimplexPoint,
) -> Result<(f64, Vec<SimplexPoint>)> {
    let s = lattice.nearest_node(from)?;
    let t = lattice.nearest_node(to)?;
    let (dist, pred) = lattice.dijkstra(s, None);
    if !dist[t].is_finite() {
        return Err(Error::Unreachable(format!(
            " (node {t} from node {s} at resolution {})",
            lattice.resolution
        )));
    }
    Ok((dist[t], lattice.recover_path(&pred, t)))
}

/// `V(ν, ξ)` at resolution `M`, with the polygonal minimising path.
pub fn quasipotential(
    model: &Model,
    from: &SimplexPoint,
    to: &SimplexPoint,
    resolution: u64,
) -> Result<(f64, Vec<SimplexPoint>)> {
    let lattice = build_cost_lattice(model, resolution, &[])?;
    quasipotential_on(&lattice, from, to)
}

/// Pairwise quasipotentials between the stable attractors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    /// `Ṽ(K_i, K_j)`: constrained to avoid the other attractors;
    /// `f64::INFINITY` marks unreachable pairs, the diagonal is zero.
    pub vtilde: Vec<Vec<f64>>,
    /// Unconstrained `V(K_i, K_j)`.
    pub v: Vec<Vec<f64>>,
    /// Attractor locations, index-aligned with the matrices.
    pub locations: Vec<SimplexPoint>,
}

impl CostMatrix {
    pub fn size(&self) -> usize {
        self.vtilde.len()
    }

    pub fn from_vtilde(vtilde: Vec<Vec<f64>>) -> Result<Self> {
        let l = vtilde.len();
        if vtilde.iter().any(|row| row.len() != l) {
            return Err(Error::InvalidInput("cost matrix must be square".into()));
        }
        if l == 0 {
            return Err(Error::InvalidInput("cost matrix must be nonempty".into()));
        }
        for (i, row) in vtilde.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j && (x.is_nan() || x < 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "vtilde[{i}][{j}] = {x} is not a nonnegative cost"
                    )));
                }
            }
        }
        Ok(CostMatrix {
            v: vtilde.clone(),
            vtilde,
            locations: Vec::new(),
        })
    }
}

/// Serialisable form: `null` encodes an unreachable pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostMatrixFile {
    pub schema: String,
    pub vtilde: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<Option<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<Vec<Vec<f64>>>,
}

fn to_opt(matrix: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    matrix
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| if x.is_finite() { Some(x) } else { None })
                .collect()
        })
        .collect()
}

fn from_opt(matrix: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
    matrix
        .iter()
        .map(|row| row.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        .collect()
}

impl CostMatrixFile {
    pub fn from_matrix(m: &CostMatrix) -> Self {
        CostMatrixFile {
            schema: "mfjp/1".into(),
            vtilde: to_opt(&m.vtilde),
            v: Some(to_opt(&m.v)),
            locations: Some(m.locations.iter().map(|p| p.weights().to_vec()).collect()),
        }
    }

    pub fn to_matrix(&self) -> Result<CostMatrix> {
        if self.schema != "mfjp/1" {
            return Err(Error::Format(format!(
                "unsupported schema `{}`",
                self.schema
            )));
        }
        let mut m = CostMatrix::from_vtilde(from_opt(&self.vtilde))?;
        if let Some(v) = &self.v {
            m.v = from_opt(v);
        }
        if let Some(locs) = &self.locations {
            m.locations = locs
                .iter()
                .map(|w| SimplexPoint::new(w.clone()))
                .collect::<Result<_>>()?;
        }
        Ok(m)
    }
}

/// Compute `V` and `Ṽ` between all ordered pairs of stable attractors.
///
/// For each unordered pair, lattice nodes within `rho0` of every *other*
/// stable attractor are masked before the search. `rho0` defaults to one
/// quarter of the minimal pairwise attractor distance.
pub fn vtilde_matrix(
    model: &Model,
    attractors: &AttractorSet,
    resolution: u64,
    rho0: Option<f64>,
) -> Result<CostMatrix> {
    let stable: Vec<SimplexPoint> = attractors
        .stable()
        .iter()
        .map(|a| a.location.clone())
        .collect();
    let l = stable.len();
    if l == 0 {
        return Err(Error::InvalidInput("no stable attractors".into()));
    }
    let min_sep = stable
        .iter()
        .enumerate()
        .flat_map(|(i, a)| stable[i + 1..].iter().map(move |b| a.dist(b)))
        .fold(f64::INFINITY, f64::min);
    let rho0 = rho0.unwrap_or(0.25 * min_sep);
    if l >= 2 && rho0 >= 0.5 * min_sep {
        return Err(Error::InvalidInput(format!(
            "rho0 = {rho0} is not below half the minimal attractor distance {min_sep}"
        )));
    }
    let lattice = build_cost_lattice(model, resolution, &[])?;
    let nodes: Vec<usize> = stable
        .iter()
        .map(|p| lattice.nearest_node(p))
        .collect::<Result<_>>()?;

    let mut v = vec![vec![0.0; l]; l];
    for (i, &src) in nodes.iter().enumerate() {
        let (dist, _) = lattice.dijkstra(src, None);
        for (j, &dst) in nodes.iter().enumerate() {
            if i != j {
                v[i][j] = dist[dst];
            }
        }
    }
    let mut vtilde = vec![vec![0.0; l]; l];
    if l == 2 {
        vtilde = v.clone();
    } else if l > 2 {
        for i in 0..l {
            for j in i + 1..l {
                let mut mask = vec![false; lattice.len()];
                for (k, center) in stable.iter().enumerate() {
                    if k == i || k == j {
                        continue;
                    }
                    for (node, point) in lattice.points.iter().enumerate() {
                        let d2: f64 = point
                            .iter()
                            .zip(center.weights())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        if d2.sqrt() <= rho0 {
                            mask[node] = true;
                        }
                    }
                }
                let (dist_i, _) = lattice.dijkstra(nodes[i], Some(&mask));
                let (dist_j, _) = lattice.dijkstra(nodes[j], Some(&mask));
                vtilde[i][j] = dist_i[nodes[j]];
                vtilde[j][i] = dist_j[nodes[i]];
            }
        }
    }
    Ok(CostMatrix {
        vtilde,
        v,
        locations: stable,
    })
}

/// Exact quasipotential of a plain two-state model along the order
/// parameter `x = xi[up]`, by adaptive quadrature of the Hamilton-Jacobi
/// momentum `g`.
pub fn hj_oracle_1d(model: &Model, x_from: f64, x_to: f64) -> Result<f64> {
    hj_check_model(model)?;
    if !(0.0..=1.0).contains(&x_from) || !(0.0..=1.0).contains(&x_to) {
        return Err(Error::InvalidInput("x must lie in [0, 1]".into()));
    }
    if x_from == x_to {
        return Ok(0.0);
    }
    let g = hj_momentum(model);
    let up = x_to > x_from;
    let (a, b) = if up { (x_from, x_to) } else { (x_to, x_from) };
    // Clip the integrable log singularities at the simplex corners.
    let (a, b) = (a.max(1e-13), b.min(1.0 - 1e-13));
    let integrand = move |x: f64| {
        let v = g(x);
        if up {
            v.max(0.0)
        } else {
            (-v).max(0.0)
        }
    };
    Ok(adaptive_simpson(&integrand, a, b, 1e-11))
}

fn hj_check_model(model: &Model) -> Result<()> {
    if model.dim() != 2 || model.edges() != [(0, 1), (1, 0)] {
        return Err(Error::InvalidInput(
            "the Hamilton-Jacobi oracle needs a plain two-state model".into(),
        ));
    }
    Ok(())
}

/// `g(x) = log[x λ10(x)] - log[(1-x) λ01(x)]`, the nonzero root of the
/// local Hamiltonian in the order parameter.
pub fn hj_momentum(model: &Model) -> impl Fn(f64) -> f64 + '_ {
    move |x: f64| {
        let xi = [1.0 - x, x];
        let l01 = model.edge_rate(0, &xi);
        let l10 = model.edge_rate(1, &xi);
        (x * l10).ln() - ((1.0 - x) * l01).ln()
    }
}
