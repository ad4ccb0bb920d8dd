//! State spaces, transition graphs, mean-field rate functions, and the
//! lattice of empirical measures.
//!
//! A model is a finite set of states `Z`, an irreducible digraph of allowed
//! transitions `E`, and one rate expression per edge giving the jump rate
//! of a single particle as a function of the empirical measure. Validation
//! checks strong connectivity and samples every rate over a lattice grid to
//! certify positive bounds `0 < c <= rate <= C`; Lipschitz continuity of
//! custom expressions is the user's responsibility and is not checked.

use crate::error::{Error, Result};
use crate::expr::RateExpr;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Cap on the number of lattice points enumerated or used as a generator
/// dimension; keeps exact spectral work in memory at desk scale.
pub const LATTICE_CAP: u64 = 5_000_000;

/// Tolerance for the simplex sum-to-one invariant.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Ordered list of state names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidModel("need at least two states".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::InvalidModel(format!("duplicate state label `{a}`")));
            }
        }
        Ok(StateSpace { labels })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }
}

/// Directed edge set over state indices; no self loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionGraph {
    edges: Vec<(usize, usize)>,
}

impl TransitionGraph {
    pub fn new(dim: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::InvalidModel(format!("self loop on state {a}")));
            }
            if a >= dim || b >= dim {
                return Err(Error::InvalidModel(format!(
                    "edge ({a},{b}) references a state outside 0..{dim}"
                )));
            }
        }
        Ok(TransitionGraph { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Strong connectivity of the digraph (assumption that every state can
    /// reach every other through allowed transitions).
    pub fn is_irreducible(&self, dim: usize) -> bool {
        let reach = |forward: bool| -> usize {
            let mut seen = vec![false; dim];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(v) = stack.pop() {
                for &(a, b) in &self.edges {
                    let (from, to) = if forward { (a, b) } else { (b, a) };
                    if from == v && !seen[to] {
                        seen[to] = true;
                        count += 1;
                        stack.push(to);
                    }
                }
            }
            count
        };
        dim > 0 && reach(true) == dim && reach(false) == dim
    }
}

/// A probability vector over the states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    /// Build from nonnegative weights summing to one within `1e-12`;
    /// the stored vector is renormalised to guard drift in integrators.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        let mut w = weights;
        let mut sum = 0.0;
        for x in &mut w {
            if *x < 0.0 {
                if *x < -SIMPLEX_TOL {
                    return Err(Error::InvalidInput(format!("negative weight {x}")));
                }
                *x = 0.0;
            }
            sum += *x;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {sum}, not 1 within {SIMPLEX_TOL}"
            )));
        }
        for x in &mut w {
            *x /= sum;
        }
        Ok(SimplexPoint { weights: w })
    }

    /// Uniform distribution.
    pub fn uniform(dim: usize) -> Self {
        SimplexPoint {
            weights: vec![1.0 / dim as f64; dim],
        }
    }

    /// Point mass on one state.
    pub fn dirac(dim: usize, state: usize) -> Self {
        let mut w = vec![0.0; dim];
        w[state] = 1.0;
        SimplexPoint { weights: w }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Euclidean distance to another point.
    pub fn dist(&self, other: &SimplexPoint) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A point of `M_1^N(Z)`: integer counts summing to `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeMeasure {
    counts: Vec<u64>,
    n: u64,
}

impl LatticeMeasure {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput(
                "lattice measure needs at least one particle".into(),
            ));
        }
        Ok(LatticeMeasure { counts, n })
    }

    /// Nearest lattice point to a simplex point (largest-remainder rounding).
    pub fn round_from(point: &SimplexPoint, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("N must be positive".into()));
        }
        let scaled: Vec<f64> = point.weights().iter().map(|w| w * n as f64).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
        let mut short = n - counts.iter().sum::<u64>();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            counts[i] += 1;
            short -= 1;
        }
        Ok(LatticeMeasure { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn to_simplex(&self) -> SimplexPoint {
        SimplexPoint {
            weights: self
                .counts
                .iter()
                .map(|&c| c as f64 / self.n as f64)
                .collect(),
        }
    }
}

/// Dense rate matrix `Λ_ξ` at a fixed simplex point.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    entries: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// Result of model validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub irreducible: bool,
    /// Smallest rate observed over the validation grid.
    pub c_lower: f64,
    /// Largest rate observed over the validation grid.
    pub c_upper: f64,
    pub grid_resolution: u64,
}

/// A complete mean-field model.
#[derive(Debug, Clone)]
pub struct Model {
    name: String,
    space: StateSpace,
    graph: TransitionGraph,
    rates: Vec<RateExpr>, // indexed like graph.edges()
}

impl Model {
    pub fn new(
        name: &str,
        space: StateSpace,
        graph: TransitionGraph,
        rates_by_edge: BTreeMap<(usize, usize), RateExpr>,
    ) -> Result<Self> {
        let mut rates = Vec::with_capacity(graph.edges().len());
        for e in graph.edges() {
            match rates_by_edge.get(e) {
                Some(r) => rates.push(r.clone()),
                None => {
                    return Err(Error::InvalidModel(format!(
                        "edge ({}, {}) has no rate",
                        space.labels()[e.0],
                        space.labels()[e.1]
                    )))
                }
            }
        }
        if rates_by_edge.len() != graph.edges().len() {
            return Err(Error::InvalidModel(
                "rates given for edges not in the graph".into(),
            ));
        }
        Ok(Model {
            name: name.to_string(),
            space,
            graph,
            rates,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn graph(&self) -> &TransitionGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        self.graph.edges()
    }

    /// Rate of edge `k` (in `edges()` order) at simplex coordinates `xi`.
    #[inline]
    pub fn edge_rate(&self, k: usize, xi: &[f64]) -> f64 {
        self.rates[k].eval(xi)
    }

    pub fn rate_expr(&self, k: usize) -> &RateExpr {
        &self.rates[k]
    }

    /// The rate matrix `Λ_ξ`: off-diagonal `λ_{z,z'}(ξ)` on edges, zero
    /// elsewhere, diagonal set so each row sums to zero.
    pub fn rate_matrix(&self, xi: &SimplexPoint) -> Result<RateMatrix> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (k, &(a, b)) in self.edges().iter().enumerate() {
            let r = self.edge_rate(k, xi.weights());
            if !r.is_finite() {
                return Err(Error::RateOutOfBounds {
                    edge: self.edge_name(k),
                    point: format!("{:?}", xi.weights()),
                    value: r,
                });
            }
            m[a][b] = r;
        }
        for (z, row) in m.iter_mut().enumerate() {
            let s: f64 = row.iter().sum();
            row[z] = -(s - row[z]);
        }
        Ok(RateMatrix { entries: m })
    }

    pub fn edge_name(&self, k: usize) -> String {
        let (a, b) = self.edges()[k];
        format!("{}->{}", self.space.labels()[a], self.space.labels()[b])
    }

    /// Validate assumptions: irreducibility, and positive finite rate
    /// bounds sampled over the lattice grid `M_1^resolution(Z)`.
    pub fn validate(&self, grid_resolution: u64) -> Result<ValidationReport> {
        if grid_resolution < 10 {
            return Err(Error::InvalidInput("grid resolution must be >= 10".into()));
        }
        if !self.graph.is_irreducible(self.dim()) {
            return Err(Error::NotIrreducible);
        }
        let grid = lattice_enumerate(grid_resolution, self.dim())?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for point in &grid {
            let xi = point.to_simplex();
            for k in 0..self.edges().len() {
                let r = self.edge_rate(k, xi.weights());
                if !r.is_finite() || r <= 0.0 {
                    return Err(Error::RateOutOfBounds {
                        edge: self.edge_name(k),
                        point: format!("{:?}", xi.weights()),
                        value: r,
                    });
                }
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok(ValidationReport {
            irreducible: true,
            c_lower: lo,
            c_upper: hi,
            grid_resolution,
        })
    }
}

/// Complete lexicographic enumeration of `M_1^N(Z)` as count vectors.
pub fn lattice_enumerate(n: u64, dim: usize) -> Result<Vec<LatticeMeasure>> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    if dim < 1 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let size = lattice_size(n, dim)?;
    let mut out = Vec::with_capacity(size as usize);
    let mut counts = vec![0u64; dim];
    fill(&mut out, &mut counts, 0, n);
    debug_assert_eq!(out.len() as u64, size);
    return Ok(out);

    fn fill(out: &mut Vec<LatticeMeasure>, counts: &mut Vec<u64>, pos: usize, remaining: u64) {
        if pos == counts.len() - 1 {
            counts[pos] = remaining;
            out.push(LatticeMeasure {
                counts: counts.clone(),
                n: counts.iter().sum(),
            });
            return;
        }
        for v in 0..=remaining {
            counts[pos] = v;
            fill(out, counts, pos + 1, remaining - v);
        }
        counts[pos] = 0;
    }
}

/// `|M_1^N(Z)| = C(N + d - 1, d - 1)`, checked against the enumeration cap.
pub fn lattice_size(n: u64, dim: usize) -> Result<u64> {
    let mut size: u64 = 1;
    for k in 1..dim as u64 {
        size = size.checked_mul(n + k).ok_or(Error::CapExceeded {
            requested: u64::MAX,
            cap: LATTICE_CAP,
        })? / k;
    }
    if size > LATTICE_CAP {
        return Err(Error::CapExceeded {
            requested: size,
            cap: LATTICE_CAP,
        });
    }
    Ok(size)
}

/// Lexicographic rank of a count vector within `lattice_enumerate(n, dim)`.
pub fn lattice_index(measure: &LatticeMeasure) -> u64 {
    let counts = measure.counts();
    let dim = counts.len();
    let mut rank: u64 = 0;
    let mut remaining = measure.n();
    for (pos, &c) in counts.iter().enumerate().take(dim - 1) {
        let parts_left = (dim - pos - 1) as u64;
        // Vectors with a smaller value at this position come first.
        for v in 0..c {
            rank += compositions(remaining - v, parts_left);
        }
        remaining -= c;
    }
    rank
}

/// Number of compositions of `n` into `k` nonnegative parts.
fn compositions(n: u64, k: u64) -> u64 {
    // C(n + k - 1, k - 1); k is small (< |Z|), so the product form is safe.
    let mut r: u64 = 1;
    for i in 1..k {
        r = r * (n + i) / i;
    }
    r
}

/// Built-in model catalog.
pub mod catalog {
    use super::*;

    fn two_state(name: &str, rate_up: &str, rate_down: &str, params: &[(&str, f64)]) -> Model {
        let space = StateSpace::new(vec!["down".into(), "up".into()]).unwrap();
        let graph = TransitionGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let pm: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let mut rates = BTreeMap::new();
        rates.insert(
            (0usize, 1usize),
            RateExpr::parse(rate_up, space.labels(), &pm).unwrap(),
        );
        rates.insert(
            (1usize, 0usize),
            RateExpr::parse(rate_down, space.labels(), &pm).unwrap(),
        );
        Model::new(name, space, graph, rates).unwrap()
    }

    /// Non-interacting two-state model: constant rates `a` (down to up)
    /// and `b` (up to down). Defaults a = 1, b = 2.
    pub fn nonint(a: f64, b: f64) -> Model {
        two_state("nonint", "a", "b", &[("a", a), ("b", b)])
    }

    /// Curie-Weiss-type two-state model with inverse temperature `beta`
    /// and external field `h`; the order parameter is `x = xi[up]`.
    /// Bistable for beta above 1 at h = 0.
    pub fn curie_weiss(beta: f64, h: f64) -> Model {
        two_state(
            "cw",
            "exp(beta*(2*xi[up]-1) + h)",
            "exp(-beta*(2*xi[up]-1) - h)",
            &[("beta", beta), ("h", h)],
        )
    }

    /// Three-state directed cycle with rates `a + b*xi[next]`; a simple
    /// non-reversible example.
    pub fn cycle3(a: f64, b: f64) -> Model {
        let space = StateSpace::new(vec!["s0".into(), "s1".into(), "s2".into()]).unwrap();
        let graph = TransitionGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let pm: BTreeMap<String, f64> = [("a".to_string(), a), ("b".to_string(), b)]
            .into_iter()
            .collect();
        let mut rates = BTreeMap::new();
        for (from, to) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let text = format!("a + b*xi[s{to}]");
            rates.insert(
                (from, to),
                RateExpr::parse(&text, space.labels(), &pm).unwrap(),
            );
        }
        Model::new("cyc3", space, graph, rates).unwrap()
    }

    /// Two-state model with a cubic mean-field term giving three stable
    /// wells for suitable `(beta, gamma)`; `tilt` breaks the symmetry.
    pub fn triple_well(beta: f64, gamma: f64, tilt: f64) -> Model {
        let p = "(beta*(2*xi[up]-1) + gamma*(2*xi[up]-1)*(2*xi[up]-1)*(2*xi[up]-1) + h)";
        two_state(
            "triple-well",
            &format!("exp({p})"),
            &format!("exp(-{p})"),
            &[("beta", beta), ("gamma", gamma), ("h", tilt)],
        )
    }

    /// Look up a catalog model by name with default parameters.
    pub fn by_name(name: &str) -> Option<Model> {
        match name {
            "nonint" => Some(nonint(1.0, 2.0)),
            "cw" | "cw-symmetric" => Some(curie_weiss(1.5, 0.0)),
            "cw-asymmetric" => Some(curie_weiss(1.5, 0.1)),
            "cyc3" => Some(cycle3(1.0, 1.0)),
            "triple-well" => Some(triple_well(0.5, 1.5, 0.0)),
            _ => None,
        }
    }
}

/// JSON model file schema (`"schema": "mfjp/1"`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub name: String,
    pub states: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub rates: BTreeMap<String, String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelFile {
    pub fn to_model(&self) -> Result<Model> {
        if self.schema != "mfjp/1" {
            return Err(Error::Format(format!(
                "unsupported schema `{}` (expected mfjp/1)",
                self.schema
            )));
        }
        let space = StateSpace::new(self.states.clone())?;
        let mut edges = Vec::new();
        for [a, b] in &self.edges {
            edges.push((space.index_of(a)?, space.index_of(b)?));
        }
        let graph = TransitionGraph::new(space.dim(), edges)?;
        let mut rates = BTreeMap::new();
        for (key, text) in &self.rates {
            let (a, b) = key
                .split_once("->")
                .ok_or_else(|| Error::Format(format!("rate key `{key}` is not `from->to`")))?;
            let edge = (space.index_of(a.trim())?, space.index_of(b.trim())?);
            rates.insert(edge, RateExpr::parse(text, space.labels(), &self.params)?);
        }
        Model::new(&self.name, space, graph, rates)
    }

    pub fn from_model(model: &Model) -> Self {
        let labels = model.space().labels();
        ModelFile {
            schema: "mfjp/1".into(),
            name: model.name().to_string(),
            states: labels.to_vec(),
            edges: model
                .edges()
                .iter()
                .map(|&(a, b)| [labels[a].clone(), labels[b].clone()])
                .collect(),
            rates: model
                .edges()
                .iter()
                .enumerate()
                .map(|(k, _)| (model.edge_name(k), model.rate_expr(k).source().to_string()))
                .collect(),
            params: BTreeMap::new(),
        }
    }
}

/// Parse a model from JSON text.
pub fn model_from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.to_model()
}
