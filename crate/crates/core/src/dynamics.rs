//! The limiting mean-field ODE and its attractors.
//!
//! As the particle count grows, the empirical measure tracks the solution
//! of `dμ/dt = Λ*_μ μ`. This module integrates that flow, locates its
//! fixed points by multi-start search with Newton polishing, classifies
//! their stability from the Jacobian restricted to the simplex tangent
//! space, and assigns basins of attraction. Only point attractors are
//! supported: a trajectory that refuses to settle raises
//! `LimitCycleSuspected` instead of mislabelling.

use crate::error::{Error, Result};
use crate::model::{Model, SimplexPoint};
use crate::numerics::tangent_basis;
use crate::rng::Stream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Drift norm below which a point counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Deduplication radius for fixed points.
pub const MERGE_RADIUS: f64 = 1e-6;

/// Finite-difference step for the Jacobian of the drift.
const JACOBIAN_STEP: f64 = 1e-6;

/// Vector field of the mean-field ODE: `drift(ξ) = Λ*_ξ ξ`.
///
/// Components sum to zero (mass conservation).
pub fn drift(model: &Model, xi: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; xi.len()];
    for (k, &(from, to)) in model.edges().iter().enumerate() {
        let flow = xi[from] * model.edge_rate(k, xi);
        b[from] -= flow;
        b[to] += flow;
    }
    b
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// A solution path of the mean-field ODE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowPath {
    pub times: Vec<f64>,
    pub points: Vec<SimplexPoint>,
    /// Drift infinity-norm at the terminal point.
    pub terminal_drift_norm: f64,
}

impl FlowPath {
    pub fn terminal(&self) -> &SimplexPoint {
        self.points.last().unwrap()
    }
}

/// Integrate the mean-field ODE with the classical fourth-order scheme,
/// renormalising onto the simplex after every step.
pub fn mve_flow(model: &Model, start: &SimplexPoint, t_max: f64, dt: f64) -> Result<FlowPath> {
    if dt <= 0.0 || t_max < dt {
        return Err(Error::InvalidInput("need dt > 0 and t_max >= dt".into()));
    }
    let mut times = vec![0.0];
    let mut points = vec![start.clone()];
    let mut x = start.weights().to_vec();
    let n_steps = (t_max / dt).round() as usize;
    let mut t = 0.0;
    for _ in 0..n_steps {
        x = rk4_step(model, &x, dt, t)?;
        t += dt;
        times.push(t);
        points.push(SimplexPoint::new(x.clone())?);
    }
    let terminal_drift_norm = inf_norm(&drift(model, &x));
    Ok(FlowPath {
        times,
        points,
        terminal_drift_norm,
    })
}

fn rk4_step(model: &Model, x: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let k1 = drift(model, x);
    let mut tmp = vec![0.0; d];
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    let k2 = drift(model, &tmp);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    let k3 = drift(model, &tmp);
    for i in 0..d {
        tmp[i] = x[i] + dt * k3[i];
    }
    let k4 = drift(model, &tmp);
    let mut y = vec![0.0; d];
    let mut violation = 0.0f64;
    let mut sum = 0.0;
    for i in 0..d {
        y[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if y[i] < 0.0 {
            violation = violation.max(-y[i]);
            y[i] = 0.0;
        }
        sum += y[i];
    }
    violation = violation.max((sum - 1.0).abs());
    if violation > 1e-9 {
        return Err(Error::StepRejected { t, violation });
    }
    for v in &mut y {
        *v /= sum;
    }
    Ok(y)
}

/// Stability class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
}

/// A classified fixed point of the mean-field ODE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attractor {
    pub index: usize,
    pub location: SimplexPoint,
    pub stability: Stability,
    /// Eigenvalues of the tangent-space Jacobian as (re, im) pairs.
    pub jacobian_spectrum: Vec<(f64, f64)>,
}

/// The fixed points found by multi-start search, in deterministic order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractorSet {
    pub attractors: Vec<Attractor>,
    /// Starts that neither converged under the flow nor under Newton.
    pub unsettled_starts: Vec<usize>,
}

impl AttractorSet {
    pub fn stable(&self) -> Vec<&Attractor> {
        self.attractors
            .iter()
            .filter(|a| a.stability == Stability::Stable)
            .collect()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.attractors.iter().enumerate() {
            for b in &self.attractors[i + 1..] {
                best = best.min(a.location.dist(&b.location));
            }
        }
        best
    }
}

/// Jacobian of the drift restricted to the tangent space, by central
/// finite differences along an orthonormal tangent basis.
pub fn tangent_jacobian(model: &Model, xi: &[f64]) -> DMatrix<f64> {
    let d = xi.len();
    let q = tangent_basis(d);
    let k = d - 1;
    let mut j = DMatrix::zeros(k, k);
    for (col, qc) in q.iter().enumerate() {
        let mut plus = xi.to_vec();
        let mut minus = xi.to_vec();
        for i in 0..d {
            plus[i] += JACOBIAN_STEP * qc[i];
            minus[i] -= JACOBIAN_STEP * qc[i];
        }
        let bp = drift(model, &plus);
        let bm = drift(model, &minus);
        for (row, qr) in q.iter().enumerate() {
            let mut v = 0.0;
            for i in 0..d {
                v += qr[i] * (bp[i] - bm[i]);
            }
            j[(row, col)] = v / (2.0 * JACOBIAN_STEP);
        }
    }
    j
}

/// Newton iteration for `drift = 0` in tangent coordinates. Returns the
/// polished point when the drift norm falls below `FIXED_POINT_TOL`.
fn newton_polish(model: &Model, start: &[f64]) -> Option<Vec<f64>> {
    let d = start.len();
    let q = tangent_basis(d);
    let mut x = start.to_vec();
    for _ in 0..80 {
        let b = drift(model, &x);
        if inf_norm(&b) <= FIXED_POINT_TOL * 0.5 {
            return Some(x);
        }
        let j = tangent_jacobian(model, &x);
        let mut f = DVector::zeros(d - 1);
        for (row, qr) in q.iter().enumerate() {
            f[row] = qr.iter().zip(&b).map(|(a, c)| a * c).sum();
        }
        let step = j.lu().solve(&(-f))?;
        // Damped update, clipped to the simplex.
        let mut t = 1.0;
        loop {
            let mut y = x.clone();
            for i in 0..d {
                for (col, qc) in q.iter().enumerate() {
                    y[i] += t * step[col] * qc[i];
                }
            }
            if y.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)) {
                let ynorm = inf_norm(&drift(model, &y));
                if ynorm < inf_norm(&b) || t < 1e-4 {
                    for v in &mut y {
                        *v = v.max(0.0);
                    }
                    let s: f64 = y.iter().sum();
                    for v in &mut y {
                        *v /= s;
                    }
                    x = y;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-8 {
                return None;
            }
        }
    }
    let b = drift(model, &x);
    if inf_norm(&b) <= FIXED_POINT_TOL {
        Some(x)
    } else {
        None
    }
}

/// Classify a fixed point; near-marginal spectra fall back to a flow probe.
fn classify(model: &Model, xi: &[f64]) -> (Stability, Vec<(f64, f64)>) {
    let j = tangent_jacobian(model, xi);
    let eigs = j.complex_eigenvalues();
    let spectrum: Vec<(f64, f64)> = eigs.iter().map(|c| (c.re, c.im)).collect();
    let max_re = spectrum
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_re = spectrum.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let stability = if max_re < -FIXED_POINT_TOL {
        Stability::Stable
    } else if max_re > FIXED_POINT_TOL {
        if min_re < -FIXED_POINT_TOL && spectrum.len() > 1 {
            Stability::Saddle
        } else {
            Stability::Unstable
        }
    } else if flow_probe_returns(model, xi) {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (stability, spectrum)
}

/// Perturb a marginal fixed point along each tangent direction and watch
/// whether the flow comes back. Degenerate attraction can be polynomially
/// slow, so the probe runs long with coarse steps.
fn flow_probe_returns(model: &Model, xi: &[f64]) -> bool {
    let d = xi.len();
    let q = tangent_basis(d);
    let delta = 5e-3;
    for qc in &q {
        for sign in [1.0, -1.0] {
            let mut x: Vec<f64> = (0..d).map(|i| xi[i] + sign * delta * qc[i]).collect();
            if x.iter().any(|&v| v < 0.0) {
                continue;
            }
            let s: f64 = x.iter().sum();
            for v in &mut x {
                *v /= s;
            }
            let dt = 0.05;
            let mut dist = delta;
            for step in 0..200_000 {
                x = match rk4_step(model, &x, dt, step as f64 * dt) {
                    Ok(y) => y,
                    Err(_) => return false,
                };
                dist = x
                    .iter()
                    .zip(xi)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist > 8.0 * delta {
                    return false;
                }
                if dist < 0.05 * delta {
                    break;
                }
            }
            // Degenerate attraction can be polynomially slow; a clear
            // shrink of the perturbation within the horizon counts.
            if dist > 0.9 * delta {
                return false;
            }
        }
    }
    true
}

/// Locate and classify the fixed points of the mean-field ODE.
///
/// Each start is flowed toward an attractor and Newton-polished; Newton is
/// also run from the raw start so unstable fixed points and saddles are
/// found. Results are deduplicated within [`MERGE_RADIUS`] and ordered
/// lexicographically by location, which fixes the attractor indexing used
/// by every downstream report.
pub fn find_attractors(model: &Model, n_starts: usize, seed: u64) -> Result<AttractorSet> {
    let d = model.dim();
    if n_starts < 10 * d {
        return Err(Error::InvalidInput(format!(
            "need at least {} starts for dimension {d}",
            10 * d
        )));
    }
    let mut starts: Vec<SimplexPoint> = Vec::with_capacity(n_starts);
    // Corners and the barycentre first, then pseudo-random fills.
    for z in 0..d {
        starts.push(SimplexPoint::dirac(d, z));
    }
    starts.push(SimplexPoint::uniform(d));
    let mut stream = Stream::derived(seed, 0, 0);
    while starts.len() < n_starts {
        starts.push(SimplexPoint::new(stream.next_simplex(d)).unwrap());
    }

    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut unsettled = Vec::new();
    let mut any_limit_cycle = None;
    for (si, s) in starts.iter().enumerate() {
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if let Some(p) = newton_polish(model, s.weights()) {
            candidates.push(p);
        }
        match mve_flow(model, s, 400.0, 0.01) {
            Ok(path) => {
                let terminus = path.terminal().weights().to_vec();
                if let Some(p) = newton_polish(model, &terminus) {
                    candidates.push(p);
                } else if path.terminal_drift_norm > 1e-6 {
                    any_limit_cycle = Some(si);
                    unsettled.push(si);
                }
            }
            Err(_) => unsettled.push(si),
        }
        for c in candidates {
            let is_new = found.iter().all(|f| euclid(f, &c) > MERGE_RADIUS);
            if is_new {
                found.push(c);
            }
        }
    }
    if found.is_empty() {
        return Err(match any_limit_cycle {
            Some(start) => Error::LimitCycleSuspected { start },
            None => Error::NonConvergent("no fixed point located from any start".into()),
        });
    }
    merge_flat_clusters(model, &mut found);
    found.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let attractors = found
        .into_iter()
        .enumerate()
        .map(|(index, w)| {
            let (stability, jacobian_spectrum) = classify(model, &w);
            Attractor {
                index,
                location: SimplexPoint::new(w).unwrap(),
                stability,
                jacobian_spectrum,
            }
        })
        .collect();
    Ok(AttractorSet {
        attractors,
        unsettled_starts: unsettled,
    })
}

/// Collapse clusters of numerically indistinguishable fixed points.
///
/// At a degenerate (marginal) fixed point the drift vanishes to higher
/// order, so any point within roughly `eps^(1/3)` of the root passes the
/// drift tolerance and Newton cannot localise further. Points whose
/// tangent Jacobian is numerically flat are therefore merged over a much
/// wider radius than the regular [`MERGE_RADIUS`].
fn merge_flat_clusters(model: &Model, found: &mut Vec<Vec<f64>>) {
    const FLAT_EIG: f64 = 1e-3;
    const FLAT_RADIUS: f64 = 1e-3;
    let flat: Vec<bool> = found
        .iter()
        .map(|p| {
            let j = tangent_jacobian(model, p);
            j.complex_eigenvalues()
                .iter()
                .map(|c| c.re.abs())
                .fold(0.0f64, f64::max)
                <= FLAT_EIG
        })
        .collect();
    let mut keep: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; found.len()];
    for i in 0..found.len() {
        if used[i] {
            continue;
        }
        if !flat[i] {
            keep.push(found[i].clone());
            continue;
        }
        let mut cluster = vec![i];
        for j in i + 1..found.len() {
            if !used[j] && flat[j] && euclid(&found[i], &found[j]) <= FLAT_RADIUS {
                used[j] = true;
                cluster.push(j);
            }
        }
        // Representative: the cluster member with the smallest drift norm.
        let best = cluster
            .into_iter()
            .min_by(|&a, &b| {
                let na = inf_norm(&drift(model, &found[a]));
                let nb = inf_norm(&drift(model, &found[b]));
                na.partial_cmp(&nb).unwrap()
            })
            .unwrap();
        keep.push(found[best].clone());
    }
    *found = keep;
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Flow `start` until it comes within `1e-4` of a stable attractor and
/// return that attractor's index.
pub fn basin_of(model: &Model, attractors: &AttractorSet, start: &SimplexPoint) -> Result<usize> {
    if attractors.attractors.is_empty() {
        return Err(Error::InvalidInput("empty attractor set".into()));
    }
    let stable: Vec<&Attractor> = attractors.stable();
    let mut x = start.weights().to_vec();
    let dt = 0.01;
    let t_cap = 5_000.0;
    let mut t = 0.0;
    loop {
        for a in &stable {
            if euclid(&x, a.location.weights()) <= 1e-4 {
                return Ok(a.index);
            }
        }
        if t >= t_cap {
            return Err(Error::Unresolved);
        }
        x = rk4_step(model, &x, dt, t)?;
        t += dt;
    }
}
