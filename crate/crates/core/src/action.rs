//! Finite-horizon large-deviation costs.
//!
//! The local cost of moving with velocity `v` at simplex point `ξ` is the
//! concave dual
//!
//! ```text
//! L(ξ, v) = sup_α { Σ_z α(z) (v(z) - drift(ξ)(z))
//!                   - Σ_{(z,z')} τ(α(z') - α(z)) λ_{z,z'}(ξ) ξ(z) }
//! ```
//!
//! with `τ(u) = e^u - u - 1`. Using `Σ_z α(z) drift(z) = Σ_e w_e Δ_e` this
//! collapses to `sup_α { α·v - Σ_e w_e (e^{Δ_e} - 1) }`, which is what the
//! optimiser works with. Path actions integrate `L` along interpolants;
//! terminal costs minimise the action over piecewise-linear paths with free
//! interior knots. The dual maximiser also yields the controlled rates
//! `l_{z,z'} = λ_{z,z'} e^{α(z')-α(z)}`, giving a second, edge-wise `τ*`
//! form of the action that the tests check against the dual form.

use crate::error::{Error, Result};
use crate::model::{Model, SimplexPoint};
use crate::rng::Stream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// `τ(u) = e^u - u - 1`, evaluated without cancellation near zero.
#[inline]
pub fn tau(u: f64) -> f64 {
    u.exp_m1() - u
}

/// Fenchel-Legendre transform of `τ`: `∞` below -1, `1` at -1, and
/// `(u+1) log(u+1) - u` above.
pub fn tau_star(u: f64) -> f64 {
    if u < -1.0 {
        f64::INFINITY
    } else if u == -1.0 {
        1.0
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// Outcome of the local cost optimisation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagrangianValue {
    /// Action density, nonnegative; zero exactly when `v` is the drift.
    pub value: f64,
    /// Dual maximiser, gauge-fixed so the last component is zero.
    pub alpha: Vec<f64>,
    /// False when the gradient tolerance was not reached (best value kept).
    pub converged: bool,
}

const GRAD_TOL: f64 = 1e-10;
const ZERO_MASS: f64 = 1e-14;

/// Local Lagrangian `L(ξ, v)`.
///
/// Uses the exact scalar dual for two-state models and damped Newton on
/// the gauge-fixed concave dual otherwise. Velocities that require mass to
/// leave an empty state (or to enter a state with no feeding edge) have
/// infinite cost and are reported as [`Error::InfiniteAction`].
pub fn lagrangian(model: &Model, xi: &SimplexPoint, v: &[f64]) -> Result<LagrangianValue> {
    let x = xi.weights();
    check_finite_cost(model, x, v)?;
    if model.dim() == 2 && is_plain_two_state(model) {
        return lagrangian_two_state(model, x, v);
    }
    lagrangian_generic(model, x, v)
}

fn is_plain_two_state(model: &Model) -> bool {
    model.edges() == [(0, 1), (1, 0)]
}

fn check_finite_cost(model: &Model, x: &[f64], v: &[f64]) -> Result<()> {
    let d = x.len();
    if v.len() != d {
        return Err(Error::InvalidInput("velocity dimension mismatch".into()));
    }
    let sum: f64 = v.iter().sum();
    if sum.abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "velocity components sum to {sum}, not 0"
        )));
    }
    for z in 0..d {
        if x[z] <= ZERO_MASS && v[z] < -1e-12 {
            return Err(Error::InfiniteAction(format!(
                "state {z} is empty but v({z}) = {} < 0",
                v[z]
            )));
        }
        if v[z] > 1e-12 {
            let in_weight: f64 = model
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| e.1 == z)
                .map(|(k, e)| x[e.0] * model.edge_rate(k, x))
                .sum();
            if in_weight <= 0.0 {
                return Err(Error::InfiniteAction(format!(
                    "state {z} needs inflow but all feeding edges carry zero mass"
                )));
            }
        }
    }
    Ok(())
}

/// Exact scalar dual for a two-state model with edges (down->up, up->down).
fn lagrangian_two_state(model: &Model, x: &[f64], v: &[f64]) -> Result<LagrangianValue> {
    let w01 = x[0] * model.edge_rate(0, x);
    let w10 = x[1] * model.edge_rate(1, x);
    let u = v[1];
    // Gauge alpha = (a, 0); F(a) = -a u - w01 expm1(-a) - w10 expm1(a).
    // F'(a) = 0 is quadratic in e^{-a}.
    const A_CAP: f64 = 40.0;
    let (a, attained) = if w01 > 0.0 && w10 > 0.0 {
        let s = (u * u + 4.0 * w01 * w10).sqrt();
        let q = if u >= 0.0 {
            (u + s) / (2.0 * w01)
        } else {
            2.0 * w10 / (s - u)
        };
        (-q.ln(), true)
    } else if w01 <= 0.0 && w10 <= 0.0 {
        // No active edge; only v = 0 has finite (zero) cost, and
        // check_finite_cost has already excluded the rest.
        return Ok(LagrangianValue {
            value: 0.0,
            alpha: vec![0.0, 0.0],
            converged: true,
        });
    } else if w01 <= 0.0 {
        // Empty `down` state: need u <= 0 (inflow to down).
        if u < 0.0 {
            ((-u / w10).ln(), true)
        } else {
            (-A_CAP, false) // suppression limit, value -> w10
        }
    } else {
        // Empty `up` state: need u >= 0.
        if u > 0.0 {
            ((w01 / u).ln(), true)
        } else {
            (A_CAP, false)
        }
    };
    let value = -a * u - w01 * (-a).exp_m1() - w10 * a.exp_m1();
    let _ = attained;
    Ok(LagrangianValue {
        value: value.max(0.0),
        alpha: vec![a, 0.0],
        converged: true,
    })
}

/// Damped Newton ascent on the gauge-fixed dual; works in any dimension.
pub fn lagrangian_generic(model: &Model, x: &[f64], v: &[f64]) -> Result<LagrangianValue> {
    check_finite_cost(model, x, v)?;
    let d = x.len();
    let edges = model.edges();
    let w: Vec<f64> = edges
        .iter()
        .enumerate()
        .map(|(k, e)| x[e.0] * model.edge_rate(k, x))
        .collect();

    let objective = |alpha: &[f64]| -> f64 {
        let mut f = 0.0;
        for z in 0..d {
            f += alpha[z] * v[z];
        }
        for (k, e) in edges.iter().enumerate() {
            f -= w[k] * (alpha[e.1] - alpha[e.0]).exp_m1();
        }
        f
    };
    let gradient = |alpha: &[f64]| -> Vec<f64> {
        let mut g = v.to_vec();
        for (k, e) in edges.iter().enumerate() {
            let flow = w[k] * (alpha[e.1] - alpha[e.0]).exp();
            g[e.0] += flow;
            g[e.1] -= flow;
        }
        g
    };

    let mut alpha = vec![0.0; d];
    let mut f = objective(&alpha);
    let mut converged = false;
    for _ in 0..200 {
        let g = gradient(&alpha);
        let gnorm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gnorm <= GRAD_TOL {
            converged = true;
            break;
        }
        // Hessian of -F restricted to the first d-1 coordinates.
        let m = d - 1;
        let mut h = DMatrix::<f64>::zeros(m, m);
        for (k, e) in edges.iter().enumerate() {
            let flow = w[k] * (alpha[e.1] - alpha[e.0]).exp();
            if e.0 < m {
                h[(e.0, e.0)] += flow;
            }
            if e.1 < m {
                h[(e.1, e.1)] += flow;
            }
            if e.0 < m && e.1 < m {
                h[(e.0, e.1)] -= flow;
                h[(e.1, e.0)] -= flow;
            }
        }
        let mut rhs = DVector::zeros(m);
        for z in 0..m {
            rhs[z] = g[z];
        }
        // Levenberg damping keeps the step well defined when boundary
        // weights vanish and the Hessian degenerates.
        let mut damping = 0.0;
        let step = loop {
            let mut hd = h.clone();
            for z in 0..m {
                hd[(z, z)] += damping;
            }
            match hd.cholesky() {
                Some(ch) => break ch.solve(&rhs),
                None => {
                    damping = if damping == 0.0 {
                        1e-12
                    } else {
                        damping * 100.0
                    };
                    if damping > 1e6 {
                        break rhs.clone();
                    }
                }
            }
        };
        // Backtracking ascent.
        let mut t = 1.0;
        let mut improved = false;
        while t >= 1e-12 {
            let mut trial = alpha.clone();
            for z in 0..m {
                trial[z] += t * step[z];
            }
            let ft = objective(&trial);
            if ft > f {
                alpha = trial;
                f = ft;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // Flat to machine precision; accept as converged when the
            // gradient is already tiny relative to the weights.
            converged = gnorm <= 1e-8;
            break;
        }
    }
    if !converged {
        let g = gradient(&alpha);
        converged = g.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= GRAD_TOL;
    }
    Ok(LagrangianValue {
        value: f.max(0.0),
        alpha,
        converged,
    })
}

/// Controlled rates `l_{z,z'} = λ_{z,z'}(ξ) e^{α(z') - α(z)}` recovered
/// from the dual maximiser (one entry per model edge).
pub fn controlled_rates(model: &Model, xi: &SimplexPoint, v: &[f64]) -> Result<Vec<f64>> {
    let lv = lagrangian(model, xi, v)?;
    let x = xi.weights();
    Ok(model
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| model.edge_rate(k, x) * (lv.alpha[e.1] - lv.alpha[e.0]).exp())
        .collect())
}

/// A time grid with simplex points; segments are interpreted as constant
/// velocity. Optional per-segment controlled rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlledPath {
    pub times: Vec<f64>,
    pub points: Vec<SimplexPoint>,
    pub controls: Option<Vec<Vec<f64>>>,
}

impl ControlledPath {
    pub fn new(times: Vec<f64>, points: Vec<SimplexPoint>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::InvalidInput(
                "path needs matching times and points, at least two nodes".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(ControlledPath {
            times,
            points,
            controls: None,
        })
    }

    pub fn from_flow(path: &crate::dynamics::FlowPath) -> Self {
        ControlledPath {
            times: path.times.clone(),
            points: path.points.clone(),
            controls: None,
        }
    }

    pub fn duration(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }
}

/// Action of one straight segment travelled in time `dt`, by composite
/// Simpson refined until the relative change drops below `rel_tol`.
fn segment_action(model: &Model, from: &[f64], to: &[f64], dt: f64, rel_tol: f64) -> Result<f64> {
    let d = from.len();
    let v: Vec<f64> = (0..d).map(|i| (to[i] - from[i]) / dt).collect();
    let eval = |s: f64| -> Result<f64> {
        let mut p = vec![0.0; d];
        for i in 0..d {
            p[i] = from[i] + s * (to[i] - from[i]);
            // Interpolation round-off can dip a coordinate below zero.
            if p[i] < 0.0 {
                p[i] = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        for x in &mut p {
            *x /= total;
        }
        Ok(lagrangian(model, &SimplexPoint::new(p)?, &v)?.value)
    };
    let simpson = |n: usize| -> Result<f64> {
        let h = 1.0 / n as f64;
        let mut acc = eval(0.0)? + eval(1.0)?;
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * eval(i as f64 * h)?;
        }
        Ok(acc * h / 3.0)
    };
    let mut n = 4;
    let mut prev = simpson(n)?;
    loop {
        n *= 2;
        let cur = simpson(n)?;
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-12) || n >= 4096 {
            return Ok(cur * dt);
        }
        prev = cur;
    }
}

/// `S_{[0,T]}` of a piecewise-linear path: the sum of its segment actions.
pub fn path_action(model: &Model, path: &ControlledPath) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..path.points.len() - 1 {
        let dt = path.times[i + 1] - path.times[i];
        total += segment_action(
            model,
            path.points[i].weights(),
            path.points[i + 1].weights(),
            dt,
            1e-6,
        )?;
    }
    Ok(total)
}

/// The same action through the edge-wise `τ*` representation with the
/// controlled rates recovered from the dual maximiser. Agreement with
/// [`path_action`] validates the recovery `l = λ e^{Δα}`.
pub fn path_action_tau_star(model: &Model, path: &ControlledPath) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..path.points.len() - 1 {
        let from = path.points[i].weights();
        let to = path.points[i + 1].weights();
        let dt = path.times[i + 1] - path.times[i];
        let d = from.len();
        let v: Vec<f64> = (0..d).map(|z| (to[z] - from[z]) / dt).collect();
        // Fixed-order quadrature; the integrand matches the dual integrand
        // pointwise, so the check does not need adaptive refinement.
        let mut seg = 0.0;
        for (node, weight) in crate::numerics::GL7 {
            let mut p = vec![0.0; d];
            for z in 0..d {
                p[z] = (from[z] + node * (to[z] - from[z])).max(0.0);
            }
            let s: f64 = p.iter().sum();
            for x in &mut p {
                *x /= s;
            }
            let point = SimplexPoint::new(p)?;
            let rates = controlled_rates(model, &point, &v)?;
            let x = point.weights();
            let mut density = 0.0;
            for (k, e) in model.edges().iter().enumerate() {
                let lambda = model.edge_rate(k, x);
                let mass = x[e.0] * lambda;
                if mass > 0.0 {
                    density += mass * tau_star(rates[k] / lambda - 1.0);
                }
            }
            seg += weight * density;
        }
        total += seg * dt;
    }
    Ok(total)
}

/// Result of the terminal-cost optimisation: an upper bound on `S_T(ξ|ν)`
/// that tightens as `n_knots` grows.
#[derive(Debug, Clone)]
pub struct TerminalCost {
    pub value: f64,
    pub path: ControlledPath,
    pub converged: bool,
}

/// Minimise the path action over piecewise-linear paths from `nu` to `xi`
/// in time `t_total` with `n_knots` free interior knots, by projected
/// gradient descent with finite-difference gradients and a few jittered
/// restarts.
pub fn terminal_cost(
    model: &Model,
    nu: &SimplexPoint,
    xi: &SimplexPoint,
    t_total: f64,
    n_knots: usize,
) -> Result<TerminalCost> {
    if t_total <= 0.0 || n_knots < 2 {
        return Err(Error::InvalidInput("need T > 0 and n_knots >= 2".into()));
    }
    let d = model.dim();
    let k = n_knots;
    let times: Vec<f64> = (0..k + 2)
        .map(|j| j as f64 * t_total / (k + 1) as f64)
        .collect();

    let assemble = |knots: &[Vec<f64>]| -> Result<ControlledPath> {
        let mut pts = Vec::with_capacity(k + 2);
        pts.push(nu.clone());
        for kn in knots {
            pts.push(SimplexPoint::new(kn.clone())?);
        }
        pts.push(xi.clone());
        ControlledPath::new(times.clone(), pts)
    };
    let objective = |knots: &[Vec<f64>]| -> f64 {
        match assemble(knots) {
            Ok(p) => path_action(model, &p).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let project = |p: &mut Vec<f64>| {
        let mut sum = 0.0;
        for x in p.iter_mut() {
            // Keep knots strictly inside the simplex so finite-difference
            // probes stay feasible.
            *x = x.max(1e-9);
            sum += *x;
        }
        for x in p.iter_mut() {
            *x /= sum;
        }
    };

    let straight: Vec<Vec<f64>> = (1..=k)
        .map(|j| {
            let s = j as f64 / (k + 1) as f64;
            (0..d)
                .map(|i| nu.weights()[i] + s * (xi.weights()[i] - nu.weights()[i]))
                .collect()
        })
        .collect();
    // The mean-field flow from `nu`, resampled at the knot times, is a
    // strong initial guess whenever the endpoint is dynamically reachable.
    let mut inits: Vec<Vec<Vec<f64>>> = vec![straight.clone()];
    if let Ok(flow) = crate::dynamics::mve_flow(model, nu, t_total, t_total / 2048.0) {
        let sampled: Vec<Vec<f64>> = (1..=k)
            .map(|j| {
                let idx = (j * (flow.points.len() - 1)) / (k + 1);
                flow.points[idx].weights().to_vec()
            })
            .collect();
        inits.push(sampled);
    }

    let q = crate::numerics::tangent_basis(d);
    let mut best: Option<(f64, Vec<Vec<f64>>, bool)> = None;
    for restart in 0..inits.len() as u64 + 2 {
        let mut knots = match inits.get(restart as usize) {
            Some(init) => init.clone(),
            None => {
                let mut jittered = straight.clone();
                let mut stream = Stream::derived(0xC0FF_EE00, restart, 0);
                for kn in &mut jittered {
                    for qc in &q {
                        let amp = 0.05 * (stream.next_f64() - 0.5);
                        for i in 0..d {
                            kn[i] += amp * qc[i];
                        }
                    }
                    project(kn);
                }
                jittered
            }
        };
        for kn in &mut knots {
            project(kn);
        }
        let mut f = objective(&knots);
        if !f.is_finite() {
            continue;
        }
        let h = 1e-6;
        let mut step = 0.1;
        let mut converged = false;
        let mut slow_iters = 0u32;
        for _ in 0..500 {
            // Finite-difference gradient in tangent coordinates.
            let mut grad = vec![vec![0.0; d - 1]; k];
            for j in 0..k {
                for (c, qc) in q.iter().enumerate() {
                    let mut plus = knots.clone();
                    let mut minus = knots.clone();
                    for i in 0..d {
                        plus[j][i] += h * qc[i];
                        minus[j][i] -= h * qc[i];
                    }
                    project(&mut plus[j]);
                    project(&mut minus[j]);
                    grad[j][c] = (objective(&plus) - objective(&minus)) / (2.0 * h);
                }
            }
            let gnorm: f64 = grad
                .iter()
                .flat_map(|g| g.iter())
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if gnorm < 1e-12 {
                converged = true;
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let mut trial = knots.clone();
                for j in 0..k {
                    for (c, qc) in q.iter().enumerate() {
                        for i in 0..d {
                            trial[j][i] -= step * grad[j][c] * qc[i];
                        }
                    }
                    project(&mut trial[j]);
                }
                let ft = objective(&trial);
                if ft < f {
                    let improvement = (f - ft) / f.abs().max(1e-12);
                    knots = trial;
                    f = ft;
                    accepted = true;
                    step = (step * 2.0).min(0.5);
                    if improvement < 1e-7 {
                        slow_iters += 1;
                    } else {
                        slow_iters = 0;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted || slow_iters >= 3 {
                converged = true;
                break;
            }
        }
        let better = match &best {
            Some((bf, _, _)) => f < *bf,
            None => true,
        };
        if better {
            best = Some((f, knots, converged));
        }
    }
    let (value, knots, converged) =
        best.ok_or_else(|| Error::NonConvergent("no feasible path found".into()))?;
    Ok(TerminalCost {
        value,
        path: assemble(&knots)?,
        converged,
    })
}
