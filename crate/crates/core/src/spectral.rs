//! Exact spectral analysis of the empirical-measure generator.
//!
//! The chain on `M_1^N(Z)` jumps from `x` to `x + (δ_{z'} - δ_z)/N` at
//! rate `N x(z) λ_{z,z'}(x)`. This module assembles that generator
//! sparsely, solves for the invariant measure (detailed-balance product
//! form on birth-death chains, dense LU otherwise), checks reversibility,
//! computes the second eigenvalue, and evaluates total-variation mixing
//! curves through the spectral expansion, which is what makes times of
//! order `exp(N Λ)` reachable at all.
//!
//! Metastable second eigenvalues sit many orders of magnitude below the
//! matrix norm, far under `eps * ||Q||`, where ordinary eigensolvers
//! return noise. For birth-death chains the zero mode is removed exactly
//! by passing to the difference operator (whose spectrum is the nonzero
//! spectrum of `Q`), and Sturm bisection on its symmetrised form runs in
//! double-double arithmetic, resolving eigenvalues down to about 1e-25
//! of the matrix scale.

use crate::error::{Error, Result};
use crate::model::{lattice_enumerate, lattice_index, lattice_size, LatticeMeasure, Model};
use crate::numerics::{log_sum_exp, Dd};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Dense eigensolve cap (matrix dimension).
pub const DENSE_CAP: usize = 4000;

/// Tridiagonal (birth-death) solver cap.
pub const TRIDIAG_CAP: usize = 200_001;

const REVERSIBLE_TOL: f64 = 1e-9;

/// Sparse generator of the empirical-measure chain at a fixed `N`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub n: u64,
    pub state_dim: usize,
    nodes: Vec<LatticeMeasure>,
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[LatticeMeasure] {
        &self.nodes
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal entry `Q(x, y)`, zero when no single jump connects.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        for k in self.row_offsets[x]..self.row_offsets[x + 1] {
            if self.cols[k] as usize == y {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_offsets[x]..self.row_offsets[x + 1])
            .map(|k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Node index of a lattice measure.
    pub fn node_index(&self, m: &LatticeMeasure) -> Result<usize> {
        if m.n() != self.n {
            return Err(Error::InvalidInput(format!(
                "measure has N = {}, generator has N = {}",
                m.n(),
                self.n
            )));
        }
        Ok(lattice_index(m) as usize)
    }

    /// Birth-death rates along the lattice index when `|Z| = 2`:
    /// `(rate(i -> i+1), rate(i -> i-1))` per node.
    fn birth_death(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.state_dim != 2 {
            return None;
        }
        let n = self.size();
        let mut birth = vec![0.0; n];
        let mut death = vec![0.0; n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                if j == i + 1 {
                    birth[i] = v;
                } else if j + 1 == i {
                    death[i] = v;
                } else {
                    return None;
                }
            }
        }
        Some((birth, death))
    }
}

/// Assemble the generator for `model` with `N` particles.
pub fn build_generator(model: &Model, n: u64) -> Result<GeneratorMatrix> {
    lattice_size(n, model.dim())?;
    let nodes = lattice_enumerate(n, model.dim())?;
    let mut row_offsets = Vec::with_capacity(nodes.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(nodes.len());
    row_offsets.push(0);
    for node in &nodes {
        let xi = node.to_simplex();
        let mut out_rate = 0.0;
        for (k, &(z, z2)) in model.edges().iter().enumerate() {
            if node.counts()[z] == 0 {
                continue;
            }
            // N x(z) λ = counts(z) λ.
            let rate = node.counts()[z] as f64 * model.edge_rate(k, xi.weights());
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::RateOutOfBounds {
                    edge: model.edge_name(k),
                    point: format!("{:?}", xi.weights()),
                    value: rate,
                });
            }
            let mut counts = node.counts().to_vec();
            counts[z] -= 1;
            counts[z2] += 1;
            let target = lattice_index(&LatticeMeasure::new(counts)?);
            cols.push(target as u32);
            vals.push(rate);
            out_rate += rate;
        }
        diag.push(-out_rate);
        row_offsets.push(cols.len());
    }
    Ok(GeneratorMatrix {
        n,
        state_dim: model.dim(),
        nodes,
        row_offsets,
        cols,
        vals,
        diag,
    })
}

/// Solve `℘ Q = 0`, `Σ ℘ = 1`.
///
/// Birth-death chains use the exact detailed-balance product in log
/// space; anything else is a dense LU solve under [`DENSE_CAP`]. The
/// residual `||℘Q||_∞` is verified to `1e-10`.
pub fn invariant_measure(q: &GeneratorMatrix) -> Result<Vec<f64>> {
    let pi = match q.birth_death() {
        Some((birth, death)) => {
            let n = q.size();
            let mut log_pi = vec![0.0; n];
            for i in 1..n {
                log_pi[i] = log_pi[i - 1] + birth[i - 1].ln() - death[i].ln();
            }
            let norm = log_sum_exp(&log_pi);
            log_pi
                .iter()
                .map(|lp| (lp - norm).exp())
                .collect::<Vec<f64>>()
        }
        None => {
            let n = q.size();
            if n > DENSE_CAP {
                return Err(Error::CapExceeded {
                    requested: n as u64,
                    cap: DENSE_CAP as u64,
                });
            }
            // Transpose system with the last equation replaced by the
            // normalisation constraint.
            let mut a = DMatrix::<f64>::zeros(n, n);
            for x in 0..n {
                a[(x, x)] = q.diag()[x];
                for (y, v) in q.row(x) {
                    a[(y, x)] = v;
                }
            }
            for x in 0..n {
                a[(n - 1, x)] = 1.0;
            }
            let mut b = nalgebra::DVector::zeros(n);
            b[n - 1] = 1.0;
            let solved = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::SolveFailed("singular transposed generator".into()))?;
            let mut pi: Vec<f64> = solved.iter().cloned().collect();
            let total: f64 = pi.iter().sum();
            for p in &mut pi {
                *p /= total;
            }
            if pi.iter().any(|&p| p <= 0.0) {
                return Err(Error::SolveFailed(
                    "invariant measure has nonpositive entries".into(),
                ));
            }
            pi
        }
    };
    let residual = stationarity_residual(q, &pi);
    if residual > 1e-10 {
        return Err(Error::SolveFailed(format!(
            "stationarity residual {residual:.3e} exceeds 1e-10"
        )));
    }
    Ok(pi)
}

/// `||℘Q||_∞` for a candidate invariant vector.
pub fn stationarity_residual(q: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let n = q.size();
    let mut col_acc = vec![0.0; n];
    for (x, &px) in pi.iter().enumerate() {
        col_acc[x] += px * q.diag()[x];
        for (y, v) in q.row(x) {
            col_acc[y] += px * v;
        }
    }
    col_acc.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest detailed-balance violation `|℘(x)Q(x,y) - ℘(y)Q(y,x)|`.
pub fn check_reversibility(q: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..q.size() {
        for (y, v) in q.row(x) {
            let back = q.entry(y, x);
            worst = worst.max((pi[x] * v - pi[y] * back).abs());
        }
    }
    worst
}

fn require_reversible(q: &GeneratorMatrix, pi: &[f64]) -> Result<()> {
    let residual = check_reversibility(q, pi);
    if residual > REVERSIBLE_TOL {
        return Err(Error::NotReversible { residual });
    }
    Ok(())
}

/// Eigenvalue count of a symmetric tridiagonal below `x`, by the Sturm
/// pivot recurrence in double-double arithmetic.
fn sturm_count_dd(diag: &[Dd], off_sq: &[Dd], x: f64) -> usize {
    let shift = Dd::from(x);
    let mut count = 0;
    let mut d = diag[0] - shift;
    if d.hi == 0.0 && d.lo == 0.0 {
        d = Dd::from(-1e-300);
    }
    if d.is_negative() {
        count += 1;
    }
    for i in 1..diag.len() {
        d = diag[i] - shift - off_sq[i - 1] / d;
        if d.hi == 0.0 && d.lo == 0.0 {
            d = Dd::from(-1e-300);
        }
        if d.is_negative() {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a positive-semidefinite symmetric tridiagonal,
/// bisected to high relative accuracy.
fn smallest_eigenvalue_dd(diag: &[Dd], off_sq: &[Dd]) -> f64 {
    let mut hi = 0.0f64;
    for i in 0..diag.len() {
        let mut row = diag[i].hi.abs();
        if i > 0 {
            row += off_sq[i - 1].hi.abs().sqrt();
        }
        if i + 1 < diag.len() {
            row += off_sq[i].hi.abs().sqrt();
        }
        hi = hi.max(row);
    }
    let mut lo = 0.0f64;
    // The counted multiplicity below `hi` is full, below `lo` it is zero.
    for _ in 0..400 {
        let mid = if lo == 0.0 { hi * 0.5 } else { (lo + hi) * 0.5 };
        let mid = if mid <= lo || mid >= hi {
            0.5 * (lo + hi)
        } else {
            mid
        };
        if sturm_count_dd(diag, off_sq, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs() || hi <= 1e-290 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Modulus of the second eigenvalue of the generator.
///
/// Requires reversibility. Birth-death chains go through the exactly
/// deflated difference operator in double-double Sturm bisection (so
/// values like `exp(-N Λ)` keep full relative accuracy); other reversible
/// generators use a dense symmetric eigensolve under [`DENSE_CAP`].
pub fn second_eigenvalue(q: &GeneratorMatrix, pi: &[f64]) -> Result<f64> {
    require_reversible(q, pi)?;
    if let Some((birth, death)) = q.birth_death() {
        let n = q.size();
        if n > TRIDIAG_CAP {
            return Err(Error::CapExceeded {
                requested: n as u64,
                cap: TRIDIAG_CAP as u64,
            });
        }
        // Difference operator on h(i) = f(i+1) - f(i): tridiagonal with
        // diag -(birth_i + death_{i+1}), sub death_i, super birth_{i+1}.
        // Its spectrum is spec(Q) minus the zero mode; symmetrised
        // off-diagonal squares are birth_{i+1} * death_{i+1}.
        let m = n - 1;
        let diag: Vec<Dd> = (0..m)
            .map(|i| Dd::from(birth[i]) + Dd::from(death[i + 1]))
            .collect();
        let off_sq: Vec<Dd> = (0..m.saturating_sub(1))
            .map(|i| Dd::from(birth[i + 1]) * Dd::from(death[i + 1]))
            .collect();
        // The zero mode of the full chain is exact by construction; the
        // invariant-measure residual has already certified it. What is
        // left is the smallest eigenvalue of the deflated operator.
        Ok(smallest_eigenvalue_dd(&diag, &off_sq))
    } else {
        let spectrum = spectrum_dense(q, pi)?;
        if spectrum[0].abs() > 1e-10 {
            return Err(Error::SolveFailed(format!(
                "leading eigenvalue {:.3e} is not zero",
                spectrum[0]
            )));
        }
        Ok(spectrum[1])
    }
}

/// All eigenvalues of `-Q` in ascending order, by dense symmetric solve
/// on the `√℘`-similarity transform. The first entry must be ~0.
pub fn spectrum_dense(q: &GeneratorMatrix, pi: &[f64]) -> Result<Vec<f64>> {
    require_reversible(q, pi)?;
    let n = q.size();
    if n > DENSE_CAP {
        return Err(Error::CapExceeded {
            requested: n as u64,
            cap: DENSE_CAP as u64,
        });
    }
    let b = symmetrised(q, pi);
    let eig = b.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&mu| -mu).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

fn symmetrised(q: &GeneratorMatrix, pi: &[f64]) -> DMatrix<f64> {
    let n = q.size();
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        b[(x, x)] = q.diag()[x];
        for (y, v) in q.row(x) {
            b[(x, y)] = v * sqrt_pi[x] / sqrt_pi[y];
        }
    }
    // Symmetrise exactly against round-off.
    for x in 0..n {
        for y in x + 1..n {
            let avg = 0.5 * (b[(x, y)] + b[(y, x)]);
            b[(x, y)] = avg;
            b[(y, x)] = avg;
        }
    }
    b
}

/// Exact total-variation distance `||δ_ν e^{tQ} - ℘||_TV` at each time.
///
/// The spectral expansion evaluates `e^{tQ}` mode by mode, so times up to
/// `1e300` cost nothing; decaying modes simply underflow to zero.
pub fn tv_mixing_curve(
    q: &GeneratorMatrix,
    pi: &[f64],
    start: &LatticeMeasure,
    times: &[f64],
) -> Result<Vec<f64>> {
    require_reversible(q, pi)?;
    let n = q.size();
    if n > DENSE_CAP {
        return Err(Error::CapExceeded {
            requested: n as u64,
            cap: DENSE_CAP as u64,
        });
    }
    let nu = q.node_index(start)?;
    let b = symmetrised(q, pi);
    let eig = b.symmetric_eigen();
    // Drop the stationary mode (eigenvalue closest to zero) and clamp the
    // rest to be nonpositive so huge times cannot overflow.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let top = order[0];
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidInput(format!("negative time {t}")));
        }
        let mut tv = 0.0;
        for x in 0..n {
            let mut dev = 0.0;
            for k in 0..n {
                if k == top {
                    continue;
                }
                let mu = eig.eigenvalues[k].min(0.0);
                let decay = (mu * t).exp();
                if decay == 0.0 {
                    continue;
                }
                dev += eig.eigenvectors[(nu, k)] * eig.eigenvectors[(x, k)] * decay;
            }
            tv += (dev * sqrt_pi[x] / sqrt_pi[nu]).abs();
        }
        out.push(0.5 * tv);
    }
    Ok(out)
}

/// Summary of the spectral analysis at one `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: u64,
    pub lattice_size: usize,
    pub reversibility_residual: f64,
    pub reversible: bool,
    pub lambda_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant_measure: Option<Vec<f64>>,
}

/// Convenience wrapper: build, solve, and summarise one particle count.
pub fn analyse(
    model: &Model,
    n: u64,
    keep_invariant: bool,
    full_spectrum: bool,
) -> Result<SpectralReport> {
    let q = build_generator(model, n)?;
    let pi = invariant_measure(&q)?;
    let residual = check_reversibility(&q, &pi);
    let reversible = residual <= REVERSIBLE_TOL;
    let lambda_2 = if reversible {
        Some(second_eigenvalue(&q, &pi)?)
    } else {
        None
    };
    let spectrum = if reversible && full_spectrum {
        Some(spectrum_dense(&q, &pi)?)
    } else {
        None
    };
    Ok(SpectralReport {
        n,
        lattice_size: q.size(),
        reversibility_residual: residual,
        reversible,
        lambda_2,
        spectrum,
        invariant_measure: keep_invariant.then_some(pi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::RateExpr;
    use crate::model::{catalog, Model, StateSpace, TransitionGraph};
    use std::collections::BTreeMap;

    /// Non-interacting reversible three-state model with single-particle
    /// stationary distribution (1, 2, 4)/7.
    fn nonint3() -> Model {
        let space = StateSpace::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let graph =
            TransitionGraph::new(3, vec![(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]).unwrap();
        let mut rates = BTreeMap::new();
        for (edge, rate) in [
            ((0usize, 1usize), "2"),
            ((1, 0), "1"),
            ((1, 2), "2"),
            ((2, 1), "1"),
            ((0, 2), "4"),
            ((2, 0), "1"),
        ] {
            rates.insert(
                edge,
                RateExpr::parse(rate, space.labels(), &BTreeMap::new()).unwrap(),
            );
        }
        Model::new("nonint3", space, graph, rates).unwrap()
    }

    fn ln_multinomial(counts: &[u64], probs: &[f64]) -> f64 {
        fn ln_factorial(k: u64) -> f64 {
            (2..=k).map(|i| (i as f64).ln()).sum()
        }
        let n: u64 = counts.iter().sum();
        let mut v = ln_factorial(n);
        for (&c, &p) in counts.iter().zip(probs) {
            v -= ln_factorial(c);
            v += c as f64 * p.ln();
        }
        v
    }

    #[test]
    fn single_particle_generator_matches_rate_matrix() {
        let m = catalog::nonint(1.0, 2.0);
        let q = build_generator(&m, 1).unwrap();
        let down = q
            .node_index(&LatticeMeasure::new(vec![1, 0]).unwrap())
            .unwrap();
        let up = q
            .node_index(&LatticeMeasure::new(vec![0, 1]).unwrap())
            .unwrap();
        assert_eq!(q.entry(down, up), 1.0);
        assert_eq!(q.entry(up, down), 2.0);
        assert_eq!(q.diag()[down], -1.0);
        assert_eq!(q.diag()[up], -2.0);
    }

    #[test]
    fn two_state_generator_is_tridiagonal_with_zero_row_sums() {
        let m = catalog::curie_weiss(1.5, 0.0);
        let q = build_generator(&m, 50).unwrap();
        assert_eq!(q.size(), 51);
        for x in 0..q.size() {
            let mut row_sum = q.diag()[x];
            for (y, v) in q.row(x) {
                assert!(y == x + 1 || y + 1 == x, "non-tridiagonal entry ({x},{y})");
                row_sum += v;
            }
            assert!(row_sum.abs() < 1e-12);
        }
        // Off-diagonal count: both edges active except at the two corners.
        let expected_nnz: usize = 2 * 51 - 2;
        assert_eq!(q.nnz(), expected_nnz);
    }

    #[test]
    fn nonint_invariant_measure_is_multinomial() {
        let m = catalog::nonint(1.0, 2.0);
        let q = build_generator(&m, 30).unwrap();
        let pi = invariant_measure(&q).unwrap();
        for (node, &p) in q.nodes().iter().zip(&pi) {
            let want = ln_multinomial(node.counts(), &[2.0 / 3.0, 1.0 / 3.0]).exp();
            assert!((p - want).abs() < 1e-10, "{p} vs {want}");
        }
    }

    #[test]
    fn single_particle_invariant_measure() {
        let m = catalog::nonint(1.0, 2.0);
        let q = build_generator(&m, 1).unwrap();
        let pi = invariant_measure(&q).unwrap();
        let down = q
            .node_index(&LatticeMeasure::new(vec![1, 0]).unwrap())
            .unwrap();
        let up = q
            .node_index(&LatticeMeasure::new(vec![0, 1]).unwrap())
            .unwrap();
        assert!((pi[down] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi[up] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cw_invariant_measure_satisfies_stationarity() {
        let m = catalog::curie_weiss(1.5, 0.0);
        let q = build_generator(&m, 100).unwrap();
        let pi = invariant_measure(&q).unwrap();
        assert!(stationarity_residual(&q, &pi) <= 1e-10);
        let total: f64 = pi.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn birth_death_chains_are_reversible_cycles_are_not() {
        let m = catalog::curie_weiss(1.5, 0.1);
        let q = build_generator(&m, 40).unwrap();
        let pi = invariant_measure(&q).unwrap();
        assert!(check_reversibility(&q, &pi) <= 1e-10);

        let c = catalog::cycle3(1.0, 1.0);
        let q3 = build_generator(&c, 10).unwrap();
        let pi3 = invariant_measure(&q3).unwrap();
        assert!(check_reversibility(&q3, &pi3) > 1e-6);
        assert!(matches!(
            second_eigenvalue(&q3, &pi3),
            Err(Error::NotReversible { .. })
        ));
    }

    #[test]
    fn product_form_three_state_model_is_reversible() {
        let m = nonint3();
        let q = build_generator(&m, 10).unwrap();
        let pi = invariant_measure(&q).unwrap();
        assert!(check_reversibility(&q, &pi) <= 1e-10);
        let probs = [1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0];
        for (node, &p) in q.nodes().iter().zip(&pi) {
            let want = ln_multinomial(node.counts(), &probs).exp();
            assert!((p - want).abs() < 1e-10);
        }
    }

    #[test]
    fn nonint_second_eigenvalue_is_rate_sum_for_all_n() {
        let m = catalog::nonint(1.0, 2.0);
        for n in [1u64, 5, 20, 80] {
            let q = build_generator(&m, n).unwrap();
            let pi = invariant_measure(&q).unwrap();
            let l2 = second_eigenvalue(&q, &pi).unwrap();
            assert!((l2 - 3.0).abs() < 1e-8, "N={n}: {l2}");
        }
    }

    #[test]
    fn nonint_full_spectrum_is_integer_multiples() {
        let m = catalog::nonint(1.0, 2.0);
        let q = build_generator(&m, 40).unwrap();
        let pi = invariant_measure(&q).unwrap();
        let spec = spectrum_dense(&q, &pi).unwrap();
        for (k, &v) in spec.iter().enumerate() {
            assert!(
                (v - 3.0 * k as f64).abs() < 1e-8,
                "eigenvalue {k}: {v} vs {}",
                3.0 * k as f64
            );
        }
    }

    #[test]
    fn deflated_and_dense_eigenvalues_agree_at_moderate_n() {
        let m = catalog::curie_weiss(1.5, 0.1);
        let q = build_generator(&m, 60).unwrap();
        let pi = invariant_measure(&q).unwrap();
        let dd = second_eigenvalue(&q, &pi).unwrap();
        let spec = spectrum_dense(&q, &pi).unwrap();
        assert!(spec[0].abs() < 1e-10);
        assert!(
            (dd - spec[1]).abs() <= 1e-9 * spec[1],
            "dd {dd} vs dense {}",
            spec[1]
        );
    }

    #[test]
    fn three_state_second_eigenvalue_matches_single_particle_gap() {
        // Independent particles: chain spectrum adds, so the gap of the
        // N-particle generator equals the single-particle gap.
        let m = nonint3();
        let single = build_generator(&m, 1).unwrap();
        let pi1 = invariant_measure(&single).unwrap();
        let gap1 = second_eigenvalue(&single, &pi1).unwrap();
        let q = build_generator(&m, 8).unwrap();
        let pi = invariant_measure(&q).unwrap();
        let gap = second_eigenvalue(&q, &pi).unwrap();
        assert!((gap - gap1).abs() < 1e-8, "{gap} vs {gap1}");
    }

    #[test]
    fn tv_curve_endpoints_and_monotonicity() {
        let m = catalog::nonint(1.0, 2.0);
        let q = build_generator(&m, 20).unwrap();
        let pi = invariant_measure(&q).unwrap();
        let start = LatticeMeasure::new(vec![20, 0]).unwrap();
        let node = q.node_index(&start).unwrap();
        let times: Vec<f64> = vec![0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e300];
        let tv = tv_mixing_curve(&q, &pi, &start, &times).unwrap();
        assert!((tv[0] - (1.0 - pi[node])).abs() < 1e-10);
        assert!(tv[tv.len() - 1] <= 1e-12);
        for w in tv.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "TV not monotone: {:?}", tv);
        }
    }
}
