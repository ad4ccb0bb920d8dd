//! Small numerical utilities shared across modules: quadrature, line
//! minimisation, the simplex tangent basis, double-double arithmetic for
//! the high-relative-accuracy eigenvalue path, and a least-squares line fit.

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
///
/// Recursion is capped; integrable endpoint singularities (logarithmic)
/// should be clipped by the caller before integrating.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
///
/// Returns `(argmin, min)`; `tol` is the absolute bracket tolerance in x.
pub fn golden_section_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Nodes and weights of 7-point Gauss-Legendre quadrature on `[0, 1]`.
pub const GL7: [(f64, f64); 7] = [
    (0.025_446_043_828_620_74, 0.064_742_483_084_434_85),
    (0.129_234_407_200_302_8, 0.139_852_695_744_638_33),
    (0.297_077_424_311_301_4, 0.190_915_025_252_559_47),
    (0.5, 0.208_979_591_836_734_7),
    (0.702_922_575_688_698_6, 0.190_915_025_252_559_47),
    (0.870_765_592_799_697_2, 0.139_852_695_744_638_33),
    (0.974_553_956_171_379_2, 0.064_742_483_084_434_85),
];

/// Orthonormal basis of the simplex tangent space `{v : Σ v = 0}` in R^d.
///
/// Returns a `d x (d-1)` column-major matrix; deterministic for a given d.
pub fn tangent_basis(d: usize) -> Vec<Vec<f64>> {
    assert!(d >= 2);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        // Helmert-style construction: k-th column has k+1 equal entries
        // followed by one balancing entry, zero elsewhere.
        let mut v = vec![0.0; d];
        let a = 1.0 / ((k + 1) as f64 * (k + 2) as f64).sqrt();
        for item in v.iter_mut().take(k + 1) {
            *item = a;
        }
        v[k + 1] = -((k + 1) as f64) * a;
        cols.push(v);
    }
    cols
}

/// Ordinary least-squares fit `y ≈ slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// `log(Σ exp(x_i))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Double-double value: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
///
/// Used where eigenvalues of order `exp(-N Λ)` must be resolved against a
/// matrix of order one, far below `eps * ||A||`. Only the field operations
/// needed by Sturm-sequence pivoting are provided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    #[inline]
    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        let err = f64::mul_add(a, b, -p);
        Dd { hi: p, lo: err }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        let e = lo - (s - hi);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, other: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        Dd::renorm(s.hi, lo)
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, other: Dd) -> Dd {
        self + Dd {
            hi: -other.hi,
            lo: -other.lo,
        }
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, other: Dd) -> Dd {
        let p = Dd::two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        Dd::renorm(p.hi, lo)
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self - other * Dd::from(q1);
        let q2 = r.hi / other.hi;
        Dd::renorm(q1, q2)
    }
}
