//! Exact event-driven Monte Carlo for the empirical-measure chain.
//!
//! Simulation acts on the counts vector directly: each edge `(z, z')`
//! fires at rate `counts(z) λ_{z,z'}(counts/N)`, which induces the same
//! law as per-particle simulation at `O(|E|)` work per event. Waiting
//! times are exponential with the total rate; rates are bounded, so the
//! chain never explodes. Streams are counter-based per (seed, replica,
//! stage), making every replica a pure function of its key regardless of
//! the parallel schedule.
//!
//! The annealing process interleaves this dynamics with particle
//! injection at the deterministic times `t_N = exp(N c) - 2`: at each
//! `t_N` one particle in state `z0` is added, moving the chain from
//! `M_1^{N-1}` to `M_1^N` by exact integer counts.

use crate::error::{Error, Result};
use crate::model::{LatticeMeasure, Model, SimplexPoint};
use crate::rng::Stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stage tags for stream derivation.
const STAGE_PATH: u64 = 1;
const STAGE_HIT: u64 = 2;
const STAGE_ANNEAL: u64 = 3;

/// Configuration of a fixed-`N` simulation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: u64,
    pub initial: LatticeMeasure,
    pub t_max: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(initial: LatticeMeasure, t_max: f64, seed: u64) -> Result<Self> {
        if t_max <= 0.0 {
            return Err(Error::InvalidInput("t_max must be positive".into()));
        }
        Ok(SimConfig {
            n: initial.n(),
            initial,
            t_max,
            seed,
        })
    }
}

/// One jump of the empirical-measure chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub edge: usize,
    /// Counts immediately after the jump.
    pub counts: Vec<u64>,
}

/// In-place stepper for the chain at fixed `N`.
pub struct Gillespie<'a> {
    model: &'a Model,
    pub counts: Vec<u64>,
    pub n: u64,
    pub t: f64,
    stream: Stream,
    xi: Vec<f64>,
    rates: Vec<f64>,
}

impl<'a> Gillespie<'a> {
    pub fn new(model: &'a Model, initial: &LatticeMeasure, stream: Stream) -> Self {
        Gillespie {
            model,
            counts: initial.counts().to_vec(),
            n: initial.n(),
            t: 0.0,
            stream,
            xi: vec![0.0; model.dim()],
            rates: vec![0.0; model.edges().len()],
        }
    }

    #[inline]
    fn refresh_rates(&mut self) -> f64 {
        for (x, &c) in self.xi.iter_mut().zip(&self.counts) {
            *x = c as f64 / self.n as f64;
        }
        let mut total = 0.0;
        for (k, &(z, _)) in self.model.edges().iter().enumerate() {
            let r = if self.counts[z] == 0 {
                0.0
            } else {
                self.counts[z] as f64 * self.model.edge_rate(k, &self.xi)
            };
            self.rates[k] = r;
            total += r;
        }
        total
    }

    /// Advance by one event; returns the fired edge index.
    pub fn step(&mut self) -> usize {
        let total = self.refresh_rates();
        debug_assert!(total > 0.0, "no active edge at {:?}", self.counts);
        let wait = self.stream.next_exp(total);
        let mut pick = self.stream.next_f64() * total;
        let mut edge = self.rates.len() - 1;
        for (k, &r) in self.rates.iter().enumerate() {
            if pick < r {
                edge = k;
                break;
            }
            pick -= r;
        }
        let (z, z2) = self.model.edges()[edge];
        debug_assert!(self.counts[z] > 0);
        self.counts[z] -= 1;
        self.counts[z2] += 1;
        debug_assert_eq!(self.counts.iter().sum::<u64>(), self.n);
        self.t += wait;
        edge
    }

    pub fn point(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }
}

/// Run one trajectory, recording every event.
pub fn gillespie_path(model: &Model, cfg: &SimConfig) -> Vec<JumpEvent> {
    let stream = Stream::derived(cfg.seed, 0, STAGE_PATH);
    let mut sim = Gillespie::new(model, &cfg.initial, stream);
    let mut events = Vec::new();
    loop {
        let edge = sim.step();
        if sim.t > cfg.t_max {
            break;
        }
        events.push(JumpEvent {
            t: sim.t,
            edge,
            counts: sim.counts.clone(),
        });
    }
    events
}

/// Target/avoid regions as unions of Euclidean balls on the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingSpec {
    pub targets: Vec<(SimplexPoint, f64)>,
    #[serde(default)]
    pub avoid: Vec<(SimplexPoint, f64)>,
}

impl HittingSpec {
    pub fn around(points: &[SimplexPoint], radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidInput("radius must be positive".into()));
        }
        Ok(HittingSpec {
            targets: points.iter().map(|p| (p.clone(), radius)).collect(),
            avoid: Vec::new(),
        })
    }

    fn inside(balls: &[(SimplexPoint, f64)], xi: &[f64]) -> bool {
        balls.iter().any(|(center, radius)| {
            let d2: f64 = xi
                .iter()
                .zip(center.weights())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() <= *radius
        })
    }

    pub fn in_target(&self, xi: &[f64]) -> bool {
        Self::inside(&self.targets, xi)
    }

    pub fn in_avoid(&self, xi: &[f64]) -> bool {
        !self.avoid.is_empty() && Self::inside(&self.avoid, xi)
    }
}

/// Outcome of a batch of hitting-time replicas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingSummary {
    pub replicas: usize,
    /// Sorted hitting times of the uncensored replicas.
    pub times: Vec<f64>,
    pub censored: usize,
    /// Replicas killed by the avoid region.
    pub killed: usize,
    pub mean: Option<f64>,
    /// `(1/N) log mean`, the exponent the theory predicts.
    pub log_mean_over_n: Option<f64>,
}

/// Simulate `replicas` independent chains until they enter the target.
///
/// Replicas are censored at `t_max` (reported, not dropped); entering the
/// avoid region kills a replica. Replica `r` uses the derived stream
/// `(seed, r, stage)`, so results do not depend on the thread schedule.
pub fn hitting_time(
    model: &Model,
    cfg: &SimConfig,
    spec: &HittingSpec,
    replicas: usize,
) -> Result<HittingSummary> {
    if replicas == 0 {
        return Err(Error::InvalidInput("need at least one replica".into()));
    }
    let outcomes: Vec<std::result::Result<f64, bool>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let stream = Stream::derived(cfg.seed, r as u64, STAGE_HIT);
            let mut sim = Gillespie::new(model, &cfg.initial, stream);
            if spec.in_target(&sim.point()) {
                return Ok(0.0);
            }
            loop {
                sim.step();
                if sim.t > cfg.t_max {
                    return Err(false); // censored
                }
                let xi = sim.point();
                if spec.in_avoid(&xi) {
                    return Err(true); // killed
                }
                if spec.in_target(&xi) {
                    return Ok(sim.t);
                }
            }
        })
        .collect();
    let mut times: Vec<f64> = outcomes.iter().filter_map(|o| o.ok()).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let censored = outcomes.iter().filter(|o| *o == &Err(false)).count();
    let killed = outcomes.iter().filter(|o| *o == &Err(true)).count();
    if times.is_empty() {
        return Err(Error::AllCensored(replicas));
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    Ok(HittingSummary {
        replicas,
        censored,
        killed,
        mean: Some(mean),
        log_mean_over_n: Some(mean.ln() / cfg.n as f64),
        times,
    })
}

/// Configuration of the particle-injection annealing process.
#[derive(Debug, Clone)]
pub struct AnnealConfig {
    /// Schedule constant; injections happen at `t_N = exp(N c) - 2`.
    pub c: f64,
    /// State the injected particle starts in.
    pub z0: usize,
    /// Initial counts at `N_0` particles.
    pub initial: LatticeMeasure,
    pub t_max: f64,
    pub seed: u64,
}

/// `N_0 = min{n >= 1: exp(n c) - 2 >= 0}`.
pub fn anneal_n0(c: f64) -> Result<u64> {
    if c <= 0.0 {
        return Err(Error::InvalidInput("c must be positive".into()));
    }
    let mut n = (2.0f64.ln() / c).ceil() as u64;
    if n == 0 {
        n = 1;
    }
    while (n as f64 * c).exp() - 2.0 < 0.0 {
        n += 1;
    }
    Ok(n)
}

/// Injection time of the `n`-th particle (`n > N_0`).
pub fn anneal_injection_time(c: f64, n: u64) -> f64 {
    (n as f64 * c).exp() - 2.0
}

impl AnnealConfig {
    pub fn new(c: f64, z0: usize, initial: LatticeMeasure, t_max: f64, seed: u64) -> Result<Self> {
        let n0 = anneal_n0(c)?;
        if initial.n() != n0 {
            return Err(Error::InvalidInput(format!(
                "initial measure has {} particles but N_0 = {n0} for c = {c}",
                initial.n()
            )));
        }
        if t_max <= 0.0 {
            return Err(Error::InvalidInput("t_max must be positive".into()));
        }
        Ok(AnnealConfig {
            c,
            z0,
            initial,
            t_max,
            seed,
        })
    }
}

/// Events of the annealing process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AnnealEvent {
    Jump {
        t: f64,
        edge: usize,
        counts: Vec<u64>,
    },
    Injection {
        t: f64,
        state: usize,
        new_n: u64,
        counts: Vec<u64>,
    },
}

/// Streaming annealed chain.
pub struct Annealer<'a> {
    model: &'a Model,
    pub counts: Vec<u64>,
    pub n: u64,
    pub t: f64,
    c: f64,
    z0: usize,
    next_injection: f64,
    stream: Stream,
    xi: Vec<f64>,
    rates: Vec<f64>,
}

impl<'a> Annealer<'a> {
    pub fn new(model: &'a Model, cfg: &AnnealConfig, replica: u64) -> Self {
        let n = cfg.initial.n();
        Annealer {
            model,
            counts: cfg.initial.counts().to_vec(),
            n,
            t: 0.0,
            c: cfg.c,
            z0: cfg.z0,
            next_injection: anneal_injection_time(cfg.c, n + 1),
            stream: Stream::derived(cfg.seed, replica, STAGE_ANNEAL),
            xi: vec![0.0; model.dim()],
            rates: vec![0.0; model.edges().len()],
        }
    }

    fn total_rate(&mut self) -> f64 {
        for (x, &c) in self.xi.iter_mut().zip(&self.counts) {
            *x = c as f64 / self.n as f64;
        }
        let mut total = 0.0;
        for (k, &(z, _)) in self.model.edges().iter().enumerate() {
            let r = if self.counts[z] == 0 {
                0.0
            } else {
                self.counts[z] as f64 * self.model.edge_rate(k, &self.xi)
            };
            self.rates[k] = r;
            total += r;
        }
        total
    }

    /// Advance by one event (jump or injection).
    pub fn step(&mut self) -> AnnealEvent {
        let total = self.total_rate();
        let wait = self.stream.next_exp(total);
        if self.t + wait >= self.next_injection {
            // The clock jumps to the injection; the interrupted waiting
            // time is discarded (memorylessness, and the rates change).
            self.t = self.next_injection;
            self.counts[self.z0] += 1;
            self.n += 1;
            self.next_injection = anneal_injection_time(self.c, self.n + 1);
            return AnnealEvent::Injection {
                t: self.t,
                state: self.z0,
                new_n: self.n,
                counts: self.counts.clone(),
            };
        }
        let mut pick = self.stream.next_f64() * total;
        let mut edge = self.rates.len() - 1;
        for (k, &r) in self.rates.iter().enumerate() {
            if pick < r {
                edge = k;
                break;
            }
            pick -= r;
        }
        let (z, z2) = self.model.edges()[edge];
        self.counts[z] -= 1;
        self.counts[z2] += 1;
        debug_assert_eq!(self.counts.iter().sum::<u64>(), self.n);
        self.t += wait;
        AnnealEvent::Jump {
            t: self.t,
            edge,
            counts: self.counts.clone(),
        }
    }

    pub fn point(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }
}

/// Run one annealed trajectory, recording every event.
pub fn anneal_path(model: &Model, cfg: &AnnealConfig) -> Vec<AnnealEvent> {
    let mut sim = Annealer::new(model, cfg, 0);
    let mut events = Vec::new();
    while sim.t < cfg.t_max {
        let ev = sim.step();
        let t = match &ev {
            AnnealEvent::Jump { t, .. } => *t,
            AnnealEvent::Injection { t, .. } => *t,
        };
        if t > cfg.t_max {
            break;
        }
        events.push(ev);
    }
    events
}

/// Fractions of replicas inside the target region at each checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealSuccess {
    pub checkpoints: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Normal-approximation 95% half-widths.
    pub half_widths: Vec<f64>,
    pub replicas: usize,
}

/// Monte Carlo estimate of `P(μ̄(t) ∈ target)` along a checkpoint grid.
pub fn anneal_success(
    model: &Model,
    cfg: &AnnealConfig,
    target: &HittingSpec,
    checkpoints: &[f64],
    replicas: usize,
) -> Result<AnnealSuccess> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "checkpoints must be nonempty and increasing".into(),
        ));
    }
    if replicas == 0 {
        return Err(Error::InvalidInput("need at least one replica".into()));
    }
    let hits: Vec<Vec<bool>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut sim = Annealer::new(model, cfg, r as u64);
            let mut flags = Vec::with_capacity(checkpoints.len());
            for &cp in checkpoints {
                while sim.t < cp {
                    sim.step();
                }
                flags.push(target.in_target(&sim.point()));
            }
            flags
        })
        .collect();
    let mut fractions = Vec::with_capacity(checkpoints.len());
    let mut half_widths = Vec::with_capacity(checkpoints.len());
    for k in 0..checkpoints.len() {
        let count = hits.iter().filter(|h| h[k]).count();
        let p = count as f64 / replicas as f64;
        fractions.push(p);
        half_widths.push(1.96 * (p * (1.0 - p) / replicas as f64).sqrt());
    }
    Ok(AnnealSuccess {
        checkpoints: checkpoints.to_vec(),
        fractions,
        half_widths,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    #[test]
    fn telegraph_occupation_matches_stationary_law() {
        let m = catalog::nonint(1.0, 2.0);
        let initial = LatticeMeasure::new(vec![1, 0]).unwrap();
        let mut sim = Gillespie::new(&m, &initial, Stream::derived(7, 0, STAGE_PATH));
        let t_max = 1e4;
        let mut up_time = 0.0;
        let mut last_t = 0.0;
        let mut was_up = false;
        while sim.t < t_max {
            if was_up {
                up_time += sim.t - last_t;
            }
            last_t = sim.t;
            was_up = sim.counts[1] == 1;
            sim.step();
        }
        let fraction = up_time / last_t;
        assert!(
            (fraction - 1.0 / 3.0).abs() < 0.01,
            "occupied fraction {fraction}"
        );
    }

    #[test]
    fn identical_seeds_replay_identical_paths() {
        let m = catalog::curie_weiss(1.5, 0.1);
        let cfg = SimConfig::new(LatticeMeasure::new(vec![30, 10]).unwrap(), 5.0, 99).unwrap();
        let a = gillespie_path(&m, &cfg);
        let b = gillespie_path(&m, &cfg);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.t, y.t);
            assert_eq!(x.edge, y.edge);
            assert_eq!(x.counts, y.counts);
        }
        assert!(!a.is_empty());
    }

    #[test]
    fn event_counts_respect_the_rate_bound() {
        let m = catalog::nonint(1.0, 2.0);
        let t_max = 10.0;
        let mut total_events = 0usize;
        let replicas = 20;
        for r in 0..replicas {
            let cfg = SimConfig::new(LatticeMeasure::new(vec![5, 5]).unwrap(), t_max, r).unwrap();
            total_events += gillespie_path(&m, &cfg).len();
        }
        let mean = total_events as f64 / replicas as f64;
        // N * C * |E| * t with C = 2, |E| = 2, N = 10.
        assert!(mean <= 10.0 * 2.0 * 2.0 * t_max);
    }

    #[test]
    fn paths_stay_on_the_lattice() {
        let m = catalog::cycle3(1.0, 1.0);
        let cfg = SimConfig::new(LatticeMeasure::new(vec![4, 3, 3]).unwrap(), 50.0, 5).unwrap();
        for ev in gillespie_path(&m, &cfg) {
            assert_eq!(ev.counts.iter().sum::<u64>(), 10);
        }
    }

    #[test]
    fn hitting_time_is_zero_when_starting_inside() {
        let m = catalog::nonint(1.0, 2.0);
        let initial = LatticeMeasure::new(vec![14, 6]).unwrap();
        let spec = HittingSpec::around(&[initial.to_simplex()], 0.05).unwrap();
        let cfg = SimConfig::new(initial, 10.0, 1).unwrap();
        let summary = hitting_time(&m, &cfg, &spec, 8).unwrap();
        assert_eq!(summary.times, vec![0.0; 8]);
        assert_eq!(summary.censored, 0);
    }

    #[test]
    fn censoring_is_monotone_in_t_max() {
        let m = catalog::curie_weiss(1.5, 0.0);
        // Crossing from the lower well to the upper at small N.
        let initial = LatticeMeasure::new(vec![28, 2]).unwrap();
        let target =
            HittingSpec::around(&[SimplexPoint::new(vec![0.07, 0.93]).unwrap()], 0.08).unwrap();
        let mut uncensored = Vec::new();
        for t_max in [3.0, 30.0, 300.0] {
            let cfg = SimConfig::new(initial.clone(), t_max, 4242).unwrap();
            let summary = hitting_time(&m, &cfg, &target, 40);
            let done = match summary {
                Ok(s) => s.times.len(),
                Err(Error::AllCensored(_)) => 0,
                Err(e) => panic!("unexpected error {e}"),
            };
            uncensored.push(done);
        }
        assert!(uncensored[0] <= uncensored[1] && uncensored[1] <= uncensored[2]);
        assert!(uncensored[2] > 0);
    }

    #[test]
    fn avoid_region_kills_replicas() {
        let m = catalog::nonint(1.0, 2.0);
        let initial = LatticeMeasure::new(vec![20, 0]).unwrap();
        let mut spec =
            HittingSpec::around(&[SimplexPoint::new(vec![0.0, 1.0]).unwrap()], 0.05).unwrap();
        // The equilibrium sits between start and target; kill there.
        spec.avoid = vec![(SimplexPoint::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(), 0.1)];
        let cfg = SimConfig::new(initial, 100.0, 11).unwrap();
        match hitting_time(&m, &cfg, &spec, 20) {
            Ok(summary) => assert!(summary.killed > 0),
            Err(Error::AllCensored(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn occupation_measure_matches_multinomial() {
        let m = catalog::nonint(1.0, 2.0);
        let n = 20u64;
        let initial = LatticeMeasure::new(vec![n, 0]).unwrap();
        let mut sim = Gillespie::new(&m, &initial, Stream::derived(123, 0, STAGE_PATH));
        let t_max = 1e5;
        let mut occupancy = vec![0.0f64; (n + 1) as usize];
        let mut last_t = 0.0;
        while sim.t < t_max {
            let k = sim.counts[0] as usize;
            let t_before = sim.t;
            sim.step();
            occupancy[k] += sim.t.min(t_max) - t_before;
            last_t = sim.t;
        }
        let _ = last_t;
        let total: f64 = occupancy.iter().sum();
        // Exact multinomial of the lattice (index = down-count).
        let mut tv = 0.0;
        for k in 0..=n as usize {
            let mut ln_choose = 0.0;
            for i in 1..=k {
                ln_choose += ((n as usize - k + i) as f64 / i as f64).ln();
            }
            let p = (ln_choose
                + k as f64 * (2.0f64 / 3.0).ln()
                + (n as usize - k) as f64 * (1.0f64 / 3.0).ln())
            .exp();
            tv += (occupancy[k] / total - p).abs();
        }
        tv *= 0.5;
        assert!(tv <= 0.02, "occupation TV {tv}");
    }

    #[test]
    fn anneal_schedule_formulas() {
        assert_eq!(anneal_n0(1.0).unwrap(), 1);
        let t2 = anneal_injection_time(1.0, 2);
        assert!((t2 - (2.0f64.exp() - 2.0)).abs() < 1e-12);
        assert!((t2 - 5.389_056_098_930_65).abs() < 1e-12);
        assert_eq!(anneal_n0(0.3).unwrap(), 3);
    }

    #[test]
    fn injection_preserves_integer_mass() {
        let m = catalog::nonint(1.0, 2.0);
        // c = 1 gives N_0 = 1; run long enough to see injections.
        let cfg =
            AnnealConfig::new(1.0, 0, LatticeMeasure::new(vec![0, 1]).unwrap(), 60.0, 5).unwrap();
        let events = anneal_path(&m, &cfg);
        let mut n_seen = 1u64;
        let mut last_t = 0.0;
        let mut injections = 0;
        for ev in &events {
            match ev {
                AnnealEvent::Jump { t, counts, .. } => {
                    assert!(*t >= last_t);
                    assert_eq!(counts.iter().sum::<u64>(), n_seen);
                    last_t = *t;
                }
                AnnealEvent::Injection {
                    t,
                    state,
                    new_n,
                    counts,
                } => {
                    assert_eq!(*state, 0);
                    assert_eq!(*new_n, n_seen + 1);
                    // Injections land exactly on the schedule.
                    let expected = anneal_injection_time(1.0, *new_n);
                    assert!((t - expected).abs() < 1e-12);
                    assert_eq!(counts.iter().sum::<u64>(), *new_n);
                    n_seen = *new_n;
                    last_t = *t;
                    injections += 1;
                }
            }
        }
        assert!(injections >= 3, "saw {injections} injections");
    }

    #[test]
    fn injection_example_from_two_particles() {
        // counts (1,1) at N = 2, inject `down`: counts (2,1), mu = (2/3, 1/3).
        let m = catalog::nonint(1.0, 2.0);
        let cfg =
            AnnealConfig::new(0.52, 0, LatticeMeasure::new(vec![1, 1]).unwrap(), 10.0, 1).unwrap();
        let mut sim = Annealer::new(&m, &cfg, 0);
        // Force the state to (1,1) and step until the injection fires.
        loop {
            match sim.step() {
                AnnealEvent::Injection { counts, new_n, .. } => {
                    assert_eq!(new_n, 3);
                    assert_eq!(counts.iter().sum::<u64>(), 3);
                    assert_eq!(counts[0], sim.counts[0]);
                    break;
                }
                AnnealEvent::Jump { .. } => continue,
            }
        }
        let mu = sim.point();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_attractor_anneal_converges() {
        // c = 0.1 grows the population to ~60 by t = 400, so the fixed
        // ball around the unique attractor swallows the CLT fluctuations.
        let m = catalog::nonint(1.0, 2.0);
        let n0 = anneal_n0(0.1).unwrap();
        let initial =
            LatticeMeasure::round_from(&SimplexPoint::new(vec![0.0, 1.0]).unwrap(), n0).unwrap();
        let cfg = AnnealConfig::new(0.1, 0, initial, 400.0, 2024).unwrap();
        let target = HittingSpec::around(
            &[SimplexPoint::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap()],
            0.2,
        )
        .unwrap();
        let result = anneal_success(&m, &cfg, &target, &[50.0, 200.0, 390.0], 60).unwrap();
        let last = *result.fractions.last().unwrap();
        assert!(last >= 0.9, "late fraction {last}");
    }
}
