//! `mfjp`: analysis pipeline for finite-state mean-field jump processes.
//!
//! Subcommands cover the full workflow: validate a model file, locate the
//! mean-field attractors, price quasipotentials and the attractor cost
//! matrix, build the cycle hierarchy (Λ, c*, minimiser set), compute
//! exact spectra and mixing curves, run event-driven simulations and the
//! particle-injection annealing schedule, or chain everything with
//! `pipeline`. Exit codes: 0 success, 2 validation error, 3 numerical
//! failure, 4 enumeration cap exceeded.

mod artifacts;

use artifacts::{fmt_f64, ArtifactWriter};
use clap::{Args, Parser, Subcommand};
use mfjp_core::action::{path_action, terminal_cost, ControlledPath};
use mfjp_core::dynamics::{find_attractors, mve_flow, AttractorSet};
use mfjp_core::error::Error;
use mfjp_core::hierarchy::build_cycle_hierarchy;
use mfjp_core::model::{catalog, model_from_json, LatticeMeasure, Model, ModelFile, SimplexPoint};
use mfjp_core::numerics::linear_fit;
use mfjp_core::quasipotential::{
    build_cost_lattice, quasipotential_on, vtilde_matrix, CostMatrixFile,
};
use mfjp_core::simulate::{
    anneal_n0, anneal_path, anneal_success, gillespie_path, hitting_time, AnnealConfig,
    AnnealEvent, HittingSpec, SimConfig,
};
use mfjp_core::spectral::{analyse, build_generator, invariant_measure, tv_mixing_curve};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mfjp", version, about = "Mean-field jump process analysis")]
struct Cli {
    /// Worker thread count (default: all cores, or MFJP_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArg {
    /// Model JSON file, or `catalog:<name>` for a built-in
    /// (nonint, cw, cw-asymmetric, cyc3, triple-well).
    #[arg(long)]
    model: String,
}

impl ModelArg {
    fn load(&self) -> Result<(Model, Vec<u8>), Error> {
        if let Some(name) = self.model.strip_prefix("catalog:") {
            let model = catalog::by_name(name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown catalog model `{name}`")))?;
            let bytes = serde_json::to_vec_pretty(&ModelFile::from_model(&model))?;
            return Ok((model, bytes));
        }
        let bytes = std::fs::read(&self.model)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Format("model file is not UTF-8".into()))?;
        Ok((model_from_json(&text)?, bytes))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check irreducibility and positive rate bounds on a grid.
    Validate {
        #[command(flatten)]
        model: ModelArg,
        /// Validation grid resolution.
        #[arg(long, default_value_t = 100)]
        grid: u64,
    },
    /// Integrate the mean-field ODE and export the path as CSV.
    Flow {
        #[command(flatten)]
        model: ModelArg,
        /// Start point: comma-separated weights or a state label.
        #[arg(long)]
        from: String,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Locate and classify the fixed points of the mean-field ODE.
    Attractors {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multi-start count (default 10 per state dimension, min 30).
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Terminal cost S_T by path optimisation.
    Cost {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, default_value_t = 8)]
        knots: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the action of a CSV path (format as written by `flow`).
    Action {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quasipotential V(from, to) on a lattice of the given resolution.
    Quasipotential {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated weights, a state label, or @i (attractor index).
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 100)]
        resolution: u64,
        /// Avoid the other attractors (the constrained cost Ṽ).
        #[arg(long, default_value_t = false)]
        exclude_others: bool,
        /// Exclusion-ball radius (default: quarter of the attractor gap).
        #[arg(long)]
        rho0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the polygonal minimising path as CSV.
        #[arg(long)]
        path_out: Option<PathBuf>,
    },
    /// Cost matrix between stable attractors (V and Ṽ).
    CostMatrix {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 100)]
        resolution: u64,
        #[arg(long)]
        rho0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cycle hierarchy, Λ, c*, and the minimiser set from a cost matrix.
    Hierarchy {
        /// Cost-matrix JSON (hand-written or from `cost-matrix`).
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariant measure, reversibility, and second eigenvalue at one or
    /// more particle counts.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
        /// Single particle count.
        #[arg(long = "N")]
        n: Option<u64>,
        /// Range start:end:stride, e.g. 40:400:40.
        #[arg(long = "N-range")]
        n_range: Option<String>,
        /// Also compute the full spectrum (dense sizes only).
        #[arg(long, default_value_t = false)]
        full_spectrum: bool,
        #[arg(long)]
        out: PathBuf,
        /// CSV table (N, lambda2, log_lambda2_over_N).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Total-variation mixing curve from a point mass.
    Mix {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        from: String,
        /// Comma-separated times, or geometric grid start:end:points.
        #[arg(long)]
        times: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact event-driven simulation; events as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        init: String,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hitting-time experiment across replicas.
    Hit {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        init: String,
        /// Target balls `point:radius` (point = weights, label, or @i).
        #[arg(long, required = true)]
        target: Vec<String>,
        /// Optional kill region, same syntax.
        #[arg(long)]
        avoid: Vec<String>,
        #[arg(long, default_value_t = 1e6)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Particle-injection annealing: one event path, or success fractions
    /// across replicas when --replicas and --target are given.
    Anneal {
        #[command(flatten)]
        model: ModelArg,
        /// Schedule constant; injections at t_N = exp(N c) - 2.
        #[arg(long)]
        c: f64,
        /// State label the injected particles start in.
        #[arg(long)]
        z0: String,
        /// Initial point (rounded to N_0 particles); default uniform.
        #[arg(long)]
        init: Option<String>,
        #[arg(long, default_value_t = 1000.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        replicas: usize,
        /// Checkpoint times for the success fractions.
        #[arg(long)]
        checkpoints: Option<String>,
        /// Target balls `point:radius` for the success mode.
        #[arg(long)]
        target: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full analysis chain: validate, attractors, cost matrix, hierarchy,
    /// and (when reversible) the second-eigenvalue scaling table.
    Pipeline {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 100)]
        resolution: u64,
        /// Range start:end:stride for the eigenvalue table.
        #[arg(long = "N-range", default_value = "40:200:40")]
        n_range: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("MFJP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. }
        | Error::UnknownState(_)
        | Error::UnknownIdentifier(_)
        | Error::NotIrreducible
        | Error::RateOutOfBounds { .. }
        | Error::InvalidModel(_)
        | Error::InvalidInput(_)
        | Error::Io(_)
        | Error::Format(_) => 2,
        Error::CapExceeded { .. } => 4,
        _ => 3,
    }
}

/// Parse a point: comma-separated weights, a state label (point mass), or
/// `@i` for the i-th attractor of `set`.
fn parse_point(
    model: &Model,
    set: Option<&AttractorSet>,
    text: &str,
) -> Result<SimplexPoint, Error> {
    if let Some(idx) = text.strip_prefix('@') {
        let i: usize = idx
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad attractor index `{text}`")))?;
        let set = set.ok_or_else(|| {
            Error::InvalidInput("@i points need attractors; internal ordering error".into())
        })?;
        return set
            .attractors
            .get(i)
            .map(|a| a.location.clone())
            .ok_or_else(|| Error::InvalidInput(format!("no attractor with index {i}")));
    }
    if text.contains(',') {
        let weights: Result<Vec<f64>, _> =
            text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let weights = weights.map_err(|_| Error::InvalidInput(format!("bad point `{text}`")))?;
        if weights.len() != model.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} components, model has {} states",
                weights.len(),
                model.dim()
            )));
        }
        return SimplexPoint::new(weights);
    }
    let z = model.space().index_of(text.trim())?;
    Ok(SimplexPoint::dirac(model.dim(), z))
}

fn parse_ball(
    model: &Model,
    set: Option<&AttractorSet>,
    text: &str,
) -> Result<(SimplexPoint, f64), Error> {
    let (point_text, radius_text) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("ball `{text}` is not `point:radius`")))?;
    let radius: f64 = radius_text
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad radius in `{text}`")))?;
    Ok((parse_point(model, set, point_text)?, radius))
}

fn parse_times(text: &str) -> Result<Vec<f64>, Error> {
    if let Some((rest, count)) = text.split(':').collect::<Vec<_>>().split_last() {
        if count.len() == 2 {
            let a: f64 = count[0].parse().map_err(|_| bad_times(text))?;
            let b: f64 = count[1].parse().map_err(|_| bad_times(text))?;
            let k: usize = rest.parse().map_err(|_| bad_times(text))?;
            if a <= 0.0 || b <= a || k < 2 {
                return Err(bad_times(text));
            }
            let ratio = (b / a).powf(1.0 / (k - 1) as f64);
            return Ok((0..k).map(|i| a * ratio.powi(i as i32)).collect());
        }
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad_times(text)))
        .collect()
}

fn bad_times(text: &str) -> Error {
    Error::InvalidInput(format!(
        "bad times `{text}`: use t1,t2,... or start:end:points"
    ))
}

fn parse_range(text: &str) -> Result<Vec<u64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "bad range `{text}`: use start:end:stride"
        )));
    }
    let a: u64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidInput("bad range".into()))?;
    let b: u64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidInput("bad range".into()))?;
    let s: u64 = parts[2]
        .parse()
        .map_err(|_| Error::InvalidInput("bad range".into()))?;
    if s == 0 || b < a {
        return Err(Error::InvalidInput(format!("bad range `{text}`")));
    }
    Ok((a..=b).step_by(s as usize).collect())
}

fn default_starts(model: &Model, starts: Option<usize>) -> usize {
    starts.unwrap_or_else(|| (10 * model.dim()).max(30))
}

fn path_csv_rows(
    labels: &[String],
    times: &[f64],
    points: &[SimplexPoint],
) -> (String, Vec<String>) {
    let header = format!("t,{}", labels.join(","));
    let rows = times
        .iter()
        .zip(points)
        .map(|(t, p)| {
            let mut row = fmt_f64(*t);
            for w in p.weights() {
                row.push(',');
                row.push_str(&fmt_f64(*w));
            }
            row
        })
        .collect();
    (header, rows)
}

fn read_path_csv(model: &Model, path: &PathBuf) -> Result<ControlledPath, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty path file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != model.dim() + 1 || cols[0] != "t" {
        return Err(Error::Format(format!(
            "path header must be `t,{}`",
            model.space().labels().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let fields = fields.map_err(|_| Error::Format(format!("bad row {}", lineno + 2)))?;
        if fields.len() != model.dim() + 1 {
            return Err(Error::Format(format!("bad row {}", lineno + 2)));
        }
        times.push(fields[0]);
        points.push(SimplexPoint::new(fields[1..].to_vec())?);
    }
    ControlledPath::new(times, points)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { model, grid } => {
            let (m, _) = model.load()?;
            let report = m.validate(grid)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Flow {
            model,
            from,
            t_max,
            dt,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let start = parse_point(&m, None, &from)?;
            let path = mve_flow(&m, &start, t_max, dt)?;
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![]);
            let (header, rows) = path_csv_rows(m.space().labels(), &path.times, &path.points);
            writer.write_csv(&out, &header, &rows)?;
            writer.finish()?;
            println!(
                "terminal point {:?}, drift norm {:.3e}",
                path.terminal().weights(),
                path.terminal_drift_norm
            );
            Ok(())
        }
        Command::Attractors {
            model,
            seed,
            starts,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let set = find_attractors(&m, default_starts(&m, starts), seed)?;
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_json(&out, &set)?;
            writer.finish()?;
            for a in &set.attractors {
                println!(
                    "attractor {} at {:?}: {:?}",
                    a.index,
                    a.location.weights(),
                    a.stability
                );
            }
            Ok(())
        }
        Command::Cost {
            model,
            from,
            to,
            t,
            knots,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let nu = parse_point(&m, None, &from)?;
            let xi = parse_point(&m, None, &to)?;
            let result = terminal_cost(&m, &nu, &xi, t, knots)?;
            #[derive(Serialize)]
            struct CostReport {
                value: f64,
                converged: bool,
                knot_times: Vec<f64>,
                knots: Vec<Vec<f64>>,
            }
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![]);
            writer.write_json(
                &out,
                &CostReport {
                    value: result.value,
                    converged: result.converged,
                    knot_times: result.path.times.clone(),
                    knots: result
                        .path
                        .points
                        .iter()
                        .map(|p| p.weights().to_vec())
                        .collect(),
                },
            )?;
            writer.finish()?;
            println!(
                "terminal cost {:.6e} (converged: {})",
                result.value, result.converged
            );
            Ok(())
        }
        Command::Action { model, path, out } => {
            let (m, bytes) = model.load()?;
            let controlled = read_path_csv(&m, &path)?;
            let value = path_action(&m, &controlled)?;
            #[derive(Serialize)]
            struct ActionReport {
                value: f64,
                nodes: usize,
                duration: f64,
            }
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![]);
            writer.write_json(
                &out,
                &ActionReport {
                    value,
                    nodes: controlled.points.len(),
                    duration: controlled.duration(),
                },
            )?;
            writer.finish()?;
            println!("action {value:.6e}");
            Ok(())
        }
        Command::Quasipotential {
            model,
            from,
            to,
            resolution,
            exclude_others,
            rho0,
            seed,
            out,
            path_out,
        } => {
            let (m, bytes) = model.load()?;
            let needs_attractors = from.starts_with('@') || to.starts_with('@') || exclude_others;
            let set = if needs_attractors {
                Some(find_attractors(&m, default_starts(&m, None), seed)?)
            } else {
                None
            };
            let nu = parse_point(&m, set.as_ref(), &from)?;
            let xi = parse_point(&m, set.as_ref(), &to)?;
            let forbidden: Vec<(SimplexPoint, f64)> = if exclude_others {
                let set = set.as_ref().unwrap();
                let stable: Vec<&mfjp_core::dynamics::Attractor> = set.stable();
                let min_sep = set.min_pairwise_distance();
                let radius = rho0.unwrap_or(0.25 * min_sep);
                stable
                    .iter()
                    .filter(|a| a.location.dist(&nu) > radius && a.location.dist(&xi) > radius)
                    .map(|a| (a.location.clone(), radius))
                    .collect()
            } else {
                Vec::new()
            };
            let lattice = build_cost_lattice(&m, resolution, &forbidden)?;
            let (value, polygonal) = quasipotential_on(&lattice, &nu, &xi)?;
            #[derive(Serialize)]
            struct QpReport {
                value: f64,
                resolution: u64,
                excluded_balls: usize,
                path_nodes: usize,
            }
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_json(
                &out,
                &QpReport {
                    value,
                    resolution,
                    excluded_balls: forbidden.len(),
                    path_nodes: polygonal.len(),
                },
            )?;
            if let Some(path_out) = path_out {
                let steps: Vec<f64> = (0..polygonal.len()).map(|i| i as f64).collect();
                let (header, rows) = path_csv_rows(m.space().labels(), &steps, &polygonal);
                writer.write_csv(&path_out, &header, &rows)?;
            }
            writer.finish()?;
            println!("V = {value:.6e}");
            Ok(())
        }
        Command::CostMatrix {
            model,
            resolution,
            rho0,
            seed,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let set = find_attractors(&m, default_starts(&m, None), seed)?;
            let cost = vtilde_matrix(&m, &set, resolution, rho0)?;
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_json(&out, &CostMatrixFile::from_matrix(&cost))?;
            writer.finish()?;
            println!("{} stable attractors; vtilde written", cost.size());
            Ok(())
        }
        Command::Hierarchy { cost, out } => {
            let text = std::fs::read_to_string(&cost)?;
            // Accept both a bare CostMatrixFile and a wrapped report.
            let file: CostMatrixFile = match serde_json::from_str(&text) {
                Ok(f) => f,
                Err(_) => {
                    #[derive(serde::Deserialize)]
                    struct Wrapped {
                        report: CostMatrixFile,
                    }
                    serde_json::from_str::<Wrapped>(&text)?.report
                }
            };
            let matrix = file.to_matrix()?;
            let report = build_cycle_hierarchy(&matrix)?;
            #[derive(Serialize)]
            struct HierarchyArtifact<'a> {
                #[serde(flatten)]
                report: &'a mfjp_core::hierarchy::HierarchyReport,
                tree: String,
            }
            let mut writer = ArtifactWriter::new(Some(text.as_bytes()), vec![]);
            writer.write_json(
                &out,
                &HierarchyArtifact {
                    report: &report,
                    tree: report.render_tree(),
                },
            )?;
            writer.finish()?;
            println!(
                "Lambda = {} (cross-check {}), c* = {}, minimisers {:?}",
                report.lambda, report.lambda_cross_check, report.c_star, report.l_tilde_0
            );
            print!("{}", report.render_tree());
            Ok(())
        }
        Command::Spectrum {
            model,
            n,
            n_range,
            full_spectrum,
            out,
            csv,
        } => {
            let (m, bytes) = model.load()?;
            let ns: Vec<u64> = match (n, n_range) {
                (Some(n), None) => vec![n],
                (None, Some(range)) => parse_range(&range)?,
                _ => {
                    return Err(Error::InvalidInput(
                        "give exactly one of --N or --n-range".into(),
                    ))
                }
            };
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            for &n in &ns {
                let report = analyse(&m, n, false, full_spectrum)?;
                if let Some(l2) = report.lambda_2 {
                    rows.push(format!(
                        "{n},{},{}",
                        fmt_f64(l2),
                        fmt_f64(l2.ln() / n as f64)
                    ));
                }
                reports.push(report);
            }
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![]);
            writer.write_json(&out, &reports)?;
            if let Some(csv_path) = csv {
                writer.write_csv(&csv_path, "N,lambda2,log_lambda2_over_N", &rows)?;
            }
            writer.finish()?;
            for r in &reports {
                println!(
                    "N = {}: reversible = {}, lambda2 = {:?}",
                    r.n, r.reversible, r.lambda_2
                );
            }
            Ok(())
        }
        Command::Mix {
            model,
            n,
            from,
            times,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let start_point = parse_point(&m, None, &from)?;
            let start = LatticeMeasure::round_from(&start_point, n)?;
            let times = parse_times(&times)?;
            let q = build_generator(&m, n)?;
            let pi = invariant_measure(&q)?;
            let tv = tv_mixing_curve(&q, &pi, &start, &times)?;
            let rows: Vec<String> = times
                .iter()
                .zip(&tv)
                .map(|(t, v)| format!("{},{}", fmt_f64(*t), fmt_f64(*v)))
                .collect();
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![]);
            writer.write_csv(&out, "t,tv_distance", &rows)?;
            writer.finish()?;
            Ok(())
        }
        Command::Simulate {
            model,
            n,
            init,
            t_max,
            seed,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let initial = LatticeMeasure::round_from(&parse_point(&m, None, &init)?, n)?;
            let cfg = SimConfig::new(initial, t_max, seed)?;
            let events = gillespie_path(&m, &cfg);
            let labels = m.space().labels();
            let header = format!("t,edge_from,edge_to,{}", labels.join(","));
            let rows: Vec<String> = events
                .iter()
                .map(|ev| {
                    let (a, b) = m.edges()[ev.edge];
                    let counts: Vec<String> = ev.counts.iter().map(|c| c.to_string()).collect();
                    format!(
                        "{},{},{},{}",
                        fmt_f64(ev.t),
                        labels[a],
                        labels[b],
                        counts.join(",")
                    )
                })
                .collect();
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_csv(&out, &header, &rows)?;
            writer.finish()?;
            println!("{} events over [0, {t_max}]", events.len());
            Ok(())
        }
        Command::Hit {
            model,
            n,
            init,
            target,
            avoid,
            t_max,
            replicas,
            seed,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let needs_attractors =
                target.iter().chain(&avoid).any(|t| t.contains('@')) || init.starts_with('@');
            let set = if needs_attractors {
                Some(find_attractors(&m, default_starts(&m, None), seed)?)
            } else {
                None
            };
            let initial = LatticeMeasure::round_from(&parse_point(&m, set.as_ref(), &init)?, n)?;
            let spec = HittingSpec {
                targets: target
                    .iter()
                    .map(|t| parse_ball(&m, set.as_ref(), t))
                    .collect::<Result<_, _>>()?,
                avoid: avoid
                    .iter()
                    .map(|t| parse_ball(&m, set.as_ref(), t))
                    .collect::<Result<_, _>>()?,
            };
            let cfg = SimConfig::new(initial, t_max, seed)?;
            let summary = hitting_time(&m, &cfg, &spec, replicas)?;
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_json(&out, &summary)?;
            writer.finish()?;
            println!(
                "mean = {:?}, (1/N)log mean = {:?}, censored = {}, killed = {}",
                summary.mean, summary.log_mean_over_n, summary.censored, summary.killed
            );
            Ok(())
        }
        Command::Anneal {
            model,
            c,
            z0,
            init,
            t_max,
            seed,
            replicas,
            checkpoints,
            target,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let z0_index = m.space().index_of(z0.trim())?;
            let n0 = anneal_n0(c)?;
            let init_point = match &init {
                Some(text) => parse_point(&m, None, text)?,
                None => SimplexPoint::uniform(m.dim()),
            };
            let initial = LatticeMeasure::round_from(&init_point, n0)?;
            let cfg = AnnealConfig::new(c, z0_index, initial, t_max, seed)?;
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            if replicas > 0 {
                let times = parse_times(&checkpoints.ok_or_else(|| {
                    Error::InvalidInput("success mode needs --checkpoints".into())
                })?)?;
                if target.is_empty() {
                    return Err(Error::InvalidInput("success mode needs --target".into()));
                }
                let spec = HittingSpec {
                    targets: target
                        .iter()
                        .map(|t| parse_ball(&m, None, t))
                        .collect::<Result<_, _>>()?,
                    avoid: Vec::new(),
                };
                let result = anneal_success(&m, &cfg, &spec, &times, replicas)?;
                writer.write_json(&out, &result)?;
                writer.finish()?;
                println!("fractions {:?}", result.fractions);
            } else {
                let events = anneal_path(&m, &cfg);
                let labels = m.space().labels();
                let header = format!("t,edge_from,edge_to,{}", labels.join(","));
                let rows: Vec<String> = events
                    .iter()
                    .map(|ev| match ev {
                        AnnealEvent::Jump { t, edge, counts } => {
                            let (a, b) = m.edges()[*edge];
                            let cs: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                            format!(
                                "{},{},{},{}",
                                fmt_f64(*t),
                                labels[a],
                                labels[b],
                                cs.join(",")
                            )
                        }
                        AnnealEvent::Injection {
                            t, state, counts, ..
                        } => {
                            let cs: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                            format!("{},inject,{},{}", fmt_f64(*t), labels[*state], cs.join(","))
                        }
                    })
                    .collect();
                writer.write_csv(&out, &header, &rows)?;
                writer.finish()?;
                println!("{} events (N_0 = {n0})", rows.len());
            }
            Ok(())
        }
        Command::Pipeline {
            model,
            resolution,
            n_range,
            seed,
            out,
        } => {
            let (m, bytes) = model.load()?;
            let validation = m.validate(100)?;
            let set = find_attractors(&m, default_starts(&m, None), seed)?;
            let cost = vtilde_matrix(&m, &set, resolution, None)?;
            let hierarchy = build_cycle_hierarchy(&cost)?;
            let ns = parse_range(&n_range)?;
            let mut spectral_rows = Vec::new();
            let mut reversible = true;
            for &n in &ns {
                let report = analyse(&m, n, false, false)?;
                reversible &= report.reversible;
                if let Some(l2) = report.lambda_2 {
                    spectral_rows.push((n, l2, l2.ln() / n as f64));
                } else {
                    break;
                }
            }
            let slope = if reversible && spectral_rows.len() >= 2 {
                let xs: Vec<f64> = spectral_rows.iter().map(|r| r.0 as f64).collect();
                let ys: Vec<f64> = spectral_rows.iter().map(|r| r.1.ln()).collect();
                Some(linear_fit(&xs, &ys).0)
            } else {
                None
            };
            #[derive(Serialize)]
            struct PipelineReport {
                validation: mfjp_core::model::ValidationReport,
                attractors: AttractorSet,
                cost_matrix: CostMatrixFile,
                hierarchy: mfjp_core::hierarchy::HierarchyReport,
                reversible: bool,
                lambda2_table: Vec<(u64, f64, f64)>,
                log_lambda2_slope: Option<f64>,
            }
            let report = PipelineReport {
                validation,
                attractors: set,
                cost_matrix: CostMatrixFile::from_matrix(&cost),
                reversible,
                lambda2_table: spectral_rows,
                log_lambda2_slope: slope,
                hierarchy,
            };
            let mut writer = ArtifactWriter::new(Some(&bytes), vec![seed]);
            writer.write_json(&out, &report)?;
            writer.finish()?;
            println!(
                "Lambda = {}, c* = {}, minimisers {:?}, slope {:?}",
                report.hierarchy.lambda,
                report.hierarchy.c_star,
                report.hierarchy.l_tilde_0,
                report.log_lambda2_slope
            );
            Ok(())
        }
    }
}
