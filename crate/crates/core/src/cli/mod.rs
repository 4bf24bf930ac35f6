//! Command-line front end: `chainwaves <subcommand> [--config FILE] [--out DIR]`.
//!
//! Every subcommand writes CSV/JSON artifacts plus `resolved_config.json` to
//! the output directory. Exit codes: 0 success, 2 configuration error,
//! 3 solver failure, 4 validation failure.

pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

use crate::continuation::{bifurcation_inventory, continue_branch, onset_estimate, Branch};
use crate::cradle::{critical_points, distinct_orbits, CriticalPointSet};
use crate::error::{Error, Result};
use crate::galerkin::LoopState;
use crate::homogeneous::{check_model, orbit_scan, scalar_orbit, scalar_period};
use crate::lattice::LatticeModel;
use crate::spectrum::{dispersion, non_resonance_check};
use crate::symmetry::{build_isotropy, GroupLabel};
use crate::timedomain::verify_periodicity;

pub use config::RunConfig;
use output::{num, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "chainwaves", version, about = "Periodic orbits of cyclic oscillator chains")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "CHAINWAVES_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed of the cradle multistart.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear frequencies ν_k.
    Dispersion,
    /// Non-resonance check lν_k ≠ ν_j.
    Resonances {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Fixed-point space dimensions of the isotropy groups.
    Fixdim,
    /// Continue branches bifurcating from mode k.
    Branch {
        #[arg(long)]
        k: Option<usize>,
        /// t, s or stilde; all three when omitted.
        #[arg(long)]
        family: Option<GroupLabel>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Integrate a LoopState over one period and report the return distance.
    Validate {
        #[arg(long = "loop")]
        loop_path: Option<PathBuf>,
    },
    /// Critical points of the reduced potential (W''(0) = 0).
    Cradle {
        /// Frequency as a multiple of ω (replaces the configured list).
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Planar-map scan and scalar oscillator of the homogeneous chain.
    Homog {
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        energy: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::Resonances { .. } => "resonances",
            Command::Fixdim => "fixdim",
            Command::Branch { .. } => "branch",
            Command::Validate { .. } => "validate",
            Command::Cradle { .. } => "cradle",
            Command::Homog { .. } => "homog",
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::PotentialRole { .. }
        | Error::Json(_)
        | Error::Precondition(_)
        | Error::InvalidGroup(_)
        | Error::Resonant { .. }
        | Error::DegenerateSpectrum => 2,
        Error::NoConvergence { .. } | Error::Truncation(_) | Error::Integration(_) | Error::NonFinite(_) => 3,
        Error::Validation(_) => 4,
        Error::NotIdempotent(_) | Error::Io(_) => 1,
    }
}

/// Folds the command-line overrides into the configuration.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.cradle.search.seed = seed;
    }
    match &cli.command {
        Command::Resonances { k: Some(k) } => cfg.resonances.k = Some(*k),
        Command::Branch { k, family, steps } => {
            if let Some(k) = k {
                cfg.branch.k = *k;
            }
            if let Some(f) = family {
                cfg.branch.families = vec![*f];
            }
            if let Some(s) = steps {
                cfg.continuation.max_steps = *s;
            }
        }
        Command::Validate { loop_path: Some(p) } => cfg.validate.loop_path = Some(p.clone()),
        Command::Cradle { nu: Some(nu) } => cfg.cradle.nu_ratios = vec![*nu],
        Command::Homog { grid, iters, energy } => {
            if let Some(g) = grid {
                cfg.homog.grid = *g;
            }
            if let Some(i) = iters {
                cfg.homog.iters = *i;
            }
            if let Some(e) = energy {
                cfg.homog.energy = *e;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let out = OutputDir::create(&cli.common.out, cli.command.name(), cfg.hash())?;
    out.write_json("resolved_config.json", &cfg)?;
    let task = || dispatch(&cli.command, &cfg, &out);
    match cli.common.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(task),
        None => task(),
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    match cmd {
        Command::Dispersion => run_dispersion(cfg, out),
        Command::Resonances { .. } => run_resonances(cfg, out),
        Command::Fixdim => run_fixdim(cfg, out),
        Command::Branch { .. } => run_branch(cfg, out),
        Command::Validate { .. } => run_validate(cfg, out),
        Command::Cradle { .. } => run_cradle(cfg, out),
        Command::Homog { .. } => run_homog(cfg, out),
    }
}

fn run_dispersion(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let table = dispersion(&model);
    let rows: Vec<Vec<String>> = table
        .entries
        .iter()
        .map(|e| vec![e.k.to_string(), num(e.nu), num(e.nu_sq), e.bifurcating.to_string()])
        .collect();
    out.write_csv("dispersion.csv", &["k", "nu", "nu_sq", "bifurcating"], &rows)?;
    out.write_json("dispersion.json", &table)?;
    for e in &table.entries {
        println!("k = {:>3}  nu = {}", e.k, num(e.nu));
    }
    Ok(())
}

fn run_resonances(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let modes: Vec<usize> = match cfg.resonances.k {
        Some(k) => vec![k],
        None => dispersion(&model).entries.iter().filter(|e| e.bifurcating).map(|e| e.k).collect(),
    };
    let reports = modes
        .iter()
        .map(|&k| non_resonance_check(&model, k, cfg.resonances.l_max))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for r in &reports {
        for p in &r.resonant_pairs {
            rows.push(vec![r.k.to_string(), p.l.to_string(), p.j.to_string(), num(p.nu_j), num(p.l_nu_k)]);
        }
        println!("k = {:>3}  {}", r.k, if r.non_resonant { "non-resonant" } else { "resonant" });
    }
    out.write_csv("resonances.csv", &["k", "l", "j", "nu_j", "l_nu_k"], &rows)?;
    out.write_json("resonances.json", &reports)?;
    Ok(())
}

#[derive(Serialize)]
struct FixdimRow {
    group: String,
    k: usize,
    /// Dimension inside the block of mode `k` (none for the cradle groups).
    block_dim: Option<usize>,
    /// First-harmonic fixed-space dimension with the abstract action.
    dim: usize,
    /// Same with the reflection sign of the configured model.
    model_dim: Option<usize>,
}

fn run_fixdim(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let n = model.n;
    let mut specs: Vec<(GroupLabel, usize)> = Vec::new();
    for label in GroupLabel::families() {
        let ks: Vec<usize> = match label {
            GroupLabel::T => (1..=n / 2).chain(std::iter::once(n)).collect(),
            _ => (1..(n + 1) / 2).collect(),
        };
        specs.extend(ks.into_iter().map(|k| (label, k)));
    }
    specs.push((GroupLabel::CradleS, 0));
    specs.push((GroupLabel::CradleSTilde, 0));
    let mut rows = Vec::new();
    for (label, k) in specs {
        let group = build_isotropy(label, n, k)?;
        let dim = group.fixed_space(1, false)?.harmonic_dim(1);
        let block_dim = (k > 0).then(|| group.block_dim(k));
        let model_dim = match group.for_model(&model) {
            Ok(g) => Some(g.fixed_space(1, false)?.harmonic_dim(1)),
            Err(_) => None,
        };
        match block_dim {
            Some(b) => println!("{:<9} k = {:>2}  block {b}  first harmonic {dim}", label.name(), k),
            None => println!("{:<9}         first harmonic {dim}", label.name()),
        }
        rows.push(FixdimRow { group: label.name().to_string(), k, block_dim, dim, model_dim });
    }
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let opt = |v: Option<usize>| v.map_or(String::new(), |d| d.to_string());
            vec![r.group.clone(), r.k.to_string(), opt(r.block_dim), r.dim.to_string(), opt(r.model_dim)]
        })
        .collect();
    out.write_csv("fixdim.csv", &["group", "k", "block_dim", "dim", "model_dim"], &csv)?;
    out.write_json("fixdim.json", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct BranchSummary<'a> {
    family: GroupLabel,
    pattern: &'static str,
    k: usize,
    nu_k: f64,
    onset_extrapolated: f64,
    points: usize,
    termination: &'a crate::continuation::Termination,
}

fn run_branch(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    use rayon::prelude::*;
    let model = cfg.model()?;
    let k = cfg.branch.k;
    let entry = bifurcation_inventory(&model)?
        .into_iter()
        .find(|e| e.k == k)
        .ok_or_else(|| Error::Precondition(format!("mode k = {k} does not bifurcate")))?;
    if let Some(p) = &entry.resonance {
        return Err(Error::Resonant { k, l: p.l, j: p.j });
    }
    let results: Vec<Result<(Branch, f64)>> = cfg
        .branch
        .families
        .par_iter()
        .map(|&family| {
            let branch = continue_branch(&model, k, family, &cfg.continuation)?;
            let onset = onset_estimate(&model, k, family, cfg.branch.onset_r, &cfg.continuation)?;
            Ok((branch, onset.extrapolated))
        })
        .collect();
    let mut summaries = Vec::new();
    let mut first_err = None;
    for (family, res) in cfg.branch.families.iter().zip(results) {
        match res {
            Ok((branch, onset)) => {
                write_branch(out, &branch, cfg.branch.snapshot_every)?;
                println!(
                    "{:<3} {:<5} points {:>4}  onset {}  {:?}",
                    family.name(),
                    branch.pattern,
                    branch.points.len(),
                    num(onset),
                    branch.termination
                );
                summaries.push((branch, onset));
            }
            Err(e) => {
                eprintln!("{}: {e}", family.name());
                first_err.get_or_insert(e);
            }
        }
    }
    let json: Vec<BranchSummary> = summaries
        .iter()
        .map(|(b, onset)| BranchSummary {
            family: b.family,
            pattern: b.pattern,
            k: b.k,
            nu_k: b.onset,
            onset_extrapolated: *onset,
            points: b.points.len(),
            termination: &b.termination,
        })
        .collect();
    out.write_json("branch_summary.json", &json)?;
    first_err.map_or(Ok(()), Err)
}

fn write_branch(out: &OutputDir, branch: &Branch, every: usize) -> Result<()> {
    let stem = format!("branch_k{}_{}", branch.k, branch.family.name().replace('~', "tilde"));
    let rows: Vec<Vec<String>> = branch
        .points
        .iter()
        .map(|p| {
            vec![
                p.index.to_string(),
                num(p.r),
                num(p.nu),
                num(p.h2_norm),
                num(p.residual),
                num(p.sym_residual),
                num(p.tail),
                p.l0.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        &format!("{stem}.csv"),
        &["index", "r", "nu", "h2_norm", "residual", "sym_residual", "tail", "l0"],
        &rows,
    )?;
    if every > 0 {
        for p in branch.points.iter().filter(|p| p.index % every == 0) {
            if let Some(state) = &p.state {
                out.write_json(&format!("{stem}/point_{:04}.json", p.index), state)?;
            }
        }
    }
    Ok(())
}

/// Reads a LoopState file, either bare or wrapped in `{"meta", "data"}`.
pub fn read_loop(path: &std::path::Path) -> Result<LoopState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let inner = match value.get("data") {
        Some(d) if value.get("meta").is_some() => d.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_validate(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let path = cfg
        .validate
        .loop_path
        .as_ref()
        .ok_or_else(|| Error::Config("validate needs a loop file (--loop or validate.loop)".into()))?;
    let x = read_loop(path)?;
    let report = verify_periodicity(&model, &x, cfg.validate.samples, cfg.validate.threshold, &cfg.validate.integrator)?;
    out.write_json("validate.json", &report)?;
    println!(
        "return distance {}  residual {}  energy drift {}  {}",
        num(report.return_distance),
        num(report.residual),
        num(report.energy_drift),
        if report.passed { "PASS" } else { "FAIL" }
    );
    if report.passed {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "return distance {:.3e} (threshold {:.1e}), residual {:.3e}",
            report.return_distance, report.threshold, report.residual
        )))
    }
}

fn run_cradle(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let omega = model.onsite_curvature().max(0.0).sqrt();
    let mut sets: Vec<CriticalPointSet> = Vec::new();
    for &ratio in &cfg.cradle.nu_ratios {
        for &label in &cfg.cradle.groups {
            let set = critical_points(&model, label, ratio * omega, &cfg.cradle.search)?;
            println!(
                "{:<9} nu = {}  starts {:>3}  converged {:>3}  orbits {}",
                label.name(),
                num(set.nu),
                set.starts,
                set.converged_starts,
                set.count()
            );
            sets.push(set);
        }
    }
    let parity = model.reflection_parity().unwrap_or(1);
    let total = distinct_orbits(&sets, parity, cfg.cradle.search.dedupe_tol);
    println!("distinct orbits: {total}");
    let mut rows = Vec::new();
    for (s, set) in sets.iter().enumerate() {
        for p in &set.points {
            let tag = format!("{}_{s}_{}", p.group.name().replace('~', "tilde"), p.orbit_id);
            out.write_json(&format!("cradle_points/{tag}.json"), &p.state)?;
            rows.push(vec![
                p.group.name().to_string(),
                num(p.nu),
                set.side.to_string(),
                p.orbit_id.to_string(),
                num(p.phi),
                num(p.gradient_norm),
                num(p.polished_residual),
                p.polished_l0.to_string(),
                num(p.energy),
            ]);
        }
    }
    out.write_csv(
        "cradle.csv",
        &["group", "nu", "side", "orbit_id", "phi", "gradient_norm", "polished_residual", "l0", "energy"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Report<'a> {
        omega: f64,
        distinct_orbits: usize,
        sets: &'a [CriticalPointSet],
    }
    out.write_json("cradle.json", &Report { omega, distinct_orbits: total, sets: &sets })?;
    Ok(())
}

fn run_homog(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    if let Some(m) = &cfg.model {
        let model = LatticeModel::with_equilibrium(m.n, m.onsite.clone(), m.coupling.clone(), 0.0, m.zero_mean_mode)?;
        check_model(&model)?;
    }
    let h = &cfg.homog;
    if h.grid == 0 || !(h.r_min > 0.0 && h.r_min <= h.r_max) {
        return Err(Error::Config("homog needs grid >= 1 and 0 < r_min <= r_max".into()));
    }
    let radii: Vec<f64> = if h.grid == 1 {
        vec![h.r_min]
    } else {
        (0..h.grid).map(|i| h.r_min * (h.r_max / h.r_min).powf(i as f64 / (h.grid - 1) as f64)).collect()
    };
    let scan = orbit_scan(&radii, h.angles, h.iters)?;
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|r| vec![num(r.seed_a), num(r.seed_b), num(r.max_radius), r.escaped.to_string()])
        .collect();
    out.write_csv("homog_scan.csv", &["seed_a", "seed_b", "max_radius", "escaped"], &rows)?;
    let orbit = scalar_orbit(h.energy, h.samples, &Default::default())?;
    let rows: Vec<Vec<String>> = orbit
        .times
        .iter()
        .zip(&orbit.q)
        .zip(&orbit.qdot)
        .map(|((t, q), v)| vec![num(*t), num(*q), num(*v)])
        .collect();
    out.write_csv("homog_orbit.csv", &["t", "q", "qdot"], &rows)?;
    let scaling = scalar_period(32.0 * h.energy)? / orbit.period;
    #[derive(Serialize)]
    struct Report {
        energy: f64,
        period: f64,
        period_ratio_32: f64,
        expected_ratio_32: f64,
        energy_drift: f64,
        return_distance: f64,
        escaped_seeds: usize,
    }
    let report = Report {
        energy: h.energy,
        period: orbit.period,
        period_ratio_32: scaling,
        expected_ratio_32: 32f64.powf(-0.1),
        energy_drift: orbit.energy_drift,
        return_distance: orbit.return_distance,
        escaped_seeds: scan.iter().filter(|r| r.escaped).count(),
    };
    println!("T(E) = {}  T(32E)/T(E) = {}", num(report.period), num(scaling));
    out.write_json("homog.json", &report)?;
    Ok(())
}
