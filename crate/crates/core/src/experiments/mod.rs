//! Declarative parameter sweeps over the engineered chain, written as CSV.
//!
//! Every runner takes an [`ExperimentConfig`], fills in the defaults of its
//! study, evaluates all sweep points on a bounded worker pool and returns the
//! rows in sweep order. Solver failures are recorded on the row; only
//! configuration problems abort a run.

mod config;
mod table;

pub use config::{
    default_gamma_grid, log_grid, ChainConfig, ExperimentConfig, NoiseConfig, OneOrMany, PlanEntry,
    RobustnessConfig, SweepAxis, SweepParameter, TimeGrid, DEFAULT_J, DEFAULT_MAX_SITES, DEFAULT_NBAR_GRID,
    DEFAULT_PERCENTS, DEFAULT_TRIALS,
};
pub use table::{format_float, Column, ExperimentOutput, SweepResultRow, STEADY_COLUMNS, TRAJECTORY_COLUMNS};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouvillian::total_liouvillian;
use crate::metrics::{fidelity, pair_concurrence, purity, MetricRecord};
use crate::model::{ChainSpec, NoiseSpec, Polarization, ReservoirSpec};
use crate::operators::{mode_excitation_state, StateVector};
use crate::solvers::{evolve, relative_residual, steady_state, DensityMatrix, SolverOptions, SteadyMethod, DIRECT_MAX_DIM};

/// Nominal `gamma / kappa` when neither the plan nor the sweep sets one.
pub const DEFAULT_GAMMA_OVER_KAPPA: f64 = 100.0;
const PANEL_A_GAMMA: f64 = 50.0;
const PANEL_BCD_GAMMA: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Steady,
    Evolve,
    PanelA,
    PanelBcd,
    Robustness,
    Scaling,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Steady,
        Experiment::Evolve,
        Experiment::PanelA,
        Experiment::PanelBcd,
        Experiment::Robustness,
        Experiment::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Steady => "steady",
            Experiment::Evolve => "evolve",
            Experiment::PanelA => "panel-a",
            Experiment::PanelBcd => "panel-bcd",
            Experiment::Robustness => "robustness",
            Experiment::Scaling => "scaling",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
        match self {
            Experiment::Steady => run_steady(cfg, workers),
            Experiment::Evolve => run_evolve(cfg, workers),
            Experiment::PanelA => run_panel_a(cfg, workers),
            Experiment::PanelBcd => run_panel_b_c_d(cfg, workers),
            Experiment::Robustness => run_robustness(cfg, workers),
            Experiment::Scaling => run_scaling(cfg, workers),
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Engineered reservoirs for `count` modes: a pump on `target`, then cooling
/// on the remaining modes in order of spectral distance from the target
/// (ties go to the lower index).
pub fn standard_plan(spec: &ChainSpec, target: usize, count: usize, gamma_over_kappa: f64) -> Result<Vec<PlanEntry>> {
    spec.check_mode(target)?;
    if count == 0 || count > spec.n {
        return Err(Error::Config(format!("reservoir count {count} outside 1..={}", spec.n)));
    }
    let w0 = spec.mode_frequency(target);
    let mut others: Vec<usize> = (1..=spec.n).filter(|&k| k != target).collect();
    others.sort_by(|&a, &b| {
        let da = (spec.mode_frequency(a) - w0).abs();
        let db = (spec.mode_frequency(b) - w0).abs();
        if (da - db).abs() <= 1e-9 * spec.j {
            a.cmp(&b)
        } else {
            da.total_cmp(&db)
        }
    });
    let pump = PlanEntry { mode: target, polarization: Polarization::Excited, gamma_over_kappa };
    let cool = others
        .into_iter()
        .take(count - 1)
        .map(|mode| PlanEntry { mode, polarization: Polarization::Ground, gamma_over_kappa });
    Ok(std::iter::once(pump).chain(cool).collect())
}

/// Per-trial stream seed, independent of scheduling.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(root) ^ trial)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Rate multipliers in `[1 - p, 1 + p)` for one trial.
pub fn perturbation_factors(root: u64, trial: u64, percent: f64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(root, trial));
    (0..count).map(|_| 1.0 + percent * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Point {
    n: Option<usize>,
    nbar: Option<f64>,
    gamma: Option<f64>,
    count: Option<usize>,
}

/// Cartesian product of the sweep axes, first axis slowest.
fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let mut out = vec![Point::default()];
    for axis in &cfg.sweep {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p;
                    match axis.parameter {
                        SweepParameter::N => q.n = Some(v as usize),
                        SweepParameter::Nbar => q.nbar = Some(v),
                        SweepParameter::GammaOverKappa => q.gamma = Some(v),
                        SweepParameter::ReservoirCount => q.count = Some(v as usize),
                    }
                    q
                })
            })
            .collect();
    }
    out
}

/// Fully specified physics at one sweep point.
struct Resolved {
    spec: ChainSpec,
    noise: NoiseSpec,
    plan: Vec<PlanEntry>,
    gamma_over_kappa: f64,
}

impl Resolved {
    fn new(cfg: &ExperimentConfig, p: &Point) -> Result<Self> {
        let n = p.n.unwrap_or(cfg.chain.n);
        let spec = cfg.chain.spec(n)?;
        let noise = cfg.noise.resolve(p.nbar)?;
        let nominal = p
            .gamma
            .or(cfg.reservoir_plan.first().map(|e| e.gamma_over_kappa))
            .unwrap_or(DEFAULT_GAMMA_OVER_KAPPA);
        let explicit = !cfg.reservoir_plan.is_empty() && p.count.is_none() && p.n.is_none();
        let mut plan = if explicit {
            cfg.reservoir_plan.clone()
        } else {
            standard_plan(&spec, cfg.target_mode, p.count.unwrap_or(n), nominal)?
        };
        if let Some(g) = p.gamma {
            plan.iter_mut().for_each(|e| e.gamma_over_kappa = g);
        }
        Ok(Resolved { spec, noise, plan, gamma_over_kappa: nominal })
    }

    fn row(&self, cfg: &ExperimentConfig) -> SweepResultRow {
        let modes = self.plan.iter().map(|e| e.mode).collect();
        SweepResultRow::at(self.spec.n, self.noise.nbar, self.gamma_over_kappa, modes, cfg.frame)
    }

    fn reservoirs(&self, factors: Option<&[f64]>) -> Vec<ReservoirSpec> {
        self.plan
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let f = factors.map_or(1.0, |f| f[i]);
                ReservoirSpec::new(e.mode, e.polarization, e.gamma_over_kappa * self.noise.kappa * f)
            })
            .collect()
    }

    fn check_budget(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.spec.n > cfg.max_sites {
            return Err(Error::MemoryBudgetExceeded { n: self.spec.n, cap: cfg.max_sites });
        }
        Ok(())
    }

    fn pair(&self, cfg: &ExperimentConfig) -> Option<(usize, usize)> {
        let (i, j) = cfg.concurrence_pair;
        (i.max(j) <= self.spec.n).then_some((i, j))
    }

    /// Absolute rate that sets the trajectory time unit.
    fn time_unit(&self) -> f64 {
        let g = self.gamma_over_kappa * self.noise.kappa;
        if g > 0.0 {
            g
        } else {
            self.noise.kappa
        }
    }
}

fn resolved_or_failed(cfg: &ExperimentConfig, p: &Point) -> std::result::Result<Resolved, SweepResultRow> {
    Resolved::new(cfg, p).map_err(|e| {
        let nbar = p.nbar.or(cfg.noise.nbar).unwrap_or(0.001);
        let gamma = p.gamma.unwrap_or(DEFAULT_GAMMA_OVER_KAPPA);
        SweepResultRow::at(p.n.unwrap_or(cfg.chain.n), nbar, gamma, Vec::new(), cfg.frame).fail(&e)
    })
}

/// Direct solves are capped by size; larger chains fall back to time marching.
pub fn solver_for(opts: &SolverOptions, n: usize) -> SolverOptions {
    let dim = 1usize << (2 * n);
    if opts.method == SteadyMethod::DirectNullSpace && dim > DIRECT_MAX_DIM {
        SolverOptions { method: SteadyMethod::TimeMarching, ..*opts }
    } else {
        *opts
    }
}

fn pool_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn elapsed(cfg: &ExperimentConfig, start: Instant) -> f64 {
    if cfg.record_wall_time {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn steady_row(cfg: &ExperimentConfig, p: &Point) -> SweepResultRow {
    let start = Instant::now();
    let r = match resolved_or_failed(cfg, p) {
        Ok(r) => r,
        Err(row) => return row,
    };
    let mut row = r.row(cfg);
    let opts = solver_for(&cfg.solver, r.spec.n);
    row.method = Some(opts.method);
    let outcome = (|| -> Result<MetricRecord> {
        r.check_budget(cfg)?;
        let l = total_liouvillian(&r.spec, &r.reservoirs(None), &r.noise, cfg.frame)?;
        let rho = steady_state(&l, &opts)?;
        let residual = relative_residual(&l, &rho);
        if !(residual <= opts.residual_tol) {
            return Err(Error::NonUniqueSteadyState(format!("residual {residual:e}")));
        }
        let target = mode_excitation_state(&r.spec, cfg.target_mode)?;
        MetricRecord::evaluate(&rho, &target, &r.spec, r.pair(cfg), residual)
    })();
    row.wall_time_seconds = elapsed(cfg, start);
    match outcome {
        Ok(m) => {
            row.fidelity = Some(m.fidelity);
            row.purity = Some(m.purity);
            row.concurrence = m.concurrence.map(|c| c.value);
            row.residual = Some(m.residual);
            row.mode_occupations = Some(m.mode_occupations);
            row
        }
        Err(e) => row.fail(&e),
    }
}

fn run_steady_points(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let cfg = &with_noise_defaults(cfg);
    cfg.validate()?;
    let pts = points(cfg);
    let rows = pool_map(&pts, workers, |p| steady_row(cfg, p))?;
    Ok(ExperimentOutput { config: cfg.clone(), columns: STEADY_COLUMNS, rows, notes: Vec::new() })
}

/// Metrics along one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    tau: f64,
    time: f64,
    fidelity: f64,
    purity: f64,
    concurrence: Option<f64>,
    trace_drift: f64,
}

fn trajectory(cfg: &ExperimentConfig, r: &Resolved, factors: Option<&[f64]>) -> Result<Vec<Sample>> {
    r.check_budget(cfg)?;
    let l = total_liouvillian(&r.spec, &r.reservoirs(factors), &r.noise, cfg.frame)?;
    let taus = cfg.time_grid.taus();
    let unit = r.time_unit();
    let times: Vec<f64> = taus.iter().map(|tau| tau / unit).collect();
    let rho0 = DensityMatrix::from_pure(&StateVector::all_down(r.spec.n));
    let target = mode_excitation_state(&r.spec, cfg.target_mode)?;
    let pair = r.pair(cfg);
    evolve(&l, &rho0, &times, &cfg.solver)?
        .iter()
        .zip(taus.iter().zip(&times))
        .map(|(rho, (&tau, &time))| {
            Ok(Sample {
                tau,
                time,
                fidelity: fidelity(rho, &target)?,
                purity: purity(rho),
                concurrence: pair.map(|(i, j)| pair_concurrence(rho, i, j)).transpose()?,
                trace_drift: (rho.matrix().trace().re - 1.0).abs(),
            })
        })
        .collect()
}

fn sample_row(base: &SweepResultRow, s: &Sample) -> SweepResultRow {
    let mut row = base.clone();
    row.tau = Some(s.tau);
    row.time = Some(s.time);
    row.fidelity = Some(s.fidelity);
    row.purity = Some(s.purity);
    row.concurrence = s.concurrence;
    row.trace_drift = Some(s.trace_drift);
    row
}

fn trajectory_rows(base: SweepResultRow, outcome: &Result<Vec<Sample>>) -> Vec<SweepResultRow> {
    match outcome {
        Ok(samples) => samples.iter().map(|s| sample_row(&base, s)).collect(),
        Err(e) => vec![base.fail(e)],
    }
}

/// Steady states at every sweep point of `cfg`, with no study defaults.
pub fn run_steady(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    run_steady_points(cfg, workers)
}

/// Trajectories from the all-down state at every sweep point of `cfg`.
pub fn run_evolve(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let cfg = &with_noise_defaults(cfg);
    cfg.validate()?;
    let pts = points(cfg);
    let rows = pool_map(&pts, workers, |p| {
        let start = Instant::now();
        let r = match resolved_or_failed(cfg, p) {
            Ok(r) => r,
            Err(row) => return vec![row],
        };
        let outcome = trajectory(cfg, &r, None);
        let mut base = r.row(cfg);
        base.wall_time_seconds = elapsed(cfg, start);
        trajectory_rows(base, &outcome)
    })?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        columns: TRAJECTORY_COLUMNS,
        rows: rows.into_iter().flatten().collect(),
        notes: Vec::new(),
    })
}

fn with_noise_defaults(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { noise: cfg.noise.filled(), ..cfg.clone() }
}

fn only_axes(cfg: &ExperimentConfig, allowed: &[SweepParameter], study: &str) -> Result<()> {
    match cfg.sweep.iter().find(|a| !allowed.contains(&a.parameter)) {
        Some(a) => Err(Error::Config(format!("{study} cannot sweep {:?}", a.parameter))),
        None => Ok(()),
    }
}

fn no_plan(cfg: &ExperimentConfig, study: &str) -> Result<()> {
    if cfg.reservoir_plan.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("{study} builds its own reservoir plan; leave reservoir_plan empty")))
    }
}

/// Single pump on the target mode without dephasing: fidelity over a
/// `(nbar, gamma/kappa)` grid.
pub fn run_panel_a(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let mut cfg = cfg.clone();
    only_axes(&cfg, &[SweepParameter::Nbar, SweepParameter::GammaOverKappa], "panel-a")?;
    match cfg.reservoir_plan.as_slice() {
        [] => {
            cfg.reservoir_plan =
                vec![PlanEntry { mode: cfg.target_mode, polarization: Polarization::Excited, gamma_over_kappa: PANEL_A_GAMMA }]
        }
        [e] if e.mode == cfg.target_mode && e.polarization == Polarization::Excited => {}
        _ => return Err(Error::Config("panel-a needs a single excited reservoir on target_mode".into())),
    }
    match cfg.noise.kappa_phi {
        None => cfg.noise.kappa_phi = Some(0.0),
        Some(k) if k == 0.0 => {}
        Some(k) => return Err(Error::Config(format!("panel-a runs without dephasing, got kappa_phi = {k}"))),
    }
    cfg.with_default_axis(SweepParameter::Nbar, || DEFAULT_NBAR_GRID.to_vec());
    cfg.with_default_axis(SweepParameter::GammaOverKappa, default_gamma_grid);
    run_steady_points(&cfg, workers)
}

/// Pump plus `m - 1` cooled modes for each reservoir count `m`.
pub fn run_panel_b_c_d(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let mut cfg = cfg.clone();
    only_axes(
        &cfg,
        &[SweepParameter::ReservoirCount, SweepParameter::GammaOverKappa, SweepParameter::Nbar],
        "panel-bcd",
    )?;
    no_plan(&cfg, "panel-bcd")?;
    let n = cfg.chain.n;
    cfg.with_default_axis(SweepParameter::ReservoirCount, || (1..=n).map(|m| m as f64).collect());
    cfg.with_default_axis(SweepParameter::GammaOverKappa, || vec![PANEL_BCD_GAMMA]);
    cfg.validate()?;
    let spec = cfg.chain.spec(n)?;
    let counts = &cfg.axis(SweepParameter::ReservoirCount).expect("axis set above").values;
    let mut sets = serde_json::Map::new();
    for &m in counts {
        let modes: Vec<usize> =
            standard_plan(&spec, cfg.target_mode, m as usize, 0.0)?.iter().map(|e| e.mode).collect();
        sets.insert((m as usize).to_string(), serde_json::json!(modes));
    }
    let mut out = run_steady_points(&cfg, workers)?;
    out.notes.push(format!("reservoir_modes {}", serde_json::Value::Object(sets)));
    Ok(out)
}

/// Steady state against chain length with every mode engineered.
pub fn run_scaling(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let mut cfg = cfg.clone();
    only_axes(&cfg, &[SweepParameter::N, SweepParameter::GammaOverKappa, SweepParameter::Nbar], "scaling")?;
    no_plan(&cfg, "scaling")?;
    cfg.with_default_axis(SweepParameter::N, || (2..=7).map(|n| n as f64).collect());
    cfg.with_default_axis(SweepParameter::GammaOverKappa, || vec![DEFAULT_GAMMA_OVER_KAPPA]);
    run_steady_points(&cfg, workers)
}

/// Trajectories with every engineered rate scaled by a static random factor
/// per trial, plus the unperturbed baseline and per-time trial means.
pub fn run_robustness(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let mut cfg = with_noise_defaults(cfg);
    only_axes(&cfg, &[SweepParameter::GammaOverKappa, SweepParameter::Nbar], "robustness")?;
    cfg.with_default_axis(SweepParameter::GammaOverKappa, || vec![DEFAULT_GAMMA_OVER_KAPPA]);
    let rob = cfg.robustness.get_or_insert_with(RobustnessConfig::default).clone();
    cfg.validate()?;

    let listed = rob.percent.values();
    let mut percents = Vec::new();
    if !listed.contains(&0.0) {
        percents.push((0.0, 1));
    }
    percents.extend(listed.iter().map(|&p| (p, rob.trials)));

    let pts = points(&cfg);
    let tasks: Vec<(usize, f64, usize)> = (0..pts.len())
        .flat_map(|i| percents.iter().flat_map(move |&(p, trials)| (0..trials).map(move |t| (i, p, t))))
        .collect();
    let results = pool_map(&tasks, workers, |&(i, p, trial)| {
        let start = Instant::now();
        let outcome = Resolved::new(&cfg, &pts[i]).and_then(|r| {
            let factors = (p > 0.0).then(|| perturbation_factors(rob.seed, trial as u64, p, r.plan.len()));
            trajectory(&cfg, &r, factors.as_deref())
        });
        (outcome, elapsed(&cfg, start))
    })?;

    let mut rows = Vec::new();
    let mut k = 0;
    for p in &pts {
        let base = match resolved_or_failed(&cfg, p) {
            Ok(r) => r.row(&cfg),
            Err(row) => row,
        };
        for &(percent, trials) in &percents {
            let group = &results[k..k + trials];
            k += trials;
            let mut base = base.clone();
            base.percent = Some(percent);
            base.seed = rob.seed as i64;
            for (trial, (outcome, wall)) in group.iter().enumerate() {
                let mut b = base.clone();
                b.trial = Some(trial as i64);
                b.wall_time_seconds = *wall;
                rows.extend(trajectory_rows(b, outcome));
            }
            let mut mean = base.clone();
            mean.trial = Some(-1);
            mean.wall_time_seconds = group.iter().map(|(_, w)| w).sum();
            rows.extend(mean_rows(mean, group));
        }
    }
    Ok(ExperimentOutput { config: cfg, columns: TRAJECTORY_COLUMNS, rows, notes: Vec::new() })
}

fn mean_rows(base: SweepResultRow, group: &[(Result<Vec<Sample>>, f64)]) -> Vec<SweepResultRow> {
    let mut runs = Vec::with_capacity(group.len());
    for (outcome, _) in group {
        match outcome {
            Ok(s) => runs.push(s),
            Err(e) => return vec![base.fail(&Error::InvalidState(format!("trial failed: {e}")))],
        }
    }
    let m = runs.len() as f64;
    (0..runs[0].len())
        .map(|i| {
            let avg = |f: &dyn Fn(&Sample) -> f64| runs.iter().map(|s| f(&s[i])).sum::<f64>() / m;
            let conc = runs[0][i].concurrence.map(|_| avg(&|s| s.concurrence.unwrap_or(0.0)));
            let s = Sample {
                tau: runs[0][i].tau,
                time: runs[0][i].time,
                fidelity: avg(&|s| s.fidelity),
                purity: avg(&|s| s.purity),
                concurrence: conc,
                trace_drift: runs.iter().map(|s| s[i].trace_drift).fold(0.0, f64::max),
            };
            sample_row(&base, &s)
        })
        .collect()
}
