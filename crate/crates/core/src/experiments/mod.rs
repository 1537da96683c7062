//! Scenario runs that reproduce the thermalization experiments and export
//! plot-ready CSV tables plus a JSON run report.
//!
//! Column contracts (fixed per run kind):
//!
//! | kind | file | columns |
//! |---|---|---|
//! | trajectory | `<name>.csv` | `t, p_e1..p_ed, gibbs_e1..gibbs_ed, trace_distance` |
//! | steady_state | `<name>.csv` | `level, energy, steady_population, gibbs_population` |
//! | sweep_grid (gamma_beta) | `<name>.csv` | `gamma, beta, log10_trace_distance, spectral_gap, status` |
//! | sweep_grid (a_b) | `<name>.csv` | `a, b, log10_trace_distance, spectral_gap, gap_iqr, congested, status` |
//! | chain_scaling | `<name>.csv` | `sites, beta, trace_distance, log10_trace_distance, spectral_gap, unique, num_frequencies, memory_bytes, status` |
//! | rates_plot | `<name>.csv` | `beta, omega, log10_rate, log10_db_violation` |
//! | oracle | `<name>.csv` | `coupling_ratio, t, deviation_rate_scale_1, deviation_rate_scale_2` |
//!
//! Levels `e1..ed` are eigenstates in ascending energy. Empty cells mark
//! undefined values.

pub mod config;
pub mod stats;
pub mod units;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::bath::{db_violation_at, spectral_density_at, BathSchedule};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_chain, build_two_spin, diagonalize, EigenSystem, HamiltonianSpec};
use crate::jump::{check_ergodicity, frequency_resolve_all, CouplingSpec, FrequencyResolvedOps};
use crate::linalg::{self, CMatrix, C64};
use crate::liouvillian::{DensityMatrix, RateFunction, SectorGenerator};
use crate::oracle::{validate_reduction, OracleScenario, RATE_SCALES};
use crate::propagation::{
    cycle_map_with, evolve, steady_state, thermal_state, trace_distance, EvolveOptions, StopRule,
};

pub use config::{preset, GridAxes, ModelKind, RunKind, ScenarioConfig, PRESET_NAMES};
pub use stats::{gap_iqr, QUANTILE_RULE};
pub use units::{platform_units, PhysicalUnits, PlatformSpec};

/// Degeneracy tolerance used when diagonalizing scenario Hamiltonians.
pub const TOL_DEG: f64 = 1e-9;

/// Bath schedule with every rate multiplied by a constant.
#[derive(Debug, Clone, Copy)]
pub struct ScaledRates {
    pub schedule: BathSchedule,
    pub scale: f64,
}

impl RateFunction for ScaledRates {
    fn rate(&self, t: f64, omega: f64) -> f64 {
        self.scale * self.schedule.spectral_density(t, omega)
    }
}

/// Parameters of one system-plus-bath instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub a: f64,
    pub b: f64,
    pub j: f64,
    pub sites: usize,
    pub axis: crate::hamiltonian::Axis,
    pub beta: f64,
    pub gamma: f64,
    pub g: f64,
    pub omega_max_factor: f64,
    pub omega_max: Option<f64>,
    pub t_cycle: f64,
    pub rate_scale: f64,
}

impl ModelParams {
    /// Resolve defaults from a config: g = Γ, T_cycle = 4/Γ.
    pub fn from_config(c: &ScenarioConfig, beta: f64, gamma: f64) -> Self {
        ModelParams {
            kind: c.hamiltonian,
            a: c.a,
            b: c.b,
            j: c.j,
            sites: c.num_sites(),
            axis: c.coupling_axis,
            beta,
            gamma,
            g: c.g.unwrap_or(gamma),
            omega_max_factor: c.omega_max_factor,
            omega_max: c.omega_max,
            t_cycle: c.t_cycle.unwrap_or(4.0 / gamma),
            rate_scale: c.rate_scale,
        }
    }
}

/// A fully assembled model: spectrum, resolved couplings and schedule.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub spec: HamiltonianSpec,
    pub eig: EigenSystem,
    pub couplings: Vec<CouplingSpec>,
    pub ops: Vec<FrequencyResolvedOps>,
    pub schedule: BathSchedule,
}

impl Model {
    pub fn build(p: ModelParams) -> Result<Self> {
        let spec = match p.kind {
            ModelKind::TwoSpin => build_two_spin(p.a, p.b),
            ModelKind::Chain => {
                config::check_chain_length(p.sites)?;
                build_chain(p.sites, p.a, p.b, p.j)?
            }
        };
        let eig = diagonalize(&spec, TOL_DEG)?;
        let couplings = coupling_layout(p.kind, spec.num_sites, p.axis, p.g)?;
        let ops = frequency_resolve_all(&eig, &couplings)?;
        let omega_max = match p.omega_max {
            Some(w) => w,
            None => p.omega_max_factor * eig.delta_max,
        };
        if !(omega_max > 0.0) {
            return Err(Error::invalid("omega_max", "spectrum has zero width; set omega_max explicitly"));
        }
        let schedule = BathSchedule::sawtooth(p.beta, p.gamma, omega_max, p.t_cycle)?;
        Ok(Model { params: p, spec, eig, couplings, ops, schedule })
    }

    pub fn rates(&self) -> ScaledRates {
        ScaledRates { schedule: self.schedule, scale: self.params.rate_scale }
    }

    pub fn regime(&self) -> Regime {
        let s = &self.schedule;
        let min_gap = self.eig.gaps.first().cloned().unwrap_or(f64::NAN);
        Regime {
            coupling_over_damping: self.params.g / s.gamma,
            damping_over_min_gap: s.gamma / min_gap,
            sweep_over_damping: s.quasi_static_ratio(),
            inverse_period_over_coupling: 1.0 / (s.t_cycle * self.params.g),
            omega_max: s.omega_max,
            t_cycle: s.t_cycle,
            congested: stats::is_congested(&self.eig, s.gamma),
        }
    }
}

/// One ancilla per site for two spins; ancillae on even sites of a chain.
pub fn coupling_layout(
    kind: ModelKind,
    num_sites: usize,
    axis: crate::hamiltonian::Axis,
    g: f64,
) -> Result<Vec<CouplingSpec>> {
    match kind {
        ModelKind::TwoSpin => (0..num_sites).map(|k| CouplingSpec::new(k, k, axis, g)).collect(),
        ModelKind::Chain => {
            (0..num_sites).step_by(2).enumerate().map(|(m, k)| CouplingSpec::new(m, k, axis, g)).collect()
        }
    }
}

/// Timescale ratios behind the weak-coupling, quasi-static approximation.
#[derive(Debug, Clone, Serialize)]
pub struct Regime {
    pub coupling_over_damping: f64,
    pub damping_over_min_gap: f64,
    pub sweep_over_damping: f64,
    pub inverse_period_over_coupling: f64,
    pub omega_max: f64,
    pub t_cycle: f64,
    /// Two distinct gaps lie within 10Γ of each other.
    pub congested: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ergodicity {
    pub ergodic: bool,
    pub commutant_dim: usize,
}

/// Steady state of one model compared with its Gibbs state.
#[derive(Debug, Clone)]
pub struct SteadyPoint {
    pub trace_distance: f64,
    pub spectral_gap: f64,
    pub ergodicity: Ergodicity,
    pub steady_populations: Vec<f64>,
    pub gibbs_populations: Vec<f64>,
}

pub fn solve_steady(model: &Model, dt: f64) -> Result<SteadyPoint> {
    let verdict = check_ergodicity(&model.ops)?;
    let gen = SectorGenerator::new(&model.ops)?;
    let map = cycle_map_with(&gen, &model.rates(), model.schedule.t_cycle, dt)?;
    let ss = steady_state(&map)?;
    let gibbs = thermal_state(&model.eig, model.schedule.beta)?;
    Ok(SteadyPoint {
        trace_distance: trace_distance(ss.rho.matrix(), gibbs.matrix()),
        spectral_gap: ss.spectral_gap(),
        ergodicity: Ergodicity { ergodic: verdict.ergodic, commutant_dim: verdict.commutant_dim },
        steady_populations: ss.rho.populations(),
        gibbs_populations: gibbs.populations(),
    })
}

/// Bytes of a dense generator stored per ancilla and frequency: M·N_ω·2^{4L}·16.
pub fn generator_memory_bytes(num_ancillas: usize, num_frequencies: usize, num_sites: usize) -> u128 {
    num_ancillas as u128 * num_frequencies as u128 * (1u128 << (4 * num_sites)) * 16
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file_name: String, header: Vec<String>) -> Self {
        Table { file_name, header, rows: Vec::new() }
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parsed numeric column; empty cells become NaN.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Numerical(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Numerical(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub kind: RunKind,
    pub config: ScenarioConfig,
    pub regime: Option<Regime>,
    pub ergodicity: Option<Ergodicity>,
    pub spectral_gap: Option<f64>,
    pub trace_distance: Option<f64>,
    pub details: serde_json::Value,
    pub warnings: Vec<String>,
    pub quantile_rule: &'static str,
    pub files: Vec<String>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
}

impl RunOutput {
    pub fn table(&self) -> &Table {
        &self.tables[0]
    }

    /// Write every table and `<name>_report.json` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |path: &Path| {
            let p = path.display().to_string();
            move |source| Error::Io { path: p, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(&t.file_name);
            std::fs::write(&path, t.to_csv()?).map_err(io(&path))?;
            written.push(path);
        }
        let report_path = dir.join(format!("{}_report.json", self.report.name));
        self.report.files = written.iter().map(|p| p.display().to_string()).collect();
        let text = serde_json::to_string_pretty(&self.report).expect("report serializes");
        std::fs::write(&report_path, text).map_err(io(&report_path))?;
        written.push(report_path);
        Ok(written)
    }
}

/// Validate and dispatch on the run kind.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = match cfg.kind {
        RunKind::Trajectory => run_trajectory(cfg),
        RunKind::SteadyState => run_steady_state(cfg),
        RunKind::SweepGrid => run_sweep_grid(cfg),
        RunKind::ChainScaling => run_chain_scaling(cfg),
        RunKind::RatesPlot => run_rates_plot(cfg),
        RunKind::Oracle => run_oracle(cfg),
    }?;
    out.report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn report(cfg: &ScenarioConfig) -> RunReport {
    RunReport {
        name: cfg.label().to_string(),
        kind: cfg.kind,
        config: cfg.clone(),
        regime: None,
        ergodicity: None,
        spectral_gap: None,
        trace_distance: None,
        details: serde_json::Value::Null,
        warnings: Vec::new(),
        quantile_rule: QUANTILE_RULE,
        files: Vec::new(),
        wall_time_seconds: 0.0,
    }
}

fn regime_warnings(r: &Regime) -> Vec<String> {
    let mut w = Vec::new();
    if r.coupling_over_damping > 1.0 {
        w.push(format!("g/Γ = {:.3} exceeds 1", r.coupling_over_damping));
    }
    if r.sweep_over_damping > crate::bath::QUASI_STATIC_WARN {
        w.push(format!("sweep rate over Γ = {:.3} is not small", r.sweep_over_damping));
    }
    if r.inverse_period_over_coupling > 1.0 {
        w.push(format!("1/(T_cycle·g) = {:.3} is not small", r.inverse_period_over_coupling));
    }
    if r.congested {
        w.push("two distinct gaps lie within 10Γ of each other".into());
    }
    w
}

/// Initial state in the energy eigenbasis from a computational bitstring or a seeded random draw.
pub fn initial_state(eig: &EigenSystem, spec: &str, seed: u64) -> Result<DensityMatrix> {
    let d = eig.dim();
    let comp = if spec.trim() == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let tr = linalg::trace(&m);
        m / tr
    } else {
        let idx = usize::from_str_radix(spec.trim(), 2)
            .map_err(|_| Error::Config(format!("initial_state {spec:?} is not a bitstring")))?;
        if idx >= d {
            return Err(Error::Config(format!("initial_state {spec:?} outside the {d}-dimensional space")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(idx, idx)] = linalg::ONE;
        m
    };
    DensityMatrix::new(linalg::hermitize(&eig.to_eigenbasis(&comp)))
}

/// Largest amount by which any population passes its Gibbs value on the far side from where it started.
pub fn max_overshoot(start: &[f64], gibbs: &[f64], history: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, (&p0, &pg)) in start.iter().zip(gibbs).enumerate() {
        let side = (pg - p0).signum();
        for row in history {
            worst = worst.max(side * (row[i] - pg));
        }
    }
    worst
}

pub fn run_trajectory(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let p = ModelParams::from_config(cfg, cfg.beta.unwrap_or_default(), cfg.gamma.unwrap_or_default());
    let model = Model::build(p)?;
    let d = model.eig.dim();
    let rho0 =
        initial_state(&model.eig, cfg.initial_state.as_deref().unwrap_or(&"0".repeat(cfg.num_sites())), cfg.seed)?;
    let gibbs = thermal_state(&model.eig, p.beta)?;
    let gen = SectorGenerator::new(&model.ops)?;
    let per_cycle = (model.schedule.t_cycle / cfg.dt).round() as usize;
    let t_final = cfg.t_final.unwrap_or(cfg.max_cycles as f64 * model.schedule.t_cycle);
    let opts = EvolveOptions {
        dt: cfg.dt,
        t_final,
        record_stride: cfg.record_stride,
        stop: cfg.stop_threshold.map(|threshold| StopRule { threshold, check_every: per_cycle.max(1) }),
    };
    let rates = model.rates();
    let traj = evolve(&rho0, &gen, &rates, gibbs.matrix(), &opts)?;

    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("p_e{k}")));
    header.extend((1..=d).map(|k| format!("gibbs_e{k}")));
    header.push("trace_distance".into());
    let mut table = Table::new(format!("{}.csv", cfg.label()), header);
    let gp = gibbs.populations();
    for pt in &traj.points {
        let mut row = vec![num(pt.t)];
        row.extend(pt.populations.iter().map(|&x| num(x)));
        row.extend(gp.iter().map(|&x| num(x)));
        row.push(num(pt.trace_distance));
        table.rows.push(row);
    }

    let last = traj.points.last().expect("trajectory has its initial point");
    let history: Vec<Vec<f64>> = traj.points.iter().map(|p| p.populations.clone()).collect();
    let overshoot = max_overshoot(&rho0.populations(), &gp, &history);
    let trace_drift = traj.points.iter().map(|p| (p.trace - 1.0).abs()).fold(0.0, f64::max);
    let stop_reason = if traj.stopped_early {
        "threshold"
    } else if cfg.t_final.is_some() {
        "t_final"
    } else {
        "max_cycles"
    };

    let mut rep = report(cfg);
    let regime = model.regime();
    rep.warnings = regime_warnings(&regime);
    if traj.max_step_norm > 0.1 {
        rep.warnings.push(format!("Δt·‖M‖₁ reached {:.3}", traj.max_step_norm));
    }
    rep.regime = Some(regime);
    match solve_steady(&model, cfg.dt) {
        Ok(sp) => {
            rep.ergodicity = Some(sp.ergodicity.clone());
            rep.spectral_gap = Some(sp.spectral_gap);
        }
        Err(e) => rep.warnings.push(format!("steady state unavailable: {e}")),
    }
    rep.trace_distance = Some(last.trace_distance);
    rep.details = json!({
        "energies": model.eig.energies,
        "final_time": last.t,
        "cycles": last.t / model.schedule.t_cycle,
        "stop_reason": stop_reason,
        "max_overshoot": overshoot,
        "max_trace_drift": trace_drift,
        "max_step_norm": traj.max_step_norm,
    });
    Ok(RunOutput { report: rep, tables: vec![table] })
}

pub fn run_steady_state(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let p = ModelParams::from_config(cfg, cfg.beta.unwrap_or_default(), cfg.gamma.unwrap_or_default());
    let model = Model::build(p)?;
    let sp = solve_steady(&model, cfg.dt)?;
    let mut table = Table::new(
        format!("{}.csv", cfg.label()),
        ["level", "energy", "steady_population", "gibbs_population"].map(String::from).to_vec(),
    );
    for (k, e) in model.eig.energies.iter().enumerate() {
        table.rows.push(vec![
            format!("e{}", k + 1),
            num(*e),
            num(sp.steady_populations[k]),
            num(sp.gibbs_populations[k]),
        ]);
    }
    let mut rep = report(cfg);
    let regime = model.regime();
    rep.warnings = regime_warnings(&regime);
    rep.regime = Some(regime);
    rep.ergodicity = Some(sp.ergodicity);
    rep.spectral_gap = Some(sp.spectral_gap);
    rep.trace_distance = Some(sp.trace_distance);
    rep.details = json!({ "energies": model.eig.energies, "gap_iqr": gap_iqr(&model.eig, &model.ops) });
    Ok(RunOutput { report: rep, tables: vec![table] })
}

struct GridCell {
    log_distance: Option<f64>,
    spectral_gap: Option<f64>,
    iqr: Option<f64>,
    congested: Option<bool>,
    status: String,
}

fn grid_cell(p: ModelParams, dt: f64) -> GridCell {
    let model = match Model::build(p) {
        Ok(m) => m,
        Err(e) => {
            return GridCell {
                log_distance: None,
                spectral_gap: None,
                iqr: None,
                congested: None,
                status: e.kind().into(),
            }
        }
    };
    let iqr = gap_iqr(&model.eig, &model.ops);
    let congested = Some(stats::is_congested(&model.eig, p.gamma));
    match solve_steady(&model, dt) {
        Ok(sp) => GridCell {
            log_distance: Some(sp.trace_distance.log10()),
            spectral_gap: Some(sp.spectral_gap),
            iqr,
            congested,
            status: "ok".into(),
        },
        Err(e) => GridCell { log_distance: None, spectral_gap: None, iqr, congested, status: e.kind().into() },
    }
}

pub fn run_sweep_grid(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let axes = cfg.grid.expect("validated");
    let (xs, ys): (Vec<f64>, Vec<f64>) = match axes {
        GridAxes::GammaBeta => (cfg.gammas.clone().unwrap(), cfg.betas.clone().unwrap()),
        GridAxes::AB => (cfg.a_values.clone().unwrap(), cfg.b_values.clone().unwrap()),
    };
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let cells: Vec<GridCell> = points
        .par_iter()
        .map(|&(x, y)| {
            let p = match axes {
                // g = Γ and T_cycle = 4/Γ follow the Γ axis unless pinned
                GridAxes::GammaBeta => ModelParams::from_config(cfg, y, x),
                GridAxes::AB => {
                    let mut p = ModelParams::from_config(cfg, cfg.beta.unwrap(), cfg.gamma.unwrap());
                    p.a = x;
                    p.b = y;
                    p
                }
            };
            grid_cell(p, cfg.dt)
        })
        .collect();

    let header: Vec<String> = match axes {
        GridAxes::GammaBeta => {
            ["gamma", "beta", "log10_trace_distance", "spectral_gap", "status"].map(String::from).to_vec()
        }
        GridAxes::AB => ["a", "b", "log10_trace_distance", "spectral_gap", "gap_iqr", "congested", "status"]
            .map(String::from)
            .to_vec(),
    };
    let mut table = Table::new(format!("{}.csv", cfg.label()), header);
    for (&(x, y), c) in points.iter().zip(&cells) {
        let mut row = vec![num(x), num(y), opt(c.log_distance), opt(c.spectral_gap)];
        if axes == GridAxes::AB {
            row.push(opt(c.iqr));
            row.push(c.congested.map(|b| b.to_string()).unwrap_or_default());
        }
        row.push(c.status.clone());
        table.rows.push(row);
    }
    let worst = points
        .iter()
        .zip(&cells)
        .filter_map(|(&pt, c)| c.log_distance.map(|l| (pt, l)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let failures = cells.iter().filter(|c| c.status != "ok").count();
    let mut rep = report(cfg);
    if failures > 0 {
        rep.warnings.push(format!("{failures} grid points failed; see the status column"));
    }
    rep.details = json!({
        "axes": axes,
        "points": points.len(),
        "failures": failures,
        "worst": worst.map(|((x, y), l)| json!({"x": x, "y": y, "log10_trace_distance": l})),
    });
    rep.trace_distance = worst.map(|(_, l)| 10f64.powf(l));
    Ok(RunOutput { report: rep, tables: vec![table] })
}

pub fn run_chain_scaling(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let lengths = cfg.lengths.clone().unwrap();
    let betas = cfg.betas.clone().unwrap();
    let gamma = cfg.gamma.unwrap();
    let points: Vec<(usize, f64)> = lengths.iter().flat_map(|&l| betas.iter().map(move |&b| (l, b))).collect();
    let results: Vec<(Option<Model>, Result<SteadyPoint>)> = points
        .par_iter()
        .map(|&(l, beta)| {
            let mut p = ModelParams::from_config(cfg, beta, gamma);
            p.kind = ModelKind::Chain;
            p.sites = l;
            match Model::build(p) {
                Ok(m) => {
                    let sp = solve_steady(&m, cfg.dt);
                    (Some(m), sp)
                }
                Err(e) => (None, Err(e)),
            }
        })
        .collect();
    let mut table = Table::new(
        format!("{}.csv", cfg.label()),
        [
            "sites",
            "beta",
            "trace_distance",
            "log10_trace_distance",
            "spectral_gap",
            "unique",
            "num_frequencies",
            "memory_bytes",
            "status",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut memory = Vec::new();
    for (&(l, beta), (model, res)) in points.iter().zip(&results) {
        let (nf, mem) = match model {
            Some(m) => {
                let nf = m.eig.frequencies().len();
                (nf.to_string(), generator_memory_bytes(m.couplings.len(), nf, l).to_string())
            }
            None => (String::new(), String::new()),
        };
        if let Some(m) = model {
            if beta == betas[0] {
                memory.push(json!({
                    "sites": l,
                    "ancillas": m.couplings.len(),
                    "num_frequencies": m.eig.frequencies().len(),
                    "bytes": generator_memory_bytes(m.couplings.len(), m.eig.frequencies().len(), l) as f64,
                }));
            }
        }
        let row = match res {
            Ok(sp) => vec![
                l.to_string(),
                num(beta),
                num(sp.trace_distance),
                num(sp.trace_distance.log10()),
                num(sp.spectral_gap),
                "true".into(),
                nf,
                mem,
                "ok".into(),
            ],
            Err(e) => vec![
                l.to_string(),
                num(beta),
                String::new(),
                String::new(),
                String::new(),
                matches!(e, Error::NonUniqueSteadyState { .. }).then(|| "false".to_string()).unwrap_or_default(),
                nf,
                mem,
                e.kind().into(),
            ],
        };
        table.rows.push(row);
    }
    let mut rep = report(cfg);
    let worst = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().map(|s| s.trace_distance))
        .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))));
    rep.trace_distance = worst;
    rep.details = json!({ "memory_estimate": memory, "memory_rule": "M * N_omega * 2^(4L) * 16 bytes" });
    Ok(RunOutput { report: rep, tables: vec![table] })
}

pub fn run_rates_plot(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let big_omega = cfg.big_omega.unwrap();
    let gamma = cfg.gamma.unwrap();
    let n = cfg.omega_points;
    let range = cfg.omega_range;
    let mut table = Table::new(
        format!("{}.csv", cfg.label()),
        ["beta", "omega", "log10_rate", "log10_db_violation"].map(String::from).to_vec(),
    );
    for &beta in cfg.betas.as_ref().unwrap() {
        for k in 0..n {
            // integer numerator keeps grid points such as ω = Ω exact
            let omega = (2 * k as i64 - (n as i64 - 1)) as f64 * range / (n - 1) as f64;
            let rate = cfg.rate_scale * spectral_density_at(beta, gamma, big_omega, omega);
            let db = if omega > 0.0 { db_violation_at(beta, gamma, big_omega, omega).ok() } else { None };
            table.rows.push(vec![
                num(beta),
                num(omega),
                num(rate.log10()),
                opt(db.filter(|&v| v > 0.0).map(f64::log10)),
            ]);
        }
    }
    let mut rep = report(cfg);
    rep.details = json!({ "big_omega": big_omega, "gamma": gamma, "points_per_beta": n });
    Ok(RunOutput { report: rep, tables: vec![table] })
}

pub fn run_oracle(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gamma = cfg.gamma.unwrap();
    let beta = cfg.beta.unwrap();
    let ratios = cfg.coupling_ratios.clone().unwrap();
    let reports: Vec<_> = ratios
        .par_iter()
        .map(|&r| {
            validate_reduction(&OracleScenario {
                field: cfg.oracle_field,
                g: r * gamma,
                gamma,
                omega: cfg.oracle_omega,
                beta,
                horizon: cfg.horizon,
                samples: cfg.samples,
            })
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        format!("{}.csv", cfg.label()),
        ["coupling_ratio", "t", "deviation_rate_scale_1", "deviation_rate_scale_2"].map(String::from).to_vec(),
    );
    for (&r, rep) in ratios.iter().zip(&reports) {
        let c1 = rep.comparison(RATE_SCALES[0]).expect("scale 1 compared");
        let c2 = rep.comparison(RATE_SCALES[1]).expect("scale 2 compared");
        for (k, &t) in rep.times.iter().enumerate() {
            table.rows.push(vec![num(r), num(t), num(c1.deviation[k]), num(c2.deviation[k])]);
        }
    }
    let mut rep = report(cfg);
    let mut summary = Vec::new();
    for (&r, o) in ratios.iter().zip(&reports) {
        rep.warnings.extend(o.warnings.iter().map(|w| format!("g/Γ = {r}: {w}")));
        summary.push(json!({
            "coupling_ratio": r,
            "max_deviation": o.comparisons.iter().map(|c| json!({"rate_scale": c.rate_scale, "max": c.max_deviation})).collect::<Vec<_>>(),
            "regime": o.regime,
            "joint_trace_defect": o.joint_trace_defect,
            "joint_min_eigenvalue": o.joint_min_eigenvalue,
            "step": o.step,
        }));
    }
    let monotone = |scale: f64| {
        shrinks_with_ratio(
            &ratios,
            &reports.iter().map(|o| o.comparison(scale).unwrap().max_deviation).collect::<Vec<_>>(),
        )
    };
    rep.details = json!({
        "scenarios": summary,
        "shrinks_with_coupling": RATE_SCALES.iter().map(|&s| json!({"rate_scale": s, "monotone": monotone(s)})).collect::<Vec<_>>(),
    });
    Ok(RunOutput { report: rep, tables: vec![table] })
}

/// True when the deviation strictly decreases as the coupling ratio decreases.
pub fn shrinks_with_ratio(ratios: &[f64], deviations: &[f64]) -> bool {
    let mut pairs: Vec<(f64, f64)> = ratios.iter().cloned().zip(deviations.iter().cloned()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.windows(2).all(|w| w[1].1 < w[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: RunKind) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(kind);
        c.beta = Some(1.0);
        c.gamma = Some(0.1);
        c.t_cycle = Some(4.0);
        c
    }

    #[test]
    fn chain_layout_uses_even_sites() {
        let cs = coupling_layout(ModelKind::Chain, 3, crate::hamiltonian::Axis::X, 0.1).unwrap();
        assert_eq!(cs.iter().map(|c| (c.ancilla, c.site)).collect::<Vec<_>>(), vec![(0, 0), (1, 2)]);
        assert_eq!(coupling_layout(ModelKind::Chain, 4, crate::hamiltonian::Axis::X, 0.1).unwrap().len(), 2);
    }

    #[test]
    fn default_sweep_range_follows_spectrum_width() {
        let c = preset("fig2a").unwrap();
        let m = Model::build(ModelParams::from_config(&c, 1.0, 0.1)).unwrap();
        assert!((m.schedule.omega_max - 1.2 * 4.81245154965971).abs() < 1e-9);
        assert!((m.schedule.omega_max - 5.7).abs() < 0.1);
    }

    #[test]
    fn zero_coupling_trajectory_is_constant() {
        let mut c = quick(RunKind::Trajectory);
        c.g = Some(0.0);
        c.initial_state = Some("01".into());
        c.t_final = Some(8.0);
        let out = run(&c).unwrap();
        let t = out.table();
        assert_eq!(t.rows.len(), 9);
        for col in ["p_e1", "p_e2", "p_e3", "p_e4", "trace_distance"] {
            let v = t.numbers(col).unwrap();
            assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-14), "{col}");
        }
        assert_eq!(out.report.details["stop_reason"], "t_final");
    }

    #[test]
    fn trajectory_header_and_reference_columns() {
        let mut c = quick(RunKind::Trajectory);
        c.t_final = Some(4.0);
        let out = run(&c).unwrap();
        let t = out.table();
        assert_eq!(t.header[0], "t");
        assert_eq!(t.header.last().unwrap(), "trace_distance");
        assert_eq!(t.header.len(), 1 + 4 + 4 + 1);
        let g1 = t.numbers("gibbs_e1").unwrap();
        assert!(g1.iter().all(|&x| x == g1[0]));
    }

    #[test]
    fn outputs_are_deterministic() {
        let mut c = quick(RunKind::SweepGrid);
        c.grid = Some(GridAxes::AB);
        c.a_values = Some(vec![0.3, 0.8]);
        c.b_values = Some(vec![0.5]);
        let a = run(&c).unwrap().table().to_csv().unwrap();
        let b = run(&c).unwrap().table().to_csv().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("a,b,log10_trace_distance,spectral_gap,gap_iqr,congested,status\n"));
    }

    #[test]
    fn grid_failures_are_recorded_not_fatal() {
        let mut c = quick(RunKind::SweepGrid);
        c.grid = Some(GridAxes::AB);
        c.g = Some(0.0);
        c.a_values = Some(vec![0.8]);
        c.b_values = Some(vec![0.5]);
        let out = run(&c).unwrap();
        let status = out.table().column("status").unwrap();
        assert_eq!(out.table().rows[0][status], "non_unique_steady_state");
    }

    #[test]
    fn rates_plot_contains_resonance_exactly() {
        let out = run(&preset("fig1b").unwrap()).unwrap();
        let t = out.table();
        let om = t.numbers("omega").unwrap();
        let k = om.iter().position(|&w| w == 8.0).expect("grid contains Ω");
        assert!(t.numbers("log10_rate").unwrap()[k].is_finite());
        assert_eq!(t.rows.len(), 2 * 481);
    }

    #[test]
    fn overshoot_measure() {
        let hist = vec![vec![0.0, 1.0], vec![0.6, 0.4], vec![0.5, 0.5]];
        assert!((max_overshoot(&[0.0, 1.0], &[0.5, 0.5], &hist) - 0.1).abs() < 1e-15);
        assert_eq!(max_overshoot(&[0.0, 1.0], &[0.7, 0.3], &hist), 0.0);
    }

    #[test]
    fn memory_rule() {
        assert_eq!(generator_memory_bytes(2, 10, 4), 2 * 10 * 65536 * 16);
    }

    #[test]
    fn random_initial_state_is_seeded() {
        let m = Model::build(ModelParams::from_config(&preset("fig2a").unwrap(), 1.0, 0.1)).unwrap();
        let a = initial_state(&m.eig, "random", 7).unwrap();
        let b = initial_state(&m.eig, "random", 7).unwrap();
        let c = initial_state(&m.eig, "random", 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shrink_check() {
        assert!(shrinks_with_ratio(&[0.5, 0.2, 0.1], &[0.4, 0.2, 0.1]));
        assert!(!shrinks_with_ratio(&[0.5, 0.2, 0.1], &[0.2, 0.22, 0.24]));
        assert!(shrinks_with_ratio(&[0.1, 0.5, 0.2], &[0.1, 0.4, 0.2]));
    }
}
