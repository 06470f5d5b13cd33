//! spectral target → fit → spin model → circuits → simulator, with the
//! master-equation oracles run on the same time grid.

use std::fs;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use noisebath::analysis::{self, Peak, Spectrum};
use noisebath::circuit::{self, Schedule};
use noisebath::coarse_grain::{self, FitConfig, FitResult, LorentzianBath, WidthConstraint};
use noisebath::lindblad::{self, IntegrateOptions, LindbladSpec};
use noisebath::linalg::{self, CMatrix, C64};
use noisebath::noisy_sim::{self, SimRun};
use noisebath::observable::{Diagnostics, Observable, Trajectory};
use noisebath::spectral::{MultiChannelTarget, SpectralTarget};
use noisebath::spin_model::{
    self, AuxSpin, Axis, Connectivity, Decomposition, LayerStrength, NoiseProfile, QubitRates, SpinBathModel, SystemNoise,
    SystemSpec, TrotterPlan, TwoBathForm,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, StageExt};

pub const ORACLE_STEADY_TOL: f64 = 1e-10;

/// Everything derived from a config before any time evolution.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub fit: Option<FitResult>,
    pub bath: LorentzianBath,
    pub model: SpinBathModel,
    pub depth: usize,
    pub plan: TrotterPlan,
    pub schedule: Schedule,
}

pub fn fit_config(cfg: &ExperimentConfig) -> Option<FitConfig> {
    let f = cfg.fit.as_ref()?;
    let mut fc = FitConfig::new(f.n, f.window);
    fc.grid_points = f.grid_points;
    fc.max_iterations = f.max_iterations;
    if !f.homogeneous {
        fc.width_constraint = WidthConstraint::FixedRatios(f.width_ratios.clone().unwrap_or_default());
    }
    if let Some(r) = cfg.r {
        fc = fc.with_ratio(r);
    }
    Some(fc)
}

/// Modes of a Lorentzian-sum target taken as they are (v = √weight).
pub fn exact_bath(target: &SpectralTarget) -> CliResult<LorentzianBath> {
    match target {
        SpectralTarget::LorentzianSum { modes, background } => {
            let mut bath = LorentzianBath::single(&modes.iter().map(|m| (m.weight.sqrt(), m.center, m.width)).collect::<Vec<_>>());
            bath.system_rates = vec![background / 4.0];
            Ok(bath)
        }
        _ => Err(CliError::Config("only Lorentzian-sum targets can skip the fit".into())),
    }
}

pub fn obtain_bath(cfg: &ExperimentConfig) -> CliResult<(LorentzianBath, Option<FitResult>)> {
    match fit_config(cfg) {
        None => Ok((exact_bath(&cfg.target)?, None)),
        Some(fc) => {
            let res = coarse_grain::fit(&MultiChannelTarget::single(cfg.target.clone()), &fc).stage("fit")?;
            Ok((res.bath.clone(), Some(res)))
        }
    }
}

pub fn build_model(cfg: &ExperimentConfig, bath: &LorentzianBath) -> CliResult<SpinBathModel> {
    let system = SystemSpec::single(cfg.delta);
    let noise = NoiseProfile {
        dephasing_ratio: cfg.dephasing_ratio,
        system: if cfg.system_noise { SystemNoise::SymmetrizedDamping } else { SystemNoise::Noiseless },
    };
    if cfg.two_bath {
        let form = if cfg.decomposition == Decomposition::NativeISwap { TwoBathForm::Exchange } else { TwoBathForm::Axes };
        return spin_model::build_two_bath_model(bath, bath, &system, &noise, form).stage("spin_model");
    }
    let mult = match &cfg.multiplicities {
        Some(m) => m.clone(),
        None => vec![cfg.spins_per_mode; bath.modes.len()],
    };
    spin_model::bosons_to_spins(bath, &mult, &system, &noise).stage("spin_model")
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    cfg.validate()?;
    let (bath, fit) = obtain_bath(cfg)?;
    prepare_from_bath(cfg, bath, fit)
}

pub fn prepare_from_bath(cfg: &ExperimentConfig, bath: LorentzianBath, fit: Option<FitResult>) -> CliResult<Prepared> {
    let model = build_model(cfg, &bath)?;
    let depth = model.table_depth(cfg.decomposition, cfg.connectivity).stage("circuit")?;
    let tau = spin_model::match_trotter_step(depth, cfg.gate_error, model.reference_width()).stage("spin_model")?;
    let steps = match (cfg.steps, cfg.t_end) {
        (Some(s), _) => s,
        (None, Some(t)) => ((t / tau) - 1e-9).ceil().max(1.0) as usize,
        (None, None) => 1,
    };
    let plan = TrotterPlan::new(&model, cfg.decomposition, depth, cfg.gate_error, steps).stage("spin_model")?;
    let schedule = if cfg.connectivity == Connectivity::SwapNetwork {
        circuit::swap_network(&model, &plan)
    } else if cfg.symmetrize {
        circuit::symmetrize(&model, &plan)
    } else {
        circuit::trotter_step(&model, &plan).map(Schedule::plain)
    }
    .stage("circuit")?;
    if schedule.depth() != depth {
        return Err(CliError::Stage {
            stage: "circuit",
            source: noisebath::error::Error::Invariant(format!("circuit depth {} differs from the tabulated {depth}", schedule.depth())),
        });
    }
    Ok(Prepared { config: cfg.clone(), fit, bath, model, depth, plan, schedule })
}

fn local_operator(name: &str) -> CMatrix {
    match name {
        "sx" => linalg::sigma_x(),
        "sy" => linalg::sigma_y(),
        "sz" => linalg::sigma_z(),
        // island charge: occupation of the upper system level
        _ => linalg::excited_projector(),
    }
}

pub fn observables(names: &[String], dims: &[usize]) -> CliResult<Vec<Observable>> {
    names.iter().map(|n| Observable::local(n.as_str(), &local_operator(n), &[0], dims).stage("observable")).collect()
}

/// |+x⟩ on the system spin, everything else in its ground state.
pub fn initial_state(dims: &[usize]) -> CliResult<CMatrix> {
    let plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
    lindblad::product_initial_state(dims, 1, &plus).stage("initial state")
}

impl Prepared {
    pub fn tau(&self) -> f64 {
        self.plan.tau
    }

    pub fn steps(&self) -> usize {
        self.plan.steps
    }

    pub fn sim_run(&self) -> CliResult<SimRun> {
        let n = self.model.n_qubits();
        let dims = vec![2; n];
        Ok(SimRun::new(
            self.schedule.clone(),
            self.plan.steps,
            initial_state(&dims)?,
            observables(&self.config.observables, &dims)?,
            self.plan.strengths.clone(),
            self.plan.tau,
        ))
    }

    pub fn simulate(&self) -> CliResult<Trajectory> {
        noisy_sim::run(&self.sim_run()?).stage("noisy_sim")
    }

    pub fn spin_oracle_spec(&self) -> CliResult<LindbladSpec> {
        lindblad::build_spin_lindblad(&self.model).stage("lindblad_oracle")
    }

    pub fn boson_oracle_spec(&self, n_max: usize) -> CliResult<LindbladSpec> {
        let system = SystemSpec::single(self.config.delta);
        if self.config.two_bath {
            lindblad::build_boson_lindblad_multi(&[(&self.bath, Axis::X), (&self.bath, Axis::Y)], &system, n_max)
        } else {
            lindblad::build_boson_lindblad(&self.bath, &system, n_max)
        }
        .stage("lindblad_oracle")
    }

    /// Integrates `spec` with samples at the Trotter times kτ.
    pub fn oracle_trajectory(&self, spec: &LindbladSpec) -> CliResult<(Trajectory, f64)> {
        let tau = self.plan.tau;
        let dt = lindblad::suggest_dt(spec, tau);
        let every = (tau / dt).round() as usize;
        let opts = IntegrateOptions::new(self.plan.steps as f64 * tau, dt, every);
        let obs = observables(&self.config.observables, &spec.dims)?;
        let rho0 = initial_state(&spec.dims)?;
        let mut traj = lindblad::integrate(spec, &rho0, &opts, &obs).stage("lindblad_oracle")?;
        // report samples on the exact Trotter grid
        for (k, t) in traj.times.iter_mut().enumerate() {
            *t = k as f64 * tau;
        }
        Ok((traj, dt))
    }

    pub fn spin_oracle(&self) -> CliResult<(Trajectory, f64)> {
        self.oracle_trajectory(&self.spin_oracle_spec()?)
    }

    pub fn boson_oracle(&self, n_max: usize) -> CliResult<(Trajectory, f64)> {
        self.oracle_trajectory(&self.boson_oracle_spec(n_max)?)
    }

    /// Periodic steady state of the noisy circuit and stationary state of the
    /// spin oracle, both on the logical register.
    pub fn steady_states(&self) -> CliResult<SteadyReport> {
        let (sim_rho, residual) = noisy_sim::steady_state(&self.schedule, &self.plan.strengths).stage("noisy_sim")?;
        let spec = self.spin_oracle_spec()?;
        let oracle_rho = lindblad::steady_state(&spec, ORACLE_STEADY_TOL).stage("lindblad_oracle")?;
        let obs = observables(&self.config.observables, &spec.dims)?;
        let mut simulator = Vec::new();
        let mut oracle = Vec::new();
        for o in &obs {
            simulator.push(o.expectation(&sim_rho).stage("noisy_sim")?);
            oracle.push(o.expectation(&oracle_rho).stage("lindblad_oracle")?);
        }
        Ok(SteadyReport {
            names: self.config.observables.clone(),
            simulator,
            oracle,
            simulator_residual: residual,
            simulator_min_eigenvalue: linalg::min_eigenvalue(&sim_rho),
            oracle_min_eigenvalue: linalg::min_eigenvalue(&oracle_rho),
            simulator_trace_error: (linalg::trace(&sim_rho) - 1.0).norm(),
            oracle_trace_error: (linalg::trace(&oracle_rho) - 1.0).norm(),
        })
    }

    /// Largest |v| of the realized bath modes.
    pub fn coupling_scale(&self) -> f64 {
        self.bath.modes.iter().flat_map(|m| m.couplings.iter().map(|c| c.norm())).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub names: Vec<String>,
    pub simulator: Vec<f64>,
    pub oracle: Vec<f64>,
    pub simulator_residual: f64,
    pub simulator_min_eigenvalue: f64,
    pub oracle_min_eigenvalue: f64,
    pub simulator_trace_error: f64,
    pub oracle_trace_error: f64,
}

impl SteadyReport {
    pub fn value(&self, name: &str, oracle: bool) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(if oracle { self.oracle[i] } else { self.simulator[i] })
    }
}

/// Shortest continued-fraction convergent that reproduces x to a few ulps
/// (denominators up to 10⁶).
pub fn rational(x: f64) -> Option<Ratio<i64>> {
    if !x.is_finite() {
        return None;
    }
    let (mut h, mut h1) = (1i64, 0i64);
    let (mut k, mut k1) = (0i64, 1i64);
    let mut rem = x;
    for _ in 0..40 {
        let a = rem.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let hn = a.checked_mul(h)?.checked_add(h1)?;
        let kn = a.checked_mul(k)?.checked_add(k1)?;
        if kn > 1_000_000 {
            return None;
        }
        (h1, h, k1, k) = (h, hn, k, kn);
        if (hn as f64 / kn as f64 - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Some(Ratio::new(hn, kn));
        }
        rem = 1.0 / (rem - a as f64);
    }
    None
}

/// vτ = D ε v/κ evaluated in exact fractions of the inputs.
pub fn v_tau_exact(depth: usize, eps: f64, v: f64, kappa: f64) -> Option<Ratio<i64>> {
    let e = rational(eps)?;
    let v = rational(v)?;
    let k = rational(kappa)?;
    if *k.numer() == 0 {
        return None;
    }
    Some(Ratio::from_integer(depth as i64) * e * v / k)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub simulator: Option<Diagnostics>,
    pub spin_oracle: Option<Diagnostics>,
    pub boson_oracle: Option<Diagnostics>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub fit: Option<FitResult>,
    pub bath: LorentzianBath,
    pub aux: Vec<AuxSpin>,
    pub n_qubits: usize,
    pub n_physical_qubits: usize,
    pub depth: usize,
    pub gate_error: f64,
    pub tau: f64,
    pub steps: usize,
    pub t_end: f64,
    pub v_tau: f64,
    /// vτ as an exact fraction of the inputs, e.g. "9/50"
    pub v_tau_exact: Option<String>,
    pub delta_tau: f64,
    pub rates: Vec<QubitRates>,
    pub layer_strengths: Vec<LayerStrength>,
    /// one text circuit per schedule step, gates with their angles
    pub circuits: Vec<String>,
    pub frames: Vec<String>,
    pub oracle_dt: Option<f64>,
    pub boson_oracle_dt: Option<f64>,
    pub diagnostics: RunDiagnostics,
    pub peaks: Option<Vec<Peak>>,
    pub steady: Option<SteadyReport>,
}

pub struct RunOutput {
    pub prepared: Prepared,
    pub manifest: Manifest,
    pub simulator: Option<Trajectory>,
    pub spin_oracle: Option<Trajectory>,
    pub boson_oracle: Option<Trajectory>,
    pub spectrum: Option<Spectrum>,
}

pub fn manifest_of(p: &Prepared) -> Manifest {
    let v = p.coupling_scale();
    let kappa = p.model.reference_width();
    Manifest {
        config: p.config.clone(),
        fit: p.fit.clone(),
        bath: p.bath.clone(),
        aux: p.model.aux.clone(),
        n_qubits: p.model.n_qubits(),
        n_physical_qubits: p.schedule.n_physical(),
        depth: p.depth,
        gate_error: p.config.gate_error,
        tau: p.plan.tau,
        steps: p.plan.steps,
        t_end: p.plan.steps as f64 * p.plan.tau,
        v_tau: v * p.plan.tau,
        v_tau_exact: v_tau_exact(p.depth, p.config.gate_error, v, kappa).map(|r| r.to_string()),
        delta_tau: p.config.delta * p.plan.tau,
        rates: p.model.rates.clone(),
        layer_strengths: p.plan.strengths.clone(),
        circuits: p.schedule.steps.iter().map(|c| c.to_text()).collect(),
        frames: p.schedule.frames.iter().map(|c| c.to_text()).collect(),
        oracle_dt: None,
        boson_oracle_dt: None,
        diagnostics: RunDiagnostics { simulator: None, spin_oracle: None, boson_oracle: None },
        peaks: None,
        steady: None,
    }
}

pub const PEAK_PROMINENCE: f64 = 0.01;

/// Peaks above 1% of the largest power.
pub fn spectrum_and_peaks(traj: &Trajectory, column: &str, window: analysis::Window) -> CliResult<(Spectrum, Vec<Peak>)> {
    let values = traj.column(column).ok_or_else(|| CliError::Config(format!("no column `{column}`")))?;
    let dt = analysis::uniform_spacing(&traj.times).stage("analysis")?;
    let sp = analysis::power_spectrum(&values, dt, window).stage("analysis")?;
    let top = sp.power.iter().cloned().fold(0.0, f64::max);
    let peaks = analysis::find_peaks(&sp, PEAK_PROMINENCE * top);
    Ok((sp, peaks))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let p = prepare(cfg)?;
    let mut m = manifest_of(&p);
    let time_evolution = cfg.steps.is_some() || cfg.t_end.is_some();
    let (mut simulator, mut spin_oracle, mut boson_oracle, mut spectrum) = (None, None, None, None);
    if time_evolution {
        let (sim, oracle) = rayon::join(
            || p.simulate(),
            || if cfg.oracle { p.spin_oracle().map(Some) } else { Ok(None) },
        );
        let sim = sim?;
        m.diagnostics.simulator = Some(sim.diagnostics.clone());
        if let Some((o, dt)) = oracle? {
            m.diagnostics.spin_oracle = Some(o.diagnostics.clone());
            m.oracle_dt = Some(dt);
            spin_oracle = Some(o);
        }
        if let Some(n_max) = cfg.boson_oracle {
            let (b, dt) = p.boson_oracle(n_max)?;
            m.diagnostics.boson_oracle = Some(b.diagnostics.clone());
            m.boson_oracle_dt = Some(dt);
            boson_oracle = Some(b);
        }
        if cfg.fft {
            let (sp, peaks) = spectrum_and_peaks(&sim, &cfg.observables[0], cfg.window)?;
            m.peaks = Some(peaks);
            spectrum = Some(sp);
        }
        simulator = Some(sim);
    }
    if cfg.steady_state {
        m.steady = Some(p.steady_states()?);
    }
    Ok(RunOutput { prepared: p, manifest: m, simulator, spin_oracle, boson_oracle, spectrum })
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        for (name, t) in [("simulator.csv", &self.simulator), ("oracle.csv", &self.spin_oracle), ("boson_oracle.csv", &self.boson_oracle)] {
            if let Some(t) = t {
                t.write_csv(fs::File::create(dir.join(name))?).stage("output")?;
            }
        }
        if let Some(sp) = &self.spectrum {
            sp.write_csv(fs::File::create(dir.join("spectrum.csv"))?).stage("output")?;
        }
        let mut text = String::new();
        for (k, c) in self.prepared.schedule.steps.iter().enumerate() {
            text.push_str(&format!("# step {k}\n{}\n", c.to_text()));
        }
        fs::write(dir.join("circuit.txt"), text)?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Maximum |a − b| over a common column of two trajectories sampled on the same grid.
pub fn max_deviation(a: &Trajectory, b: &Trajectory, column: &str) -> Option<f64> {
    let x = a.column(column)?;
    let y = b.column(column)?;
    if x.len() != y.len() {
        return None;
    }
    Some(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}
