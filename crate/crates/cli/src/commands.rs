//! Subcommands other than the full simulation: fitting, post-processing and
//! the effective-noise report.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use noisebath::analysis::{self, Peak, Window};
use noisebath::circuit::{self, Role};
use noisebath::coarse_grain::{self, FitResult};
use noisebath::effective_noise::{self, FirstOrderReport, TermExport};
use noisebath::observable::{format_float, Trajectory};
use noisebath::spectral::{MultiChannelTarget, SpectralTarget};
use noisebath::spin_model::{Decomposition, TrotterPlan};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, StageExt};
use crate::pipeline::{self, write_json};
use crate::presets;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub target: SpectralTarget,
    pub window: (f64, f64),
    pub result: FitResult,
}

/// Fits the config's target and writes `fit.json` and `residual.csv`.
pub fn cmd_fit(cfg: &ExperimentConfig, out: &Path) -> CliResult<FitReport> {
    cfg.validate()?;
    let fc = pipeline::fit_config(cfg).ok_or_else(|| CliError::Config("fit section required".into()))?;
    let target = MultiChannelTarget::single(cfg.target.clone());
    let result = coarse_grain::fit(&target, &fc).stage("fit")?;
    fs::create_dir_all(out)?;
    let report = FitReport { target: cfg.target.clone(), window: fc.window, result };
    write_json(&out.join("fit.json"), &report)?;
    let mut text = String::from("omega,target,fit,residual\n");
    let pts = fc.grid_points;
    for k in 0..pts {
        let w = fc.window.0 + (fc.window.1 - fc.window.0) * k as f64 / (pts - 1) as f64;
        let s = cfg.target.eval(w).stage("fit")?;
        let f = report.result.bath.spectral(w, 0, 0).re;
        text.push_str(&format!("{},{},{},{}\n", format_float(w), format_float(s), format_float(f), format_float(f - s)));
    }
    fs::write(out.join("residual.csv"), text)?;
    Ok(report)
}

/// Config for `fit --target ...` without a config file.
pub fn fit_preset(target: &str, n: usize, homogeneous: bool, alpha: Option<f64>, r: Option<f64>) -> CliResult<ExperimentConfig> {
    let mut cfg = match target {
        "ohmic" => presets::example_b(alpha.unwrap_or(0.1), 0.05),
        "set" => presets::example_c(alpha.unwrap_or(0.25), 1.0, None),
        "lorentzian-sum" => {
            let mut c = presets::example_a(1, 0.01, Decomposition::NativeMS, 0.9);
            c.fit = Some(crate::config::FitSettings::new(1, (-4.0, 6.0)));
            c
        }
        other => return Err(CliError::Config(format!("unknown target `{other}` (ohmic | set | lorentzian-sum)"))),
    };
    if let Some(f) = cfg.fit.as_mut() {
        f.n = n;
        f.homogeneous = homogeneous;
        if !homogeneous {
            f.width_ratios = Some(vec![1.0; n]);
        }
    }
    cfg.system_noise = r.is_some();
    cfg.symmetrize = r.is_some();
    cfg.r = r;
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub column: String,
    pub fft: bool,
    pub window: Window,
    /// relative to the largest power
    pub min_prominence: f64,
    pub steady: bool,
    pub tail_fraction: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            column: "sx".into(),
            fft: true,
            window: Window::None,
            min_prominence: pipeline::PEAK_PROMINENCE,
            steady: false,
            tail_fraction: analysis::DEFAULT_TAIL_FRACTION,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub input: String,
    pub column: String,
    pub samples: usize,
    pub resolution: Option<f64>,
    pub peaks: Option<Vec<Peak>>,
    pub steady_value: Option<f64>,
}

pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let file = fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let traj = Trajectory::read_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if traj.is_empty() {
        return Err(CliError::Config(format!("{}: no samples", path.display())));
    }
    Ok(traj)
}

/// Spectrum, peaks and tail average of one trajectory column.
pub fn cmd_analyze(input: &Path, opts: &AnalyzeOptions, out: &Path) -> CliResult<AnalyzeReport> {
    let traj = read_trajectory(input)?;
    let values = traj.column(&opts.column).ok_or_else(|| CliError::Config(format!("no column `{}` in {}", opts.column, input.display())))?;
    fs::create_dir_all(out)?;
    let mut report = AnalyzeReport {
        input: input.display().to_string(),
        column: opts.column.clone(),
        samples: values.len(),
        resolution: None,
        peaks: None,
        steady_value: None,
    };
    if opts.fft {
        let dt = analysis::uniform_spacing(&traj.times).map_err(|e| CliError::Config(e.to_string()))?;
        let sp = analysis::power_spectrum(&values, dt, opts.window).stage("analysis")?;
        let top = sp.power.iter().cloned().fold(0.0, f64::max);
        let peaks = analysis::find_peaks(&sp, opts.min_prominence * top);
        sp.write_csv(fs::File::create(out.join("spectrum.csv"))?).stage("analysis")?;
        write_json(&out.join("peaks.json"), &peaks)?;
        report.resolution = Some(sp.resolution);
        report.peaks = Some(peaks);
    }
    if opts.steady {
        report.steady_value = Some(analysis::steady_window_average(&values, opts.tail_fraction).stage("analysis")?);
    }
    write_json(&out.join("analysis.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QubitNoise {
    pub qubit: usize,
    pub role: Role,
    /// Σ of L_eff weights originating on the qubit
    pub damping: f64,
    pub dephasing: f64,
    /// γ̄ = p_γ D/τ and Γ̄ = p_Γ D/τ
    pub expected_damping: f64,
    pub expected_dephasing: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveNoiseReport {
    pub decomposition: Decomposition,
    pub n_bath: usize,
    pub gate_error: f64,
    pub depth: usize,
    pub tau: f64,
    pub terms: Vec<TermExport>,
    pub qubits: Vec<QubitNoise>,
    /// D[σ_z] coefficient on the system after factoring the bath noise
    pub system_dephasing_weight: f64,
    /// Γ̄_eff in the σ_z-at-Γ/2 convention
    pub system_dephasing_rate: f64,
    pub completely_positive: bool,
    pub guard_exceeded: bool,
    pub first_order: FirstOrderReport,
}

/// L_eff of one Trotter step of the one-mode model with `n_bath` spins.
pub fn effective_noise_report(decomposition: Decomposition, n_bath: usize, eps: f64, delta: f64) -> CliResult<EffectiveNoiseReport> {
    let mut cfg = presets::example_a(n_bath, eps, decomposition, delta);
    cfg.t_end = None;
    cfg.steps = Some(1);
    let p = pipeline::prepare(&cfg)?;
    let step = circuit::trotter_step(&p.model, &p.plan).stage("circuit")?;
    let leff = effective_noise::effective_lindblad(&step, &p.plan.strengths, p.plan.tau).stage("effective_noise")?;
    let h = p.model.hamiltonian_dense().stage("spin_model")?;
    let first_order = effective_noise::verify_first_order(&step, &p.plan.strengths, p.plan.tau, Some(&h)).stage("effective_noise")?;
    let expected = TrotterPlan::effective_rates(&p.plan);
    let qubits = (0..step.n_qubits)
        .map(|q| {
            let (damping, dephasing) = leff.rates_by_origin(q);
            QubitNoise {
                qubit: q,
                role: step.roles[q],
                damping,
                dephasing,
                expected_damping: expected[q].damping,
                expected_dephasing: expected[q].dephasing,
            }
        })
        .collect();
    Ok(EffectiveNoiseReport {
        decomposition,
        n_bath,
        gate_error: eps,
        depth: p.depth,
        tau: p.plan.tau,
        terms: leff.export(),
        qubits,
        system_dephasing_weight: leff.system_dephasing_weight(),
        system_dephasing_rate: leff.system_dephasing_rate(),
        completely_positive: leff.is_completely_positive(1e-9),
        guard_exceeded: leff.guard_exceeded,
        first_order,
    })
}

pub fn render_effective_noise(r: &EffectiveNoiseReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "decomposition {:?}, {} bath qubits, ε = {}, D = {}, τ = {}\n",
        r.decomposition, r.n_bath, r.gate_error, r.depth, r.tau
    ));
    s.push_str("qubit role   damping      expected     dephasing    expected\n");
    for q in &r.qubits {
        s.push_str(&format!(
            "{:<5} {:<6} {:<12.6e} {:<12.6e} {:<12.6e} {:<12.6e}\n",
            q.qubit,
            format!("{:?}", q.role).to_lowercase(),
            q.damping,
            q.expected_damping,
            q.dephasing,
            q.expected_dephasing
        ));
    }
    s.push_str(&format!("system σ_z weight {:.6e} (Γ̄_eff = {:.6e})\n", r.system_dephasing_weight, r.system_dephasing_rate));
    s.push_str(&format!(
        "first-order deviation {:.3e}, Trotter mismatch {:.3e}, completely positive: {}\n",
        r.first_order.deviation, r.first_order.trotter_mismatch, r.completely_positive
    ));
    s.push_str("terms:\n");
    for t in &r.terms {
        s.push_str(&format!("  {:.6e}  {}\n", t.weight, t.operator));
    }
    s
}

pub fn cmd_effective_noise(decomposition: Decomposition, n_bath: usize, eps: f64, delta: f64, out: &Path) -> CliResult<EffectiveNoiseReport> {
    let r = effective_noise_report(decomposition, n_bath, eps, delta)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("effective_noise.json"), &r)?;
    fs::write(out.join("effective_noise.txt"), render_effective_noise(&r))?;
    Ok(r)
}

/// Charge-vs-Δ table of a sweep.
pub fn write_sweep(path: &Path, points: &[presets::SweepPoint]) -> CliResult<()> {
    let mut text = String::from("delta,simulator,oracle,fermi\n");
    for p in points {
        text.push_str(&format!("{},{},{},{}\n", format_float(p.delta), format_float(p.simulator), format_float(p.oracle), format_float(p.fermi)));
    }
    fs::write(path, text)?;
    Ok(())
}
