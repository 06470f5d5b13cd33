use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use noisebath::analysis::Window;
use noisebath::spectral::SpectralTarget;
use noisebath::spin_model::{Connectivity, Decomposition};

use crate::error::{CliError, CliResult};

pub const OBSERVABLES: [&str; 4] = ["sx", "sy", "sz", "charge"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub n: usize,
    pub window: (f64, f64),
    /// identical widths; otherwise `width_ratios` fixes κ_i/κ
    #[serde(default = "yes")]
    pub homogeneous: bool,
    #[serde(default)]
    pub width_ratios: Option<Vec<f64>>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

fn yes() -> bool {
    true
}

fn default_grid() -> usize {
    2001
}

fn default_iterations() -> usize {
    500
}

impl FitSettings {
    pub fn new(n: usize, window: (f64, f64)) -> Self {
        FitSettings { n, window, homogeneous: true, width_ratios: None, grid_points: default_grid(), max_iterations: default_iterations() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub target: SpectralTarget,
    /// absent: the target must be a Lorentzian sum, realized mode by mode
    #[serde(default)]
    pub fit: Option<FitSettings>,
    /// a second, identical bath coupled through σ_y
    #[serde(default)]
    pub two_bath: bool,
    pub delta: f64,
    #[serde(default = "one")]
    pub spins_per_mode: usize,
    #[serde(default)]
    pub multiplicities: Option<Vec<usize>>,
    pub decomposition: Decomposition,
    pub gate_error: f64,
    /// Γ̄/γ̄ on the bath qubits
    pub dephasing_ratio: f64,
    #[serde(default)]
    pub system_noise: bool,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub symmetrize: bool,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub t_end: Option<f64>,
    pub observables: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub oracle: bool,
    /// boson-oracle truncation n_max
    #[serde(default)]
    pub boson_oracle: Option<usize>,
    #[serde(default)]
    pub fft: bool,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default)]
    pub steady_state: bool,
}

fn one() -> usize {
    1
}

fn bad<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.target.validate().map_err(|e| CliError::Config(format!("target: {e}")))?;
        if !self.delta.is_finite() {
            return bad("Δ must be finite");
        }
        if !(self.gate_error > 0.0 && self.gate_error < 0.5) {
            return bad("gate error must lie in (0, 0.5)");
        }
        if !(self.dephasing_ratio >= 0.0) {
            return bad("dephasing ratio must be ≥ 0");
        }
        if self.spins_per_mode == 0 {
            return bad("spins_per_mode must be ≥ 1");
        }
        if self.r.is_some() != self.system_noise {
            return bad("r is set exactly when system noise is enabled");
        }
        if let Some(r) = self.r {
            if !(r >= 0.0) {
                return bad("r must be ≥ 0");
            }
            if self.fit.is_none() {
                return bad("r enters the fit, so a fit section is required");
            }
        }
        if self.system_noise && !self.symmetrize {
            return bad("system damping maps onto the spectral background only with symmetrization");
        }
        if self.symmetrize && self.connectivity == Connectivity::SwapNetwork {
            return bad("symmetrization is not available on the swap network");
        }
        match (self.steps, self.t_end) {
            (Some(0), _) => return bad("steps must be ≥ 1"),
            (_, Some(t)) if !(t > 0.0) => return bad("t_end must be > 0"),
            (None, None) if !self.steady_state => return bad("give steps or t_end"),
            (Some(_), Some(_)) => return bad("give either steps or t_end, not both"),
            _ => {}
        }
        match &self.fit {
            None => {
                if !matches!(self.target, SpectralTarget::LorentzianSum { .. }) {
                    return bad("without a fit section the target must be a Lorentzian sum");
                }
            }
            Some(f) => {
                if f.n == 0 || !(f.window.0 < f.window.1) || f.grid_points < 3 {
                    return bad("fit needs n ≥ 1, a proper window and ≥ 3 grid points");
                }
                if !f.homogeneous && f.width_ratios.as_ref().map(Vec::len) != Some(f.n) {
                    return bad("inhomogeneous fits need n width ratios");
                }
            }
        }
        if let Some(m) = &self.multiplicities {
            if m.iter().any(|&x| x == 0) {
                return bad("multiplicities must be ≥ 1");
            }
        }
        if self.observables.is_empty() {
            return bad("at least one observable required");
        }
        for o in &self.observables {
            if !OBSERVABLES.contains(&o.as_str()) {
                return bad(format!("unknown observable `{o}` (known: {})", OBSERVABLES.join(", ")));
            }
        }
        if let Some(n) = self.boson_oracle {
            if n == 0 {
                return bad("boson oracle needs n_max ≥ 1");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use noisebath::spectral::LorentzianMode;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            target: SpectralTarget::LorentzianSum { modes: vec![LorentzianMode { weight: 1.0, center: 1.0, width: 0.5 }], background: 0.0 },
            fit: None,
            two_bath: false,
            delta: 0.9,
            spins_per_mode: 2,
            multiplicities: None,
            decomposition: Decomposition::NativeMS,
            gate_error: 0.01,
            dephasing_ratio: 0.5,
            system_noise: false,
            r: None,
            symmetrize: false,
            steps: Some(10),
            t_end: None,
            observables: vec!["sx".into()],
            output_dir: None,
            oracle: false,
            boson_oracle: None,
            fft: false,
            window: Window::None,
            connectivity: Connectivity::AllToAll,
            steady_state: false,
        }
    }

    #[test]
    fn roundtrip_and_validation() {
        let cfg = base();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let mut c = base();
        c.r = Some(0.5);
        assert!(c.validate().is_err());
        let mut c = base();
        c.observables = vec!["energy".into()];
        assert!(c.validate().is_err());
        let mut c = base();
        c.t_end = Some(1.0);
        assert!(c.validate().is_err());
        let mut c = base();
        c.target = SpectralTarget::Ohmic { alpha: 0.1, temperature: noisebath::spectral::Temperature::new(1.5).unwrap(), cutoff: 10.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn schema_errors_are_config_errors() {
        let e = ExperimentConfig::from_json("{\"name\": 3}").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("schema"));
    }
}
