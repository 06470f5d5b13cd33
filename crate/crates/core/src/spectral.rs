//! Target bath spectral functions S(ω) (ħ = k_B = 1).
//!
//! Positive ω is absorption by the bath, negative ω emission. Thermal forms
//! obey S(−ω) = e^{−ω/T} S(ω).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;

/// k_B T in angular-frequency units. `0` is the zero-temperature limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return invalid(format!("temperature must be finite and ≥ 0, got {value}"));
        }
        Ok(Temperature(value))
    }

    pub fn zero() -> Self {
        Temperature(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// ω / (1 − e^{−ω/T}), the bosonic detailed-balance factor with its ω → 0 limit T.
pub fn thermal_factor(omega: f64, t: Temperature) -> f64 {
    if t.is_zero() {
        return omega.max(0.0);
    }
    let x = omega / t.0;
    if x.abs() < 1e-7 {
        return t.0 * (1.0 + x / 2.0 + x * x / 12.0);
    }
    // expm1 keeps full precision for small |x|; for x ≪ 0 the ratio underflows to 0
    -omega / (-x).exp_m1()
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() {
        Ok(())
    } else {
        invalid(format!("ω must be finite, got {omega}"))
    }
}

/// Ohmic spectral function 4πα ω/(1 − e^{−ω/T}) e^{−|ω|/ω_c}.
pub fn eval_ohmic(omega: f64, alpha: f64, t: Temperature, cutoff: f64) -> Result<f64> {
    check_omega(omega)?;
    if !(alpha >= 0.0 && cutoff > 0.0) {
        return invalid("ohmic bath needs α ≥ 0 and ω_c > 0");
    }
    Ok(4.0 * PI * alpha * thermal_factor(omega, t) * (-omega.abs() / cutoff).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianMode {
    /// v², the mode area divided by 2π
    pub weight: f64,
    pub center: f64,
    pub width: f64,
}

impl LorentzianMode {
    pub fn eval(&self, omega: f64) -> f64 {
        let dw = omega - self.center;
        self.weight * self.width / (0.25 * self.width * self.width + dw * dw)
    }
}

/// Σ v_i² κ_i / ((κ_i/2)² + (ω − ω_i)²) + background.
pub fn eval_lorentzian_sum(omega: f64, modes: &[LorentzianMode], background: f64) -> f64 {
    modes.iter().map(|m| m.eval(omega)).sum::<f64>() + background
}

/// Resonant single-electron-transistor bath: ohmic at low frequency with
/// resonances at ω₀ and 2ω₀ and a quartic cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetStructured {
    pub alpha: f64,
    pub resonance: f64,
    pub width: f64,
    pub temperature: Temperature,
    pub cutoff: f64,
}

impl SetStructured {
    /// α = 0.25, κ′ = 0.4ω₀, T = 0.3ω₀, ω_c = √3 ω₀.
    pub fn standard(omega0: f64) -> Self {
        SetStructured {
            alpha: 0.25,
            resonance: omega0,
            width: 0.4 * omega0,
            temperature: Temperature(0.3 * omega0),
            cutoff: 3f64.sqrt() * omega0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// The resonances are placed at ±ω_k: the density of bath modes depends on
/// the mode energy |ω| only, which keeps the emission side in detailed balance.
pub fn eval_set_target(omega: f64, p: &SetStructured) -> Result<f64> {
    check_omega(omega)?;
    if !(p.alpha >= 0.0 && p.width > 0.0 && p.cutoff > 0.0) {
        return invalid("SET target needs α ≥ 0, κ′ > 0 and ω_c > 0");
    }
    let k = p.width;
    let lorentz: f64 = [p.resonance, 2.0 * p.resonance]
        .iter()
        .map(|wk| {
            let dw = omega.abs() - wk;
            k / (0.25 * k * k + dw * dw)
        })
        .sum();
    let cut = 1.0 / (1.0 + (omega / p.cutoff).powi(4));
    Ok(p.alpha * thermal_factor(omega, p.temperature) * lorentz / (2.0 * PI) * cut)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralTarget {
    LorentzianSum { modes: Vec<LorentzianMode>, background: f64 },
    Ohmic { alpha: f64, temperature: Temperature, cutoff: f64 },
    Set(SetStructured),
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl SpectralTarget {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralTarget::LorentzianSum { modes, background } => {
                if modes.iter().any(|m| !(m.width > 0.0 && m.weight >= 0.0 && m.center.is_finite())) {
                    return invalid("Lorentzian modes need κ > 0 and v² ≥ 0");
                }
                if !(*background >= 0.0) {
                    return invalid("background must be ≥ 0");
                }
            }
            SpectralTarget::Ohmic { alpha, cutoff, .. } => {
                if !(*alpha >= 0.0 && *cutoff > 0.0) {
                    return invalid("ohmic bath needs α ≥ 0 and ω_c > 0");
                }
            }
            SpectralTarget::Set(p) => {
                if !(p.alpha >= 0.0 && p.width > 0.0 && p.cutoff > 0.0) {
                    return invalid("SET target needs α ≥ 0, κ′ > 0 and ω_c > 0");
                }
            }
            SpectralTarget::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return invalid("tabulated target needs ≥ 2 points and matching columns");
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("tabulated grid must be strictly increasing");
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return invalid("tabulated values must be ≥ 0");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, omega: f64) -> Result<f64> {
        check_omega(omega)?;
        match self {
            SpectralTarget::LorentzianSum { modes, background } => Ok(eval_lorentzian_sum(omega, modes, *background)),
            SpectralTarget::Ohmic { alpha, temperature, cutoff } => eval_ohmic(omega, *alpha, *temperature, *cutoff),
            SpectralTarget::Set(p) => eval_set_target(omega, p),
            SpectralTarget::Tabulated { grid, values } => {
                let (lo, hi) = (grid[0], grid[grid.len() - 1]);
                if omega < lo || omega > hi {
                    return Err(Error::OutsideGrid { omega, min: lo, max: hi });
                }
                let idx = grid.partition_point(|&g| g <= omega).clamp(1, grid.len() - 1);
                let (x0, x1) = (grid[idx - 1], grid[idx]);
                let s = (omega - x0) / (x1 - x0);
                Ok(values[idx - 1] * (1.0 - s) + values[idx] * s)
            }
        }
    }

    pub fn temperature(&self) -> Option<Temperature> {
        match self {
            SpectralTarget::Ohmic { temperature, .. } => Some(*temperature),
            SpectralTarget::Set(p) => Some(p.temperature),
            _ => None,
        }
    }

    /// Loads a two-column (ω, S) CSV; a non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!("row {row}: expected two columns")));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(w), Ok(s)) => {
                    grid.push(w);
                    values.push(s);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::Parse(format!("row {row}: non-numeric entry"))),
            }
        }
        let t = SpectralTarget::Tabulated { grid, values };
        t.validate()?;
        Ok(t)
    }
}

/// One entry S_ij(ω) of a multichannel target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ChannelFunction {
    Real { target: SpectralTarget },
    /// factor · S(ω)
    Scaled { factor: C64, target: SpectralTarget },
    /// Σ w_k κ_k / ((κ_k/2)² + (ω − ω_k)²) with complex w_k
    ComplexLorentzian { modes: Vec<(C64, f64, f64)> },
}

impl ChannelFunction {
    pub fn eval(&self, omega: f64) -> Result<C64> {
        Ok(match self {
            ChannelFunction::Real { target } => C64::new(target.eval(omega)?, 0.0),
            ChannelFunction::Scaled { factor, target } => factor * target.eval(omega)?,
            ChannelFunction::ComplexLorentzian { modes } => modes
                .iter()
                .map(|(w, c, k)| w * (k / (0.25 * k * k + (omega - c) * (omega - c))))
                .sum(),
        })
    }

    fn is_real_nonnegative(&self) -> bool {
        match self {
            ChannelFunction::Real { .. } => true,
            ChannelFunction::Scaled { factor, .. } => factor.im == 0.0 && factor.re >= 0.0,
            ChannelFunction::ComplexLorentzian { modes } => modes.iter().all(|(w, _, _)| w.im == 0.0 && w.re >= 0.0),
        }
    }
}

/// Matrix-valued target S_ij(ω) with S_ji = S_ij*; entries stored for i ≤ j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiChannelTarget {
    pub n_s: usize,
    pub entries: BTreeMap<(usize, usize), ChannelFunction>,
}

impl MultiChannelTarget {
    pub fn single(target: SpectralTarget) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), ChannelFunction::Real { target });
        MultiChannelTarget { n_s: 1, entries }
    }

    pub fn new(n_s: usize, entries: BTreeMap<(usize, usize), ChannelFunction>) -> Result<Self> {
        for (&(i, j), f) in &entries {
            if i > j || j >= n_s {
                return Err(Error::IndexOutOfRange { i, j, n: n_s });
            }
            if i == j && !f.is_real_nonnegative() {
                return invalid(format!("diagonal channel ({i}, {i}) must be real and nonnegative"));
            }
            if let ChannelFunction::Real { target } | ChannelFunction::Scaled { target, .. } = f {
                target.validate()?;
            }
        }
        Ok(MultiChannelTarget { n_s, entries })
    }

    /// S_ij(ω); channels that were not given are identically zero.
    pub fn eval(&self, omega: f64, i: usize, j: usize) -> Result<C64> {
        if i >= self.n_s || j >= self.n_s {
            return Err(Error::IndexOutOfRange { i, j, n: self.n_s });
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let v = match self.entries.get(&(a, b)) {
            Some(f) => f.eval(omega)?,
            None => C64::new(0.0, 0.0),
        };
        Ok(if i <= j { v } else { v.conj() })
    }
}

/// Trapezoid weights of a uniform grid over [a, b].
pub fn trapezoid_grid(a: f64, b: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|k| a + h * k as f64).collect();
    let ws: Vec<f64> = (0..points).map(|k| if k == 0 || k == points - 1 { h / 2.0 } else { h }).collect();
    (xs, ws)
}
