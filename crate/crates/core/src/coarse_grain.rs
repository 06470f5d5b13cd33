//! Coarse graining: least-squares fit of a target spectral function by damped
//! Lorentzian pseudo-modes with hardware-fixed width ratios.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;
use crate::spectral::{trapezoid_grid, LorentzianMode, MultiChannelTarget, SpectralTarget};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    /// v_im for each system spin m (real for a single spin)
    pub couplings: Vec<C64>,
    pub center: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianBath {
    pub n_s: usize,
    pub modes: Vec<BathMode>,
    /// κ_system for each system spin
    pub system_rates: Vec<f64>,
    /// r_j with κ_system,j = r_j κ, when the system-noise scheme is used
    pub ratios: Option<Vec<f64>>,
}

impl LorentzianBath {
    /// Single-spin bath from (v, ω, κ) triples and no system noise.
    pub fn single(modes: &[(f64, f64, f64)]) -> Self {
        LorentzianBath {
            n_s: 1,
            modes: modes
                .iter()
                .map(|&(v, w, k)| BathMode { couplings: vec![C64::new(v, 0.0)], center: w, width: k })
                .collect(),
            system_rates: vec![0.0],
            ratios: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.system_rates.len() != self.n_s {
            return invalid("one system rate per system spin required");
        }
        for m in &self.modes {
            if m.couplings.len() != self.n_s {
                return invalid("each mode needs one coupling per system spin");
            }
            if !(m.width > 0.0 && m.center.is_finite()) {
                return invalid("mode widths must be > 0");
            }
            if m.couplings.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return invalid("couplings must be finite");
            }
        }
        if self.system_rates.iter().any(|r| !(*r >= 0.0)) {
            return invalid("system rates must be ≥ 0");
        }
        Ok(())
    }

    pub fn system_rate(&self) -> f64 {
        self.system_rates.first().copied().unwrap_or(0.0)
    }

    /// Common width when all modes share it.
    pub fn homogeneous_width(&self) -> Option<f64> {
        let k0 = self.modes.first()?.width;
        self.modes.iter().all(|m| m.width == k0).then_some(k0)
    }

    /// S_ij(ω) = Σ_k v_ik v_jk* L_k(ω) + δ_ij 4κ_system,i.
    pub fn spectral(&self, omega: f64, i: usize, j: usize) -> C64 {
        let mut s: C64 = self
            .modes
            .iter()
            .map(|m| {
                let d = omega - m.center;
                m.couplings[i] * m.couplings[j].conj() * (m.width / (0.25 * m.width * m.width + d * d))
            })
            .sum();
        if i == j {
            s += 4.0 * self.system_rates[i];
        }
        s
    }

    /// Single-spin Lorentzian-sum form, background included.
    pub fn to_target(&self) -> Result<SpectralTarget> {
        if self.n_s != 1 {
            return Err(Error::Unsupported("scalar target of a multi-spin bath".into()));
        }
        Ok(SpectralTarget::LorentzianSum {
            modes: self
                .modes
                .iter()
                .map(|m| LorentzianMode { weight: m.couplings[0].norm_sqr(), center: m.center, width: m.width })
                .collect(),
            background: 4.0 * self.system_rate(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ratios", rename_all = "snake_case")]
pub enum WidthConstraint {
    Homogeneous,
    /// κ_i = ρ_i κ
    FixedRatios(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bath", rename_all = "snake_case")]
pub enum InitialGuess {
    EvenSpacing,
    UserProvided(LorentzianBath),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub n: usize,
    pub window: (f64, f64),
    pub width_constraint: WidthConstraint,
    /// r, one entry per system spin (a single entry is broadcast)
    pub system_ratio: Option<Vec<f64>>,
    pub grid_points: usize,
    pub initial_guess: InitialGuess,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl FitConfig {
    pub fn new(n: usize, window: (f64, f64)) -> Self {
        FitConfig {
            n,
            window,
            width_constraint: WidthConstraint::Homogeneous,
            system_ratio: None,
            grid_points: 2001,
            initial_guess: InitialGuess::EvenSpacing,
            max_iterations: 500,
            tolerance: 1e-12,
        }
    }

    pub fn with_ratio(mut self, r: f64) -> Self {
        self.system_ratio = Some(vec![r]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("at least one mode required");
        }
        if !(self.window.0 < self.window.1) {
            return invalid("degenerate fitting window");
        }
        if self.grid_points < 3 {
            return invalid("at least 3 quadrature points required");
        }
        if let WidthConstraint::FixedRatios(r) = &self.width_constraint {
            if r.len() != self.n || r.iter().any(|x| !(*x > 0.0)) {
                return invalid("width ratios must be n positive numbers");
            }
        }
        if let Some(r) = &self.system_ratio {
            if r.is_empty() || r.iter().any(|x| !(*x >= 0.0)) {
                return invalid("system ratios must be ≥ 0");
            }
        }
        Ok(())
    }

    fn width_ratios(&self) -> Vec<f64> {
        match &self.width_constraint {
            WidthConstraint::Homogeneous => vec![1.0; self.n],
            WidthConstraint::FixedRatios(r) => r.clone(),
        }
    }

    fn system_ratios(&self, n_s: usize) -> Option<Vec<f64>> {
        self.system_ratio.as_ref().map(|r| if r.len() == 1 { vec![r[0]; n_s] } else { r.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub bath: LorentzianBath,
    pub cost: f64,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Target samples on the quadrature grid, per channel i ≤ j.
struct Sampled {
    omegas: Vec<f64>,
    weights: Vec<f64>,
    channels: Vec<(usize, usize)>,
    values: Vec<Vec<C64>>,
}

fn sample(target: &MultiChannelTarget, window: (f64, f64), grid_points: usize) -> Result<Sampled> {
    if !(window.0 < window.1) {
        return invalid("empty fitting window");
    }
    if grid_points < 3 {
        return invalid("at least 3 quadrature points required");
    }
    let (omegas, weights) = trapezoid_grid(window.0, window.1, grid_points);
    let mut channels = Vec::new();
    let mut values = Vec::new();
    for i in 0..target.n_s {
        for j in i..target.n_s {
            channels.push((i, j));
            values.push(omegas.iter().map(|&w| target.eval(w, i, j)).collect::<Result<Vec<_>>>()?);
        }
    }
    Ok(Sampled { omegas, weights, channels, values })
}

/// C = Σ_{i≤j} ∫ |S_ij − S_ij^target|² dω by trapezoid quadrature.
pub fn cost(bath: &LorentzianBath, target: &MultiChannelTarget, window: (f64, f64), grid_points: usize) -> Result<f64> {
    if bath.n_s != target.n_s {
        return invalid("bath and target have different system-spin counts");
    }
    let s = sample(target, window, grid_points)?;
    Ok(cost_on(bath, &s))
}

fn cost_on(bath: &LorentzianBath, s: &Sampled) -> f64 {
    let mut c = 0.0;
    for (ch, &(i, j)) in s.channels.iter().enumerate() {
        for (k, (&w, &q)) in s.omegas.iter().zip(&s.weights).enumerate() {
            c += q * (bath.spectral(w, i, j) - s.values[ch][k]).norm_sqr();
        }
    }
    c
}

fn rms_on(bath: &LorentzianBath, s: &Sampled) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut peak: f64 = 0.0;
    for (ch, &(i, j)) in s.channels.iter().enumerate() {
        for (k, &w) in s.omegas.iter().enumerate() {
            sum += (bath.spectral(w, i, j) - s.values[ch][k]).norm_sqr();
            peak = peak.max(s.values[ch][k].norm());
            count += 1;
        }
    }
    if peak == 0.0 {
        return (sum / count as f64).sqrt();
    }
    (sum / count as f64).sqrt() / peak
}

/// Even placement of n modes over the window with bin-integrated weights.
pub fn initial_guess(target: &MultiChannelTarget, config: &FitConfig) -> Result<LorentzianBath> {
    config.validate()?;
    let (a, b) = config.window;
    let n = config.n;
    let h = (b - a) / n as f64;
    let ratios = config.width_ratios();
    let n_s = target.n_s;
    let per_bin = (config.grid_points / n).max(16) | 1;
    let mut modes = Vec::with_capacity(n);
    let mut peak_area: f64 = 0.0;
    let mut areas = vec![vec![0.0; n_s]; n];
    for (i, row) in areas.iter_mut().enumerate() {
        let (xs, ws) = trapezoid_grid(a + h * i as f64, a + h * (i + 1) as f64, per_bin);
        for (m, slot) in row.iter_mut().enumerate() {
            let mut integral = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                integral += w * target.eval(*x, m, m)?.re;
            }
            *slot = integral;
            peak_area = peak_area.max(integral);
        }
    }
    let floor = 1e-6 * peak_area.max(f64::MIN_POSITIVE);
    for (i, row) in areas.iter().enumerate() {
        modes.push(BathMode {
            couplings: row
                .iter()
                .map(|&area| C64::new((area.max(floor) / (2.0 * std::f64::consts::PI)).sqrt(), 0.0))
                .collect(),
            center: a + h * (i as f64 + 0.5),
            width: ratios[i] * h,
        });
    }
    let system_ratios = config.system_ratios(n_s);
    let system_rates = match &system_ratios {
        Some(r) => r.iter().map(|x| x * h).collect(),
        None => vec![0.0; n_s],
    };
    Ok(LorentzianBath { n_s, modes, system_rates, ratios: system_ratios })
}

/// Parameter packing. Single spin: [ln v_i², ω_i, ln κ]. Multi-spin:
/// [Re v_0i, (Re v_mi, Im v_mi)_{m≥1}, ω_i, ln κ] with the phase of v_0i fixed.
struct Layout {
    n: usize,
    n_s: usize,
    ratios: Vec<f64>,
    system_ratios: Option<Vec<f64>>,
}

impl Layout {
    fn per_mode(&self) -> usize {
        if self.n_s == 1 {
            1
        } else {
            2 * self.n_s - 1
        }
    }

    fn len(&self) -> usize {
        self.n * (self.per_mode() + 1) + 1
    }

    fn pack(&self, bath: &LorentzianBath) -> DVector<f64> {
        let mut p = DVector::zeros(self.len());
        let pm = self.per_mode();
        for (i, m) in bath.modes.iter().enumerate() {
            if self.n_s == 1 {
                p[i] = m.couplings[0].norm_sqr().max(1e-300).ln();
            } else {
                // rotate the mode phase so that v_0i is real and nonnegative
                let ph = if m.couplings[0].norm() > 0.0 { m.couplings[0].conj() / m.couplings[0].norm() } else { C64::new(1.0, 0.0) };
                p[i * pm] = m.couplings[0].norm();
                for s in 1..self.n_s {
                    let v = m.couplings[s] * ph;
                    p[i * pm + 2 * s - 1] = v.re;
                    p[i * pm + 2 * s] = v.im;
                }
            }
            p[self.n * pm + i] = m.center;
        }
        let scale = bath.modes[0].width / self.ratios[0];
        p[self.len() - 1] = scale.ln();
        p
    }

    fn unpack(&self, p: &DVector<f64>) -> LorentzianBath {
        let pm = self.per_mode();
        let kappa = p[self.len() - 1].exp();
        let modes = (0..self.n)
            .map(|i| {
                let couplings = if self.n_s == 1 {
                    vec![C64::new((0.5 * p[i]).exp(), 0.0)]
                } else {
                    let mut c = vec![C64::new(p[i * pm], 0.0)];
                    for s in 1..self.n_s {
                        c.push(C64::new(p[i * pm + 2 * s - 1], p[i * pm + 2 * s]));
                    }
                    c
                };
                BathMode { couplings, center: p[self.n * pm + i], width: self.ratios[i] * kappa }
            })
            .collect();
        let system_rates = match &self.system_ratios {
            Some(r) => r.iter().map(|x| x * kappa).collect(),
            None => vec![0.0; self.n_s],
        };
        LorentzianBath { n_s: self.n_s, modes, system_rates, ratios: self.system_ratios.clone() }
    }
}

/// Residuals √w_k (S_model − S_target), real and imaginary parts for off-diagonal channels.
fn residuals(bath: &LorentzianBath, s: &Sampled) -> DVector<f64> {
    let mut out = Vec::new();
    for (ch, &(i, j)) in s.channels.iter().enumerate() {
        for (k, (&w, &q)) in s.omegas.iter().zip(&s.weights).enumerate() {
            let d = bath.spectral(w, i, j) - s.values[ch][k];
            out.push(q.sqrt() * d.re);
            if i != j {
                out.push(q.sqrt() * d.im);
            }
        }
    }
    DVector::from_vec(out)
}

fn jacobian(layout: &Layout, p: &DVector<f64>, s: &Sampled) -> DMatrix<f64> {
    let np = layout.len();
    if layout.n_s == 1 {
        let bath = layout.unpack(p);
        let m = s.omegas.len();
        let mut jac = DMatrix::zeros(m, np);
        let n = layout.n;
        let bg_rate = layout.system_ratios.as_ref().map(|r| r[0]).unwrap_or(0.0);
        let kappa = p[np - 1].exp();
        for (k, (&w, &q)) in s.omegas.iter().zip(&s.weights).enumerate() {
            let sq = q.sqrt();
            let mut d_scale = 4.0 * bg_rate * kappa;
            for (i, mode) in bath.modes.iter().enumerate() {
                let a = mode.couplings[0].norm_sqr();
                let kk = mode.width;
                let d = w - mode.center;
                let den = 0.25 * kk * kk + d * d;
                jac[(k, i)] = sq * a * kk / den;
                jac[(k, n + i)] = sq * a * kk * 2.0 * d / (den * den);
                d_scale += kk * a * (den - 0.5 * kk * kk) / (den * den);
            }
            jac[(k, np - 1)] = sq * d_scale;
        }
        jac
    } else {
        let r0 = residuals(&layout.unpack(p), s);
        let mut jac = DMatrix::zeros(r0.len(), np);
        for c in 0..np {
            let h = 1e-7 * p[c].abs().max(1.0);
            let mut pp = p.clone();
            pp[c] += h;
            let rp = residuals(&layout.unpack(&pp), s);
            pp[c] -= 2.0 * h;
            let rm = residuals(&layout.unpack(&pp), s);
            jac.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        jac
    }
}

fn sort_modes(bath: &mut LorentzianBath) {
    bath.modes.sort_by(|a, b| a.center.total_cmp(&b.center));
}

/// Levenberg–Marquardt fit of the coarse-grained spectral function.
pub fn fit(target: &MultiChannelTarget, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let n_s = target.n_s;
    let samples = sample(target, config.window, config.grid_points)?;
    let mut warmup_iterations = 0;
    let start = match &config.initial_guess {
        // the even-spacing widths put a flat system background far above the
        // target, so the modes are fitted first and the background added after
        InitialGuess::EvenSpacing if config.system_ratio.is_some() => {
            let bare = fit(target, &FitConfig { system_ratio: None, ..config.clone() })?;
            warmup_iterations = bare.iterations;
            bare.bath
        }
        InitialGuess::EvenSpacing => initial_guess(target, config)?,
        InitialGuess::UserProvided(b) => {
            b.validate()?;
            if b.modes.len() != config.n || b.n_s != n_s {
                return invalid("initial bath does not match the fit configuration");
            }
            b.clone()
        }
    };
    let layout = Layout { n: config.n, n_s, ratios: config.width_ratios(), system_ratios: config.system_ratios(n_s) };
    if let Some(r) = &layout.system_ratios {
        if r.len() != n_s {
            return invalid("one system ratio per system spin required");
        }
    }
    let mut p = layout.pack(&start);
    let mut r = residuals(&layout.unpack(&p), &samples);
    let mut c = r.norm_squared();
    let scale: f64 = samples
        .values
        .iter()
        .zip(&samples.channels)
        .map(|(v, _)| v.iter().zip(&samples.weights).map(|(x, q)| q * x.norm_sqr()).sum::<f64>())
        .sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(&layout, &p, &samples);
    while iterations < config.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-15 * scale.sqrt().max(1e-300) * (1.0 + p.amax()) || c <= 1e-30 * scale {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12 * (1.0 + jtj.diagonal().amax()));
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let trial = &p + &step;
            if trial.iter().any(|x| !x.is_finite()) {
                lambda *= 4.0;
                continue;
            }
            let rt = residuals(&layout.unpack(&trial), &samples);
            let ct = rt.norm_squared();
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < config.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
        jac = jacobian(&layout, &p, &samples);
    }
    let mut bath = layout.unpack(&p);
    sort_modes(&mut bath);
    let cost = cost_on(&bath, &samples);
    let rms_residual = rms_on(&bath, &samples);
    Ok(FitResult { bath, cost, rms_residual, iterations: warmup_iterations + iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SetStructured, Temperature};
    use proptest::prelude::*;

    fn lorentz_target(modes: &[(f64, f64, f64)], background: f64) -> MultiChannelTarget {
        MultiChannelTarget::single(SpectralTarget::LorentzianSum {
            modes: modes.iter().map(|&(v, w, k)| LorentzianMode { weight: v * v, center: w, width: k }).collect(),
            background,
        })
    }

    fn ohmic_target() -> MultiChannelTarget {
        MultiChannelTarget::single(SpectralTarget::Ohmic {
            alpha: 1.0,
            temperature: Temperature::new(1.5).unwrap(),
            cutoff: 10.0,
        })
    }

    #[test]
    fn self_fit_cost_is_zero() {
        let params = [(0.5, 1.0, 0.3), (0.2, 2.5, 0.3)];
        let target = lorentz_target(&params, 0.0);
        let bath = LorentzianBath::single(&params);
        let c = cost(&bath, &target, (-2.0, 5.0), 2001).unwrap();
        assert!(c < 1e-20);
    }

    #[test]
    fn empty_bath_cost_is_target_norm() {
        let target = ohmic_target();
        let bath = LorentzianBath { n_s: 1, modes: vec![], system_rates: vec![0.0], ratios: None };
        let c = cost(&bath, &target, (-4.0, 12.0), 2001).unwrap();
        let (xs, ws) = trapezoid_grid(-4.0, 12.0, 2001);
        let direct: f64 = xs.iter().zip(&ws).map(|(x, w)| w * target.eval(*x, 0, 0).unwrap().re.powi(2)).sum();
        assert!((c - direct).abs() <= 1e-12 * direct);
        assert!(cost(&bath, &target, (1.0, 1.0), 2001).is_err());
    }

    #[test]
    fn cost_quadrature_converges() {
        let target = ohmic_target();
        let bath = LorentzianBath::single(&[(3.0, 2.0, 2.0), (2.0, 6.0, 2.0)]);
        let c1 = cost(&bath, &target, (-4.0, 12.0), 1001).unwrap();
        let c2 = cost(&bath, &target, (-4.0, 12.0), 2001).unwrap();
        assert!((c1 - c2).abs() / c2 < 0.01);
    }

    #[test]
    fn single_lorentzian_recovered() {
        let (v, w0, k0) = (0.7, 1.3, 0.45);
        let target = lorentz_target(&[(v, w0, k0)], 0.0);
        let mut cfg = FitConfig::new(1, (-3.0, 5.0));
        cfg.tolerance = 1e-15;
        let res = fit(&target, &cfg).unwrap();
        assert!(res.converged);
        let m = &res.bath.modes[0];
        assert!((m.couplings[0].re.abs() - v).abs() / v < 1e-6);
        assert!((m.center - w0).abs() / w0 < 1e-6);
        assert!((m.width - k0).abs() / k0 < 1e-6);
    }

    #[test]
    fn initial_guess_even_spacing() {
        let target = lorentz_target(&[(0.5, 0.0, 0.5)], 0.0);
        let cfg = FitConfig::new(1, (-2.0, 2.0));
        let g = initial_guess(&target, &cfg).unwrap();
        assert_eq!(g.modes[0].center, 0.0);
        assert_eq!(g.modes[0].width, 4.0);
        let cfg4 = FitConfig::new(4, (-4.0, 12.0));
        let t = ohmic_target();
        let g4 = initial_guess(&t, &cfg4).unwrap();
        assert!(g4.modes.iter().all(|m| m.width == 4.0));
        let total: f64 = g4.modes.iter().map(|m| 2.0 * std::f64::consts::PI * m.couplings[0].norm_sqr()).sum();
        let (xs, ws) = trapezoid_grid(-4.0, 12.0, 20001);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * t.eval(*x, 0, 0).unwrap().re).sum();
        assert!((total - integral).abs() / integral < 1e-3);
    }

    #[test]
    fn ohmic_eight_mode_fit() {
        let res = fit(&ohmic_target(), &FitConfig::new(8, (-4.0, 12.0))).unwrap();
        assert!(res.rms_residual <= 0.05, "rms {}", res.rms_residual);
        let k = res.bath.modes[0].width;
        assert!(res.bath.modes.iter().all(|m| m.width == k));
        assert!(res.bath.modes.windows(2).all(|w| w[0].center <= w[1].center));
        let recomputed = cost(&res.bath, &ohmic_target(), (-4.0, 12.0), 2001).unwrap();
        assert!((recomputed - res.cost).abs() <= 1e-10 * res.cost.max(1e-300));
    }

    #[test]
    fn set_fit_with_background_ratio() {
        let target = MultiChannelTarget::single(SpectralTarget::Set(SetStructured::standard(1.0)));
        let res = fit(&target, &FitConfig::new(2, (-1.0, 3.5)).with_ratio(0.5)).unwrap();
        let k = res.bath.homogeneous_width().unwrap();
        assert_eq!(res.bath.system_rate(), 0.5 * k);
        // both resonances stay coupled; a flat background alone costs 4.8e-2
        for (m, w0) in res.bath.modes.iter().zip([1.0, 2.0]) {
            assert!(m.couplings[0].norm() > 0.03 && (m.center - w0).abs() < 0.05, "{m:?}");
        }
        assert!(res.cost < 0.04, "{}", res.cost);
    }

    #[test]
    fn refit_is_idempotent() {
        let target = ohmic_target();
        let cfg = FitConfig::new(4, (-4.0, 12.0));
        let first = fit(&target, &cfg).unwrap();
        let mut again = cfg.clone();
        again.initial_guess = InitialGuess::UserProvided(first.bath.clone());
        let second = fit(&target, &again).unwrap();
        assert!((first.cost - second.cost).abs() <= 1e-8 * first.cost);
    }

    #[test]
    fn fixed_ratios_preserved() {
        let target = ohmic_target();
        let mut cfg = FitConfig::new(3, (-4.0, 12.0));
        cfg.width_constraint = WidthConstraint::FixedRatios(vec![1.0, 2.0, 0.5]);
        let res = fit(&target, &cfg).unwrap();
        // modes are reordered by ω; each width must be one of ρ_i κ
        let kappa = res.bath.modes.iter().map(|m| m.width).fold(f64::INFINITY, f64::min) / 0.5;
        for m in &res.bath.modes {
            let rho = m.width / kappa;
            assert!([1.0, 2.0, 0.5].iter().any(|r| (rho - r).abs() < 1e-14));
        }
    }

    #[test]
    fn multi_spin_fit_recovers_correlated_target() {
        // two system spins sharing one mode with a relative phase
        let v0 = C64::new(0.6, 0.0);
        let v1 = C64::from_polar(0.4, 0.8);
        let truth = LorentzianBath {
            n_s: 2,
            modes: vec![BathMode { couplings: vec![v0, v1], center: 1.0, width: 0.5 }],
            system_rates: vec![0.0, 0.0],
            ratios: None,
        };
        let mut entries = std::collections::BTreeMap::new();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let w = truth.modes[0].couplings[i] * truth.modes[0].couplings[j].conj();
            entries.insert(
                (i, j),
                if i == j {
                    crate::spectral::ChannelFunction::Real {
                        target: SpectralTarget::LorentzianSum {
                            modes: vec![LorentzianMode { weight: w.re, center: 1.0, width: 0.5 }],
                            background: 0.0,
                        },
                    }
                } else {
                    crate::spectral::ChannelFunction::ComplexLorentzian { modes: vec![(w, 1.0, 0.5)] }
                },
            );
        }
        let target = MultiChannelTarget::new(2, entries).unwrap();
        let mut cfg = FitConfig::new(1, (-2.0, 4.0));
        cfg.grid_points = 801;
        let res = fit(&target, &cfg).unwrap();
        let m = &res.bath.modes[0];
        assert!(m.couplings[0].im == 0.0);
        let cross = m.couplings[0] * m.couplings[1].conj();
        let expected = v0 * v1.conj();
        assert!((cross - expected).norm() < 1e-6, "{cross} vs {expected}");
        assert!((m.width - 0.5).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn cost_never_increases(n in 1usize..4, iters in 1usize..6) {
            let target = ohmic_target();
            let mut cfg = FitConfig::new(n, (-4.0, 12.0));
            cfg.grid_points = 401;
            let start = initial_guess(&target, &cfg).unwrap();
            let c0 = cost(&start, &target, cfg.window, cfg.grid_points).unwrap();
            let mut prev = c0;
            for k in 1..=iters {
                cfg.max_iterations = k;
                let r = fit(&target, &cfg).unwrap();
                prop_assert!(r.cost <= prev * (1.0 + 1e-12));
                prev = r.cost;
            }
        }

        #[test]
        fn scheme_two_consistency(r in 0.0f64..2.0) {
            let target = ohmic_target();
            let mut cfg = FitConfig::new(2, (-4.0, 12.0)).with_ratio(r);
            cfg.grid_points = 301;
            cfg.max_iterations = 30;
            let res = fit(&target, &cfg).unwrap();
            let k = res.bath.homogeneous_width().unwrap();
            prop_assert_eq!(res.bath.system_rate(), r * k);
        }
    }
}
