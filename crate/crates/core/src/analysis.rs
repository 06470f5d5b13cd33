//! Post-processing: periodograms and peaks, steady-state extraction, the
//! error-budget tradeoff and the collective-spin Gaussianity check.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;
use crate::observable::format_float;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// ascending, zero frequency in the middle
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub resolution: f64,
}

/// |DFT|² of the mean-subtracted series on ω_k = 2πk/(mτ).
pub fn power_spectrum(values: &[f64], dt: f64, window: Window) -> Result<Spectrum> {
    let m = values.len();
    if m < 8 {
        return invalid("power spectrum needs at least 8 samples");
    }
    if !(dt > 0.0) {
        return invalid("sample spacing must be positive");
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let mut buf: Vec<C64> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = match window {
                Window::None => 1.0,
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * k as f64 / (m - 1) as f64).cos(),
            };
            C64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let resolution = 2.0 * PI / (m as f64 * dt);
    let half = m / 2;
    let mut omega = Vec::with_capacity(m);
    let mut power = Vec::with_capacity(m);
    for i in 0..m {
        let k = (i + m - half) % m;
        let signed = if k >= m - half { k as isize - m as isize } else { k as isize };
        omega.push(signed as f64 * resolution);
        power.push(buf[k].norm_sqr());
    }
    Ok(Spectrum { omega, power, resolution })
}

impl Spectrum {
    /// CSV with header `omega,power`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["omega", "power"])?;
        for (o, p) in self.omega.iter().zip(&self.power) {
            wr.write_record([format_float(*o), format_float(*p)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Index of the bin nearest to ω.
    pub fn bin_of(&self, omega: f64) -> usize {
        let i0 = self.omega.iter().position(|w| *w == 0.0).unwrap_or(0) as f64;
        ((i0 + (omega / self.resolution).round()).max(0.0) as usize).min(self.omega.len() - 1)
    }
}

/// Uniform-grid check for trajectory times.
pub fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return invalid("need at least two samples");
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return invalid("time grid is not uniform");
    }
    Ok(dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub power: f64,
    pub prominence: f64,
}

/// Local maxima at ω ≥ 0 whose topographic prominence reaches
/// `min_prominence`, strongest first.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let start = spectrum.omega.iter().position(|w| *w >= 0.0).unwrap_or(spectrum.omega.len());
    let p = &spectrum.power[start..];
    let w = &spectrum.omega[start..];
    let n = p.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || p[i] > p[i - 1];
        let right_ok = i + 1 == n || p[i] > p[i + 1];
        // plateaus and the endpoints are not peaks
        if !(left_ok && right_ok) || i == 0 || i + 1 == n {
            continue;
        }
        let mut lmin = p[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if p[j] > p[i] {
                break;
            }
            lmin = lmin.min(p[j]);
        }
        let mut rmin = p[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if p[j] > p[i] {
                break;
            }
            rmin = rmin.min(p[j]);
        }
        let prominence = p[i] - lmin.max(rmin);
        if prominence >= min_prominence && prominence > 0.0 {
            peaks.push(Peak { omega: w[i], power: p[i], prominence });
        }
    }
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    peaks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub n: usize,
    pub spins_per_mode: usize,
    pub gate_error: f64,
    pub depth_per_qubit: f64,
    pub cutoff: f64,
    /// κ ≈ ω_c/n
    pub kappa: f64,
    /// D ≈ nND₀
    pub depth: f64,
    pub tau: f64,
    pub tau_omega_c: f64,
    pub gaussianity: f64,
}

impl ErrorBudget {
    /// v τ and Δτ for given coupling and splitting.
    pub fn trotter_indicators(&self, v: f64, delta: f64) -> (f64, f64) {
        (v * self.tau, delta * self.tau)
    }
}

/// τ = n²NεD₀/ω_c from evenly spaced modes of width ω_c/n each realized
/// by N qubits at depth D₀ per qubit.
pub fn error_budget(n: usize, spins_per_mode: usize, gate_error: f64, depth_per_qubit: f64, cutoff: f64) -> Result<ErrorBudget> {
    if n == 0 || spins_per_mode == 0 || !(gate_error > 0.0) || !(depth_per_qubit > 0.0) || !(cutoff > 0.0) {
        return invalid("error-budget parameters must be positive");
    }
    let nf = n as f64;
    let nn = spins_per_mode as f64;
    let kappa = cutoff / nf;
    let depth = nf * nn * depth_per_qubit;
    let tau = depth * gate_error / kappa;
    Ok(ErrorBudget {
        n,
        spins_per_mode,
        gate_error,
        depth_per_qubit,
        cutoff,
        kappa,
        depth,
        tau,
        tau_omega_c: tau * cutoff,
        gaussianity: 1.0 / nn,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianityCheck {
    pub collective: f64,
    pub bosonic: f64,
    pub error: f64,
}

/// ⟨Σσ₊ Σσ₋⟩/N in the N-spin Dicke state with s excitations, built
/// explicitly, against the bosonic value s.
pub fn gaussianity_check(n: usize, s: usize) -> Result<GaussianityCheck> {
    if s > n {
        return invalid("excitation number exceeds the spin count");
    }
    if n == 0 || n > 16 {
        return Err(Error::DimensionOverflow { dim: 1usize << n.min(63), limit: 1 << 16 });
    }
    let d = 1usize << n;
    let members: Vec<usize> = (0..d).filter(|k| k.count_ones() as usize == s).collect();
    let amp = 1.0 / (members.len() as f64).sqrt();
    let mut psi = vec![0.0; d];
    for &k in &members {
        psi[k] = amp;
    }
    // J₋|ψ⟩ with σ₋ = |0⟩⟨1| lowering one excited bit
    let mut low = vec![0.0; d];
    for &k in &members {
        for q in 0..n {
            if k >> q & 1 == 1 {
                low[k & !(1 << q)] += psi[k];
            }
        }
    }
    let collective = low.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let bosonic = s as f64;
    Ok(GaussianityCheck { collective, bosonic, error: collective - bosonic })
}

/// The exact Dicke value s(N − s + 1)/N as a reduced fraction.
pub fn dicke_value_rational(n: u64, s: u64) -> (u64, u64) {
    let num = s * (n - s + 1);
    let g = gcd(num, n);
    (num / g, n / g)
}

/// The printed expression s + s(s−1)/N as a reduced fraction.
pub fn printed_gaussianity_rational(n: u64, s: u64) -> (u64, u64) {
    let num = s * n + s * s.saturating_sub(1);
    let g = gcd(num, n);
    (num / g, n / g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Mean over the final `tail_fraction` of the samples; fails when the two
/// halves of that window differ by more than 1% of the trajectory range.
pub fn steady_window_average(values: &[f64], tail_fraction: f64) -> Result<f64> {
    if values.is_empty() || !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return invalid("need samples and a tail fraction in (0, 1]");
    }
    let k = ((values.len() as f64 * tail_fraction).ceil() as usize).clamp(1, values.len());
    let tail = &values[values.len() - k..];
    let mean = tail.iter().sum::<f64>() / k as f64;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let range = hi - lo;
    if k >= 2 && range > 0.0 {
        let h = k / 2;
        let m1 = tail[..h].iter().sum::<f64>() / h as f64;
        let m2 = tail[h..].iter().sum::<f64>() / (k - h) as f64;
        let drift = (m1 - m2).abs();
        if drift > 0.01 * range {
            return Err(Error::NonConvergence(format!("tail drift {drift:.3e} exceeds 1% of the range {range:.3e}")));
        }
    }
    Ok(mean)
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Time at which the envelope of |x|, traced through its local maxima,
/// first drops below `level`.
pub fn first_envelope_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut prev_peak: Option<(f64, f64)> = Some((times[0], a[0]));
    for i in 1..a.len() {
        let is_peak = i + 1 == a.len() || (a[i] >= a[i - 1] && a[i] >= a[i + 1]);
        if !is_peak {
            continue;
        }
        if a[i] < level {
            let (t0, a0) = prev_peak?;
            // linear interpolation of the envelope between consecutive maxima
            let f = (a0 - level) / (a0 - a[i]);
            return Some(t0 + f * (times[i] - t0));
        }
        prev_peak = Some((times[i], a[i]));
    }
    None
}

/// True when the series changes sign after time `after`.
pub fn changes_sign_after(times: &[f64], values: &[f64], after: f64) -> bool {
    let tail: Vec<f64> = times.iter().zip(values).filter(|(t, _)| **t >= after).map(|(_, v)| *v).collect();
    tail.windows(2).any(|w| w[0] * w[1] < 0.0)
}
