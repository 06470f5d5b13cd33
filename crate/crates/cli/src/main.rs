use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noisebath::analysis::Window;
use noisebath::spin_model::Decomposition;
use noisebath_cli::commands::{self, AnalyzeOptions};
use noisebath_cli::config::ExperimentConfig;
use noisebath_cli::error::{CliError, CliResult};
use noisebath_cli::pipeline::{self, write_json};
use noisebath_cli::presets;

#[derive(Parser)]
#[command(name = "noisebath", version, about = "Open spin-boson dynamics on noisy qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarse-grain a target spectral function
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        /// ohmic | set | lorentzian-sum
        #[arg(long, conflicts_with = "config")]
        target: Option<String>,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        homogeneous: bool,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config end to end
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, value_parser = parse_decomposition)]
        decomp: Option<Decomposition>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        fft: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectrum, peaks and steady value of a trajectory CSV
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "sx")]
        column: String,
        #[arg(long)]
        no_fft: bool,
        #[arg(long)]
        hann: bool,
        #[arg(long, default_value_t = pipeline::PEAK_PROMINENCE)]
        min_prominence: f64,
        #[arg(long)]
        steady: bool,
        #[arg(long, default_value_t = noisebath::analysis::DEFAULT_TAIL_FRACTION)]
        tail: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective Lindbladian of one Trotter step
    EffectiveNoise {
        #[arg(long, value_parser = parse_decomposition, default_value = "ms")]
        decomp: Decomposition,
        #[arg(long = "n-q", default_value_t = 2)]
        n_q: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.9)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spin coupled to one broad mode
    ExampleA {
        #[arg(long = "N", default_value_t = 8)]
        spins: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, value_parser = parse_decomposition, default_value = "ms")]
        decomp: Decomposition,
        #[arg(long, default_value_t = 0.9)]
        delta: f64,
        #[arg(long)]
        no_oracle: bool,
        /// also run the truncated boson oracle
        #[arg(long)]
        boson_nmax: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spin coupled to an ohmic bath
    ExampleB {
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-electron-transistor island charge
    ExampleC {
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long)]
        system_noise: bool,
        #[arg(long, requires = "system_noise")]
        r: Option<f64>,
        /// steady charge over Δ ∈ [−1, 3]
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 17)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_decomposition(s: &str) -> Result<Decomposition, String> {
    Decomposition::parse(s).map_err(|e| e.to_string())
}

fn out_dir(out: Option<PathBuf>, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    out.or_else(|| cfg.and_then(|c| c.output_dir.clone())).unwrap_or_else(|| Path::new("out").join(fallback))
}

fn run_and_write(cfg: &ExperimentConfig, out: Option<PathBuf>) -> CliResult<()> {
    let dir = out_dir(out, Some(cfg), &cfg.name);
    let res = pipeline::run_experiment(cfg)?;
    res.write(&dir)?;
    let m = &res.manifest;
    println!("{}: D = {}, τ = {:.6}, vτ = {:.6}, Δτ = {:.6}, {} steps → {}", cfg.name, m.depth, m.tau, m.v_tau, m.delta_tau, m.steps, dir.display());
    if let (Some(sim), Some(oracle)) = (&res.simulator, &res.spin_oracle) {
        for name in &cfg.observables {
            if let Some(dev) = pipeline::max_deviation(sim, oracle, name) {
                println!("max |simulator − oracle| for {name}: {dev:.4e}");
            }
        }
    }
    if let Some(s) = &m.steady {
        for (i, name) in s.names.iter().enumerate() {
            println!("steady {name}: simulator {:.6}, oracle {:.6}", s.simulator[i], s.oracle[i]);
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { config, target, n, homogeneous, alpha, r, out } => {
            let cfg = match (config, target) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(t)) => commands::fit_preset(&t, n, homogeneous, alpha, r)?,
                (None, None) => return Err(CliError::Config("give --config or --target".into())),
            };
            let dir = out_dir(out, Some(&cfg), "fit");
            let rep = commands::cmd_fit(&cfg, &dir)?;
            println!("cost {:.6e}, rms residual {:.6e}, {} modes → {}", rep.result.cost, rep.result.rms_residual, rep.result.bath.modes.len(), dir.display());
        }
        Command::Simulate { config, eps, steps, t_end, decomp, oracle, fft, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(e) = eps {
                cfg.gate_error = e;
            }
            if steps.is_some() || t_end.is_some() {
                cfg.steps = steps;
                cfg.t_end = t_end;
            }
            if let Some(d) = decomp {
                cfg.decomposition = d;
            }
            cfg.oracle |= oracle;
            cfg.fft |= fft;
            cfg.validate()?;
            run_and_write(&cfg, out)?;
        }
        Command::Analyze { input, column, no_fft, hann, min_prominence, steady, tail, out } => {
            let opts = AnalyzeOptions {
                column,
                fft: !no_fft,
                window: if hann { Window::Hann } else { Window::None },
                min_prominence,
                steady,
                tail_fraction: tail,
            };
            let dir = out_dir(out, None, "analysis");
            let rep = commands::cmd_analyze(&input, &opts, &dir)?;
            if let Some(peaks) = &rep.peaks {
                for p in peaks.iter().take(5) {
                    println!("peak ω = {:.6}, power {:.6e}", p.omega, p.power);
                }
            }
            if let Some(v) = rep.steady_value {
                println!("steady {}: {v:.6}", rep.column);
            }
        }
        Command::EffectiveNoise { decomp, n_q, eps, delta, out } => {
            let dir = out_dir(out, None, "effective-noise");
            let rep = commands::cmd_effective_noise(decomp, n_q, eps, delta, &dir)?;
            print!("{}", commands::render_effective_noise(&rep));
        }
        Command::ExampleA { spins, eps, decomp, delta, no_oracle, boson_nmax, out } => {
            let mut cfg = presets::example_a(spins, eps, decomp, delta);
            cfg.oracle = !no_oracle;
            cfg.boson_oracle = boson_nmax;
            run_and_write(&cfg, out)?;
        }
        Command::ExampleB { alpha, eps, no_oracle, out } => {
            let mut cfg = presets::example_b(alpha, eps);
            cfg.oracle = !no_oracle;
            run_and_write(&cfg, out)?;
        }
        Command::ExampleC { alpha, delta, system_noise, r, sweep, points, out } => {
            let noise = system_noise.then(|| r.unwrap_or(0.5));
            if sweep {
                let dir = out_dir(out, None, "example-c-sweep");
                std::fs::create_dir_all(&dir)?;
                let deltas = presets::delta_grid(-1.0, 3.0, points);
                let pts = presets::sweep_c(alpha, &deltas, noise, presets::thread_cap())?;
                commands::write_sweep(&dir.join("sweep.csv"), &pts)?;
                write_json(&dir.join("sweep.json"), &pts)?;
                for p in &pts {
                    println!("Δ = {:+.3}: simulator {:.5}, oracle {:.5}, Fermi {:.5}", p.delta, p.simulator, p.oracle, p.fermi);
                }
            } else {
                run_and_write(&presets::example_c(alpha, delta, noise), out)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = presets::thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
