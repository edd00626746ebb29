//! `nfdps` command-line front end.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use nfdps::harness::{
    draw_trial, estimate, monte_carlo_sweep, nmse, observe_trial, to_db, write_csv, Algorithm,
    ExplicitPath, SimConfig,
};
use nfdps::model::{read_complex_matrix, write_complex_matrix};
use nfdps::{
    bounds_report, AnalogCombiner, Complex64, PathParams, ReceivedSignal, WidebandChannel,
};

#[derive(Parser)]
#[command(
    name = "nfdps",
    version,
    about = "Near-field wideband channel estimation experiments"
)]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one scenario and dump config, channel, combiner and signal.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Directory receiving scenario.toml, meta.toml and the .bin matrices.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run one algorithm on a dumped or freshly drawn scenario.
    Estimate {
        #[command(flatten)]
        sim: SimArgs,
        /// Directory written by `simulate`; draws a fresh scenario if absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Writes the LPU/CPU message trace (distributed algorithm only).
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// CRLB and distributed lower-bound table as CSV.
    Bounds(BoundsArgs),
    /// Monte Carlo sweep to CSV.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
    },
}

/// Flags overriding fields of the configuration file.
#[derive(Args, Default)]
struct SimArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    subarrays: Option<usize>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    spacing_m: Option<f64>,
    #[arg(long)]
    subcarriers: Option<usize>,
    #[arg(long, conflicts_with = "subcarrier_spacing_hz")]
    bandwidth_hz: Option<f64>,
    #[arg(long)]
    subcarrier_spacing_hz: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Comma-separated SNR points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    power_w: Option<f64>,
    #[arg(long)]
    pfa: Option<f64>,
    /// Comma-separated: dps, dps_distributed, ls, omp.
    #[arg(long, value_delimiter = ',')]
    algorithm: Option<Vec<String>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    timing: bool,
    /// Disables the OMP fallback after a degenerate DPS iteration.
    #[arg(long)]
    no_fallback: bool,
    /// Allows path draws that violate the resolution predicate.
    #[arg(long)]
    unresolvable: bool,
}

impl SimArgs {
    fn load(&self) -> anyhow::Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::from_file(p)?,
            None => SimConfig::default(),
        };
        let g = &mut cfg.geometry;
        set(&mut g.num_antennas, self.antennas);
        set(&mut g.num_subarrays, self.subarrays);
        set(&mut g.carrier_hz, self.carrier_hz);
        if self.spacing_m.is_some() {
            g.spacing_m = self.spacing_m;
        }
        set(&mut cfg.grid.num_subcarriers, self.subcarriers);
        if self.bandwidth_hz.is_some() {
            cfg.grid.bandwidth_hz = self.bandwidth_hz;
            cfg.grid.spacing_hz = None;
        }
        if self.subcarrier_spacing_hz.is_some() {
            cfg.grid.spacing_hz = self.subcarrier_spacing_hz;
            cfg.grid.bandwidth_hz = None;
        }
        if let Some(n) = self.paths {
            cfg.paths.count = n;
            cfg.paths.explicit.clear();
        }
        cfg.paths.resolvable &= !self.unresolvable;
        let r = &mut cfg.run;
        set(&mut r.snr_db, self.snr_db.clone());
        set(&mut r.trials, self.trials);
        set(&mut r.seed, self.seed);
        set(&mut r.power_w, self.power_w);
        set(&mut r.false_alarm_rate, self.pfa);
        if let Some(names) = &self.algorithm {
            r.algorithms = names
                .iter()
                .map(|s| Algorithm::parse(s))
                .collect::<Result<_, _>>()?;
        }
        if self.output.is_some() {
            r.output = self.output.clone();
        }
        r.trace |= self.trace;
        r.timing |= self.timing;
        r.fallback &= !self.no_fallback;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0.2"
    )]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    distance_m: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    range_m: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise_variance: f64,
}

/// Scalars of a dumped scenario not captured by the config.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    trial: usize,
    snr_db: f64,
    power_w: f64,
    noise_variance: f64,
}

const BOUNDS_HEADER: &str = "theta,d_m,r_m,K,N,M,df_hz,P,sigma2,crlb_theta_num,crlb_d_num,crlb_r_num,crlb_theta_cf,crlb_d_cf,crlb_r_cf,tau_cb,lb_theta,lb_d,lb_r";

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_matrix(dir: &Path, name: &str, m: &ArrayView2<'_, Complex64>) -> anyhow::Result<()> {
    let p = dir.join(name);
    let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
    write_complex_matrix(BufWriter::new(f), m)?;
    Ok(())
}

fn read_matrix(
    dir: &Path,
    name: &str,
    rows: usize,
    cols: usize,
) -> anyhow::Result<Array2<Complex64>> {
    let p = dir.join(name);
    let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
    Ok(read_complex_matrix(BufReader::new(f), rows, cols)?)
}

fn simulate(sim: &SimArgs, out_dir: &Path, trial: usize) -> anyhow::Result<()> {
    let mut cfg = sim.load()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let t = draw_trial(&cfg, &geom, &grid, trial)?;
    let signal = observe_trial(&cfg, &grid, &t, 0)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_matrix(out_dir, "channel.bin", &t.channel.entries.view())?;
    write_matrix(out_dir, "combiner.bin", &t.combiner.weights().view())?;
    write_matrix(out_dir, "signal.bin", &signal.rows.view())?;
    let meta = Meta {
        trial,
        snr_db: cfg.run.snr_db[0],
        power_w: signal.power,
        noise_variance: signal.noise_variance,
    };
    fs::write(out_dir.join("meta.toml"), toml::to_string(&meta)?)?;
    cfg.paths.explicit = t.paths.iter().map(ExplicitPath::from_params).collect();
    cfg.paths.count = t.paths.len();
    fs::write(out_dir.join("scenario.toml"), cfg.to_toml_string()?)?;
    log::info!(
        "wrote scenario with {} paths to {}",
        t.paths.len(),
        out_dir.display()
    );
    Ok(())
}

fn run_estimate(
    sim: &SimArgs,
    scenario: Option<&Path>,
    trial: usize,
    trace_out: Option<&Path>,
) -> anyhow::Result<()> {
    let (cfg, truth, channel, comb, signal) = match scenario {
        Some(dir) => {
            let mut cfg = SimConfig::from_file(&dir.join("scenario.toml"))?;
            // Flags still select the algorithm and run options.
            if let Some(names) = &sim.algorithm {
                cfg.run.algorithms = names
                    .iter()
                    .map(|s| Algorithm::parse(s))
                    .collect::<Result<_, _>>()?;
            }
            set(&mut cfg.run.false_alarm_rate, sim.pfa);
            cfg.run.trace |= sim.trace;
            cfg.run.fallback &= !sim.no_fallback;
            let meta: Meta = toml::from_str(&fs::read_to_string(dir.join("meta.toml"))?)
                .context("parsing meta.toml")?;
            let geom = cfg.geometry()?;
            let grid = cfg.grid()?;
            let (n, k, m) = (
                geom.num_antennas(),
                geom.num_subarrays(),
                grid.num_subcarriers(),
            );
            let channel =
                WidebandChannel::from_entries(read_matrix(dir, "channel.bin", n, m)?, geom, grid)?;
            let comb = AnalogCombiner::from_weights(read_matrix(
                dir,
                "combiner.bin",
                k,
                geom.antennas_per_subarray(),
            )?)?;
            let signal = ReceivedSignal {
                rows: read_matrix(dir, "signal.bin", k, m)?,
                power: meta.power_w,
                noise_variance: meta.noise_variance,
            };
            let truth: Vec<PathParams> = cfg
                .paths
                .explicit
                .iter()
                .map(ExplicitPath::params)
                .collect();
            (cfg, truth, channel, comb, signal)
        }
        None => {
            let cfg = sim.load()?;
            let geom = cfg.geometry()?;
            let grid = cfg.grid()?;
            let t = draw_trial(&cfg, &geom, &grid, trial)?;
            let signal = observe_trial(&cfg, &grid, &t, 0)?;
            (cfg, t.paths, t.channel, t.combiner, signal)
        }
    };
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let mut out = io::stdout().lock();
    writeln!(out, "truth L={}", truth.len())?;
    for p in &truth {
        writeln!(
            out,
            "  theta={:.6} d_m={:.4} r_m={:.4} |g|={:.4e}",
            p.angle_sine,
            p.distance_m,
            p.range_m,
            p.gain.norm()
        )?;
    }
    for &alg in &cfg.run.algorithms {
        let est = estimate(&cfg, &geom, &grid, &signal, &comb, alg)?;
        let e = to_db(nmse(&channel, &est.channel)?);
        writeln!(
            out,
            "{} L_hat={} nmse_db={e:.3} fallback={} corr_count={}",
            alg.name(),
            est.paths.len(),
            est.fallback,
            est.corr_count
        )?;
        for p in &est.paths {
            writeln!(
                out,
                "  theta={:.6} d_m={:.4} r_m={:.4} |g|={:.4e}",
                p.angle_sine,
                p.distance_m,
                p.range_m,
                p.gain.norm()
            )?;
        }
        if let (Some(path), Some(trace)) = (trace_out, &est.trace) {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            trace.write_to(BufWriter::new(f))?;
        }
    }
    Ok(())
}

fn bounds(args: &BoundsArgs) -> anyhow::Result<()> {
    let cfg = args.sim.load()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let p = cfg.run.power_w;
    let s2 = args.noise_variance;
    let mut out = output(cfg.run.output.as_deref())?;
    writeln!(out, "{BOUNDS_HEADER}")?;
    for &theta in &args.theta {
        for &d in &args.distance_m {
            for &r in &args.range_m {
                let path = PathParams::new(Complex64::new(1.0, 0.0), theta, d, r);
                let b = bounds_report(&path, &geom, &grid, p, s2)?;
                let fields = [
                    theta,
                    d,
                    r,
                    geom.num_subarrays() as f64,
                    geom.num_antennas() as f64,
                    grid.num_subcarriers() as f64,
                    grid.spacing_hz(),
                    p,
                    s2,
                    b.crlb_numeric[0],
                    b.crlb_numeric[1],
                    b.crlb_numeric[2],
                    b.crlb_closed_form[0],
                    b.crlb_closed_form[1],
                    b.crlb_closed_form[2],
                    b.lower.tau_cb,
                    b.lower.theta,
                    b.lower.distance,
                    b.lower.range,
                ];
                let line: Vec<String> = fields
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if (3..6).contains(&i) {
                            format!("{v}")
                        } else {
                            format!("{v:.16e}")
                        }
                    })
                    .collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(sim: &SimArgs) -> anyhow::Result<()> {
    let cfg = sim.load()?;
    if cfg.run.algorithms.is_empty() {
        bail!("config: no algorithms selected");
    }
    let records = monte_carlo_sweep(&cfg)?;
    let out = output(cfg.run.output.as_deref())?;
    write_csv(&records, out)?;
    Ok(())
}

fn category(e: &anyhow::Error) -> &'static str {
    use nfdps::Error as E;
    if let Some(ce) = e.downcast_ref::<E>() {
        return match ce {
            E::Config(_) | E::InvalidArgument(_) | E::IndexOutOfRange { .. } => "config",
            E::Io(_) => "io",
            E::Geometry(_) | E::Path(_) | E::Shape { .. } => "model",
            E::SingularFim => "bounds",
            E::DistanceUnidentifiable
            | E::OrthogonalCombiner(_)
            | E::ZeroChannel
            | E::EmptyDictionary => "estimation",
        };
    }
    if e.chain().any(|c| c.is::<io::Error>()) {
        return "io";
    }
    if e.chain()
        .any(|c| c.is::<toml::de::Error>() || c.is::<toml::ser::Error>())
    {
        return "config";
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let res = match &cli.command {
        Command::Simulate {
            sim,
            out_dir,
            trial,
        } => simulate(sim, out_dir, *trial),
        Command::Estimate {
            sim,
            scenario,
            trial,
            trace_out,
        } => run_estimate(sim, scenario.as_deref(), *trial, trace_out.as_deref()),
        Command::Bounds(args) => bounds(args),
        Command::Sweep { sim } => sweep(sim),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", category(&e));
            ExitCode::FAILURE
        }
    }
}
