//! Command-line front end: reference simulation, network training in both
//! directions, signal analysis and the gradient check.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use speechpinn::analysis::{cycle_formants, lpc_formants, relative_error, spectrum};
use speechpinn::geometry::AreaFunction;
use speechpinn::glottis::Mode;
use speechpinn::io::{Table, Waveform};
use speechpinn::params::{load_config, Config};
use speechpinn::pinn::gradcheck::{self, GradcheckOptions};
use speechpinn::pinn::{
    checkpoint, initial_model, train, EpochRecord, LossWeights, PeriodicSeries, Physics, PinnCycle,
    Training, Unknown,
};
use speechpinn::reference::{self, ReferenceRun};
use speechpinn::Error;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SPEECHPINN_THREADS";

#[derive(Parser)]
#[command(name = "speechpinn", version, about = "Vocal-fold and vocal-tract simulation and PINN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set physics.p_s=600`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Time-stepping simulation; writes series, cycle, grid and lip-pressure files.
    Reference {
        #[command(flatten)]
        common: Common,
    },
    /// Trains the networks and the period.
    PinnForward {
        #[command(flatten)]
        common: Common,
        /// Skip the reference run; the period starts at `run.t_init` and no comparison is made.
        #[arg(long)]
        no_reference: bool,
        /// Print a progress line every this many epochs (0 = silent).
        #[arg(long, default_value_t = 100)]
        progress: usize,
    },
    /// Estimates subglottal pressure from one period of lip pressure.
    PinnInverse {
        #[command(flatten)]
        common: Common,
        /// Waveform file: `period_s=` and `rate_hz=` headers, then one sample per line.
        #[arg(long)]
        waveform: Option<PathBuf>,
        /// Also run the reference solver and correlate the estimated glottal flow with it.
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value_t = 100)]
        progress: usize,
    },
    /// Spectrum and LPC formants of a waveform file or a CSV column.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Waveform file or CSV with a `t_s` (or `time`) column.
        #[arg(long)]
        input: PathBuf,
        /// CSV column to analyse; defaults to the last column.
        #[arg(long)]
        column: Option<String>,
    },
    /// Compares the loss gradient with central differences on a tiny model.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads().and_then(|_| run(cli.command)) {
        let msg = f.message.replace(['\n', '\r'], " ");
        eprintln!("error: {}: {}", f.kind, msg);
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn configure_threads() -> Outcome<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new("invalid_param", format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new("threads", e.to_string()))
}

fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Reference { common } => cmd_reference(&common),
        Command::PinnForward {
            common,
            no_reference,
            progress,
        } => cmd_forward(&common, !no_reference, progress),
        Command::PinnInverse {
            common,
            waveform,
            compare,
            progress,
        } => cmd_inverse(&common, waveform.as_deref(), compare, progress),
        Command::Analyze {
            common,
            input,
            column,
        } => cmd_analyze(&common, &input, column.as_deref()),
        Command::Gradcheck { common, seed } => cmd_gradcheck(&common, seed),
    }
}

fn setup(common: &Common) -> Outcome<Config> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    for o in &common.overrides {
        cfg.set(o)?;
    }
    fs::create_dir_all(&common.out)
        .map_err(|e| Failure::new("io", format!("cannot create {}: {e}", common.out.display())))?;
    Ok(cfg)
}

fn area_function(cfg: &Config) -> Outcome<AreaFunction> {
    let path = cfg.area_table_path().ok_or_else(|| {
        Failure::new("invalid_param", "`run.area_table` must name an area table file")
    })?;
    Ok(AreaFunction::from_table_file(path, cfg.physics.l)?)
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::new("io", format!("cannot write {}: {e}", path.display())))
}

fn reference_run(cfg: &Config, af: &AreaFunction) -> Outcome<ReferenceRun> {
    Ok(reference::run(&cfg.physics, af, &cfg.reference, Mode::Exact)?)
}

fn lip_waveform(r: &ReferenceRun) -> Waveform {
    let c = &r.cycle;
    Waveform {
        period: c.period,
        rate: c.rate(),
        samples: c.p_l[..c.p_l.len() - 1].to_vec(),
    }
}

fn formant_lines(cycle: &[f64], period: f64, cfg: &Config) -> String {
    match cycle_formants(cycle, period, cfg.reference.analysis_rate, cfg.reference.lpc_order) {
        Ok(f) => {
            let mut s = String::new();
            for (i, v) in f.iter().take(4).enumerate() {
                s += &format!("f{}_hz={v:e}\n", i + 1);
            }
            s
        }
        Err(e) => format!("formants=unavailable ({e})\n"),
    }
}

fn cmd_reference(common: &Common) -> Outcome<()> {
    let cfg = setup(common)?;
    let af = area_function(&cfg)?;
    let start = Instant::now();
    let record = reference::simulate_with(&cfg.physics, &af, &cfg.reference, Mode::Exact)?;
    let out = &common.out;
    record.series_table().write(out.join("reference_series.csv"))?;
    let from = record.index_at(cfg.reference.transient);
    let period = match reference::extract_period(&record.u_g[from..], record.sample_dt) {
        Ok(p) => p,
        Err(Error::NoOscillation(why)) => {
            write_text(&out.join("reference_report.txt"), &format!("no oscillation detected: {why}\n"))?;
            return Err(Failure::new("no_oscillation", format!("no oscillation detected: {why}")));
        }
        Err(e) => return Err(e.into()),
    };
    let cycle = reference::extract_steady_cycle(&record, period, cfg.reference.cycle_samples, cfg.reference.closure_tol)?;
    let steadiness = reference::cycle_to_cycle_deviation(&record.time[from..], &record.u_g[from..], period)?;
    let run = ReferenceRun {
        record,
        period,
        cycle,
        steadiness,
    };
    run.cycle.series_table().write(out.join("reference_cycle.csv"))?;
    if !run.cycle.p_grid.is_empty() {
        run.cycle.grid_table().write(out.join("reference_cycle_grid.csv"))?;
    }
    lip_waveform(&run).write(out.join("lip_pressure.txt"))?;
    let mut report = run.report();
    report += &formant_lines(&run.cycle.p_l, run.period, &cfg);
    report += &format!("runtime_s={:.3}\n", start.elapsed().as_secs_f64());
    write_text(&out.join("reference_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn progress_printer(every: usize, unknown: Unknown) -> impl FnMut(&EpochRecord) {
    let start = Instant::now();
    move |e: &EpochRecord| {
        if every > 0 && e.epoch % every == 0 {
            let value = match unknown {
                Unknown::Period => format!("period_s={:.6e}", e.period),
                Unknown::Pressure => format!("p_s_pa={:.6e}", e.p_s),
            };
            eprintln!(
                "epoch={} loss={:.4e} {value} elapsed_s={:.1}",
                e.epoch,
                e.loss.total,
                start.elapsed().as_secs_f64()
            );
        }
    }
}

/// Writes history, checkpoint and cycle; fails after writing when training diverged.
fn save_training(out: &Path, tr: &Training, physics: &Physics<'_>, samples: usize) -> Outcome<PinnCycle> {
    tr.history.to_table().write(out.join("history.csv"))?;
    checkpoint::save(&tr.model, out.join("model.ckpt"))?;
    if let Some(epoch) = tr.diverged {
        let loss = tr.history.last().map_or(f64::NAN, |r| r.loss.total);
        return Err(Error::Diverged { epoch, loss }.into());
    }
    let cycle = PinnCycle::evaluate(&tr.model, physics, samples)?;
    cycle.to_table().write(out.join("pinn_cycle.csv"))?;
    Ok(cycle)
}

fn cmd_forward(common: &Common, with_reference: bool, progress: usize) -> Outcome<()> {
    let cfg = setup(common)?;
    let af = area_function(&cfg)?;
    let reference = if with_reference {
        Some(reference_run(&cfg, &af)?)
    } else {
        None
    };
    let physics = Physics {
        pp: &cfg.physics,
        area: &af,
        p_data: None,
        weights: LossWeights::from_config(&cfg.run, Unknown::Period),
    };
    let model = initial_model(
        &cfg.run,
        &cfg.physics,
        cfg.smoothing,
        Unknown::Period,
        reference.as_ref().map(|r| r.period),
        None,
    )?;
    let start = Instant::now();
    let tr = train(&cfg.run, &physics, model, progress_printer(progress, Unknown::Period))?;
    let cycle = save_training(&common.out, &tr, &physics, cfg.reference.cycle_samples.max(64))?;
    let mut report = format!(
        "epochs={}\nperiod_s={:e}\nskipped_steps={}\ntraining_s={:.1}\n",
        tr.history.epochs.len(),
        tr.model.period,
        tr.skipped_steps,
        start.elapsed().as_secs_f64()
    );
    if let Some(r) = &reference {
        report += &format!("reference_period_s={:e}\n", r.period);
        report += &cycle.compare(&r.cycle)?.report();
    }
    report += &formant_lines(&cycle.p_l, cycle.period, &cfg);
    write_text(&common.out.join("forward_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_inverse(common: &Common, waveform: Option<&Path>, compare: bool, progress: usize) -> Outcome<()> {
    let cfg = setup(common)?;
    let path = waveform.ok_or_else(|| Failure::new("missing_input", "pinn-inverse needs --waveform <file>"))?;
    let w = Waveform::read(path)?;
    let af = area_function(&cfg)?;
    let series = PeriodicSeries::from_waveform(&w, cfg.run.fourier_features)?;
    let physics = Physics {
        pp: &cfg.physics,
        area: &af,
        p_data: Some(&series),
        weights: LossWeights::from_config(&cfg.run, Unknown::Pressure),
    };
    let model = initial_model(&cfg.run, &cfg.physics, cfg.smoothing, Unknown::Pressure, None, Some(&series))?;
    let initial = model.p_s;
    let start = Instant::now();
    let tr = train(&cfg.run, &physics, model, progress_printer(progress, Unknown::Pressure))?;
    let cycle = save_training(&common.out, &tr, &physics, cfg.reference.cycle_samples.max(64))?;
    let mut report = format!(
        "epochs={}\nperiod_s={:e}\np_s_initial_pa={:e}\np_s_estimate_pa={:e}\np_s_config_pa={:e}\np_s_relative_error={:e}\nskipped_steps={}\ntraining_s={:.1}\n",
        tr.history.epochs.len(),
        tr.model.period,
        initial,
        tr.model.p_s,
        cfg.physics.p_s,
        relative_error(tr.model.p_s, cfg.physics.p_s)?,
        tr.skipped_steps,
        start.elapsed().as_secs_f64()
    );
    if compare {
        let r = reference_run(&cfg, &af)?;
        report += &cycle.compare(&r.cycle)?.report();
    }
    write_text(&common.out.join("inverse_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

/// Samples and rate from a waveform file or a CSV column.
fn read_signal(path: &Path, column: Option<&str>) -> Outcome<(Vec<f64>, f64, Option<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with("period_s=") || text.trim_start().starts_with("rate_hz=") {
        let w = Waveform::parse(&text)?;
        return Ok((w.samples, w.rate, Some(w.period)));
    }
    let table = Table::read(path)?;
    let time = table
        .column("t_s")
        .or_else(|| table.column("time"))
        .ok_or_else(|| Failure::new("format", "CSV input needs a `t_s` or `time` column"))?;
    if time.len() < 2 || !(time[1] > time[0]) {
        return Err(Failure::new("format", "time column must increase"));
    }
    let rate = (time.len() - 1) as f64 / (time[time.len() - 1] - time[0]);
    let name = match column {
        Some(c) => c.to_string(),
        None => table
            .headers
            .last()
            .cloned()
            .ok_or_else(|| Failure::new("format", "CSV has no columns"))?,
    };
    let data = table
        .column(&name)
        .ok_or_else(|| Failure::new("format", format!("CSV has no column `{name}`")))?;
    Ok((data.to_vec(), rate, None))
}

fn cmd_analyze(common: &Common, input: &Path, column: Option<&str>) -> Outcome<()> {
    let cfg = setup(common)?;
    let (samples, rate, period) = read_signal(input, column)?;
    let spec = spectrum(&samples, rate)?;
    spec.to_table().write(common.out.join("spectrum.csv"))?;
    let peak = spec
        .db
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| spec.freq[k])
        .unwrap_or(0.0);
    let formants = match period {
        Some(p) => cycle_formants(&samples, p, cfg.reference.analysis_rate, cfg.reference.lpc_order),
        None => lpc_formants(&samples, rate, cfg.reference.lpc_order),
    };
    let mut report = format!(
        "samples={}\nrate_hz={rate:e}\nbin_width_hz={:e}\npeak_hz={peak:e}\n",
        samples.len(),
        spec.bin_width()
    );
    match formants {
        Ok(f) => {
            let mut t = Table::new();
            t.push("index", (1..=f.len()).map(|i| i as f64).collect());
            t.push("freq_hz", f.clone());
            t.write(common.out.join("formants.csv"))?;
            for (i, v) in f.iter().take(4).enumerate() {
                report += &format!("f{}_hz={v:e}\n", i + 1);
            }
        }
        Err(e) => report += &format!("formants=unavailable ({e})\n"),
    }
    write_text(&common.out.join("analysis_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_gradcheck(common: &Common, seed: u64) -> Outcome<()> {
    let cfg = setup(common)?;
    let af = area_function(&cfg)?;
    let opts = GradcheckOptions {
        seed,
        ..GradcheckOptions::default()
    };
    let rep = gradcheck::run(&cfg.physics, &af, cfg.smoothing, &opts)?;
    let pass = rep.max_rel_error() < 1e-4;
    let text = format!("{}pass={pass}\n", rep.report());
    write_text(&common.out.join("gradcheck_report.txt"), &text)?;
    print!("{text}");
    if pass {
        Ok(())
    } else {
        Err(Failure::new(
            "gradcheck",
            format!("max relative error {:.3e} exceeds 1e-4", rep.max_rel_error()),
        ))
    }
}
