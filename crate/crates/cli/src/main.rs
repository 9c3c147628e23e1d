mod overrides;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use dd_core::data::{
    binarize, gen_gaussian_binary, inject_label_noise, load_idx_dataset, parse_idx,
    read_labeled_csv, write_labeled_csv, LabeledDataset,
};
use dd_core::distill::{
    bayes_risk, ridge_targets, teacher_label, write_distilled_csv, zero_one_risk, LabelMode,
};
use dd_core::rff::{
    fit_logistic, fit_ridge, load_model, sample_feature_map, save_model, BatchSize, TrainConfig,
};
use dd_core::sweep::{emit, run_sweep, write_csv, OutputFormat, SweepConfig};
use dd_core::verify::{run_checks, Check};
use dd_core::Error;

/// Exit status for each failure class.
mod exit {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const VERIFY: u8 = 5;
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => exit::IO,
            Error::Numerical(_) => exit::NUMERICAL,
            _ => exit::CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: exit::CONFIG,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure::from(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(
    name = "ddistill",
    version,
    about = "Random-feature teachers, distilled students, and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Gaussian,
    Idx,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Ridge,
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Soft,
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Margins,
    Theorem,
    Concentration,
    Gradcheck,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest a labeled dataset and write it as CSV.
    GenData {
        /// Data source.
        #[arg(long, value_enum)]
        kind: DataKind,
        /// Number of examples (gaussian).
        #[arg(long)]
        n: Option<usize>,
        /// Input dimension (gaussian).
        #[arg(long)]
        d: Option<usize>,
        /// Mean offset of each mixture component (gaussian).
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        /// Seed for generation and label noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// IDX image file (idx).
        #[arg(long)]
        images: Option<PathBuf>,
        /// IDX label file (idx).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Keep two classes `a,b` and relabel them 0 and 1.
        #[arg(long, value_parser = parse_pair)]
        classes: Option<(usize, usize)>,
        /// Flip each label to a different class with this probability.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the CSV to standard output.
        #[arg(long)]
        stdout: bool,
    },
    /// Fit one random-feature model on a labeled CSV and save it as JSON.
    Fit {
        /// Labeled CSV written by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Number of random features.
        #[arg(long)]
        m: usize,
        /// Feature bandwidth; directions are N(0, I/sigma^2).
        #[arg(long, default_value_t = 5.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = HeadArg::Logistic)]
        head: HeadArg,
        /// Ridge penalty.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Gradient steps (logistic).
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        /// Learning rate (logistic); defaults to 0.1 sigma^2 / m.
        #[arg(long)]
        lr: Option<f64>,
        /// Minibatch rows (logistic); full batch when absent.
        #[arg(long)]
        batch: Option<usize>,
        /// Feature-map seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a pool with a saved teacher and write the distilled CSV.
    Label {
        /// Teacher model JSON written by fit.
        #[arg(long)]
        model: PathBuf,
        /// Labeled CSV whose features form the pool (labels are ignored).
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Soft)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stdout: bool,
    },
    /// Run a double-descent sweep into a fresh run directory.
    Sweep {
        /// TOML sweep configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. `--set train.steps=100`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads across cells.
        #[arg(long)]
        workers: Option<usize>,
        /// Parent directory for run directories.
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        /// Also write the result CSV to standard output.
        #[arg(long)]
        stdout: bool,
    },
    /// Run verification suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = CheckArg::All)]
        check: CheckArg,
        /// Trials (points for margins, instances for gradcheck).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn read_dataset(path: &Path) -> CliResult<LabeledDataset> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    Ok(read_labeled_csv(BufReader::new(file), None)?)
}

/// Write via `sink` to `out` and/or standard output.
fn write_output(
    out: Option<&Path>,
    stdout: bool,
    sink: impl Fn(&mut dyn Write) -> dd_core::Result<()>,
) -> CliResult {
    if out.is_none() && !stdout {
        return Err(config_error("give --out or --stdout"));
    }
    if let Some(path) = out {
        let mut w = create(path)?;
        sink(&mut w)?;
        w.flush().map_err(|e| io_error(path, e))?;
    }
    if stdout {
        let mut lock = io::stdout().lock();
        sink(&mut lock)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    kind: DataKind,
    n: Option<usize>,
    d: Option<usize>,
    mu: f64,
    seed: u64,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    classes: Option<(usize, usize)>,
    noise: f64,
    out: Option<PathBuf>,
    stdout: bool,
) -> CliResult {
    let ds = match kind {
        DataKind::Gaussian => {
            let (n, d) = n
                .zip(d)
                .ok_or_else(|| config_error("gaussian data needs --n and --d"))?;
            gen_gaussian_binary(n, d, mu, seed)?
        }
        DataKind::Idx => {
            let (images, labels) = images
                .zip(labels)
                .ok_or_else(|| config_error("idx data needs --images and --labels"))?;
            load_idx_dataset(
                &parse_idx(&read_bytes(&images)?)?,
                &parse_idx(&read_bytes(&labels)?)?,
            )?
        }
    };
    let ds = match classes {
        Some((a, b)) => binarize(&ds, a, b)?,
        None => ds,
    };
    if let Some(truth) = ds.truth() {
        let risk = bayes_risk(Some(truth), ds.features().as_ref())?;
        eprintln!("bayes risk estimate: {risk}");
    }
    let ds = if noise != 0.0 {
        inject_label_noise(&ds, noise, seed)?
    } else {
        ds
    };
    write_output(out.as_deref(), stdout, |w| write_labeled_csv(&ds, w))?;
    eprintln!("rows: {}", ds.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    data: PathBuf,
    m: usize,
    sigma: f64,
    head: HeadArg,
    lambda: f64,
    steps: usize,
    lr: Option<f64>,
    batch: Option<usize>,
    seed: u64,
    out: PathBuf,
) -> CliResult {
    let ds = read_dataset(&data)?;
    let map = sample_feature_map(m, ds.dim(), sigma, seed)?;
    let model = match head {
        HeadArg::Ridge => {
            let y = ridge_targets(ds.one_hot().as_ref());
            fit_ridge(&map, ds.features().as_ref(), y.as_ref(), lambda)?
        }
        HeadArg::Logistic => {
            let cfg = TrainConfig {
                lambda,
                steps,
                learning_rate: lr,
                lr_scale: None,
                batch_size: batch.map_or(BatchSize::Full, BatchSize::Rows),
                log_loss: false,
            };
            fit_logistic(
                &map,
                ds.features().as_ref(),
                ds.one_hot().as_ref(),
                &cfg,
                seed,
            )?
        }
    };
    eprintln!("train error: {}", zero_one_risk(&model, &ds)?);
    save_model(&model, &out)?;
    Ok(())
}

fn label(
    model: PathBuf,
    pool: PathBuf,
    mode: ModeArg,
    out: Option<PathBuf>,
    stdout: bool,
) -> CliResult {
    let teacher = load_model(&model)?;
    let pool = read_dataset(&pool)?.to_pool();
    let mode = match mode {
        ModeArg::Soft => LabelMode::Soft,
        ModeArg::Hard => LabelMode::Hard,
    };
    let ds = teacher_label(&teacher, &pool, mode)?;
    write_output(out.as_deref(), stdout, |w| write_distilled_csv(&ds, w))?;
    eprintln!("labeled rows: {}", ds.len());
    Ok(())
}

/// Parse the config file, apply overrides, and validate.
fn resolve_config(
    path: &Path,
    overrides: &[String],
    workers: Option<usize>,
) -> CliResult<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_error(format!("{}: {e}", path.display())))?;
    for o in overrides {
        overrides::apply(&mut doc, o).map_err(config_error)?;
    }
    if let Some(w) = workers {
        doc.insert("workers".into(), toml::Value::Integer(w as i64));
    }
    let cfg: SweepConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(
    config: PathBuf,
    overrides: Vec<String>,
    workers: Option<usize>,
    out_dir: PathBuf,
    stdout: bool,
) -> CliResult {
    let cfg = resolve_config(&config, &overrides, workers)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let dir = out_dir.join(format!("run-{}-{stamp}", &cfg.hash()[..12]));
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(|e| io_error(&cfg_path, e))?;

    eprintln!("run directory: {}", dir.display());
    let result = run_sweep(&cfg)?;
    emit(&result, OutputFormat::Csv, &dir.join("results.csv"))?;
    emit(&result, OutputFormat::Json, &dir.join("results.json"))?;
    let meta = serde_json::json!({
        "config_hash": result.metadata.config_hash,
        "seeds": result.metadata.seeds,
        "workers": result.metadata.workers,
        "version": result.metadata.version,
        "sizes": result.metadata.sizes,
        "created_unix": stamp,
    });
    let meta_path = dir.join("metadata.json");
    fs::write(&meta_path, format!("{meta:#}\n")).map_err(|e| io_error(&meta_path, e))?;
    if stdout {
        write_csv(&result, io::stdout().lock())?;
    }
    let failed = result.rows.iter().filter(|r| !r.is_ok()).count();
    eprintln!("cells: {} ({} failed)", result.rows.len(), failed);
    if result.all_failed() {
        return Err(Failure {
            code: exit::NUMERICAL,
            message: "every sweep cell failed".into(),
        });
    }
    Ok(())
}

fn verify(check: CheckArg, trials: Option<usize>, seed: u64, out: Option<PathBuf>) -> CliResult {
    let checks: Vec<Check> = match check {
        CheckArg::Margins => vec![Check::Margins],
        CheckArg::Theorem => vec![Check::Theorem],
        CheckArg::Concentration => vec![Check::Concentration],
        CheckArg::Gradcheck => vec![Check::Gradcheck],
        CheckArg::All => Check::ALL.to_vec(),
    };
    let report = run_checks(&checks, trials, seed)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    println!("{text}");
    if let Some(path) = out {
        fs::write(&path, format!("{text}\n")).map_err(|e| io_error(&path, e))?;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: statistic {}", c.name, c.statistic);
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure {
            code: exit::VERIFY,
            message: "verification failed".into(),
        })
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenData {
            kind,
            n,
            d,
            mu,
            seed,
            images,
            labels,
            classes,
            noise,
            out,
            stdout,
        } => gen_data(
            kind, n, d, mu, seed, images, labels, classes, noise, out, stdout,
        ),
        Command::Fit {
            data,
            m,
            sigma,
            head,
            lambda,
            steps,
            lr,
            batch,
            seed,
            out,
        } => fit(data, m, sigma, head, lambda, steps, lr, batch, seed, out),
        Command::Label {
            model,
            pool,
            mode,
            out,
            stdout,
        } => label(model, pool, mode, out, stdout),
        Command::Sweep {
            config,
            overrides,
            workers,
            out_dir,
            stdout,
        } => sweep(config, overrides, workers, out_dir, stdout),
        Command::Verify {
            check,
            trials,
            seed,
            out,
        } => verify(check, trials, seed, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
