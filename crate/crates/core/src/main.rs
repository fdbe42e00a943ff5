use adaft::corpus::{generate_synthetic, SyntheticSpec};
use adaft::runner::report::{build_report, ReportKind};
use adaft::runner::{
    self, default_threads, read_results, Approach, CorpusRegistry, ExperimentConfig, ExperimentSpec, RunContext,
    ScheduleDefaults,
};
use adaft::schedule::schedule_trace;
use adaft::stats::FitOptions;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "adaft", version, about = "Adaptive fine-tuning schedules and multi-seed experiment analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its results as JSON lines.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        approach: String,
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        x: f64,
        /// Validation scaling factor (defaults to --x).
        #[arg(long)]
        x_val: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        merge_train_val: bool,
        #[arg(long)]
        pinned_epochs: Option<f64>,
        #[arg(long)]
        no_traces: bool,
    },
    /// Run the configured grid, skipping runs already in the results file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "ADAFT_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        no_traces: bool,
    },
    /// Summarize a results file as a table.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "main")]
        kind: Kind,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Fit f1 against 1/(N_epochs x) for every approach in a results file.
    Fit {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        delta_floor: f64,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Replay a validation-loss trace (one value per line) through a schedule.
    SimulateSchedule {
        /// Loss file; `-` reads stdin.
        #[arg(long)]
        losses: PathBuf,
        #[arg(long, default_value = "adaptive")]
        variant: String,
        #[arg(long, default_value_t = 7)]
        patience: u32,
        #[arg(long, default_value_t = 2)]
        warmup: u32,
        #[arg(long, default_value_t = 2e-5)]
        max_lr: f64,
        /// Epoch count of the pinned ablations.
        #[arg(long)]
        epochs: Option<f64>,
        #[arg(long)]
        cap: Option<u32>,
    },
    /// Write a synthetic BIO corpus (train.txt, val.txt, test.txt).
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2857)]
        sentences: usize,
        #[arg(long, value_delimiter = ',', default_value = "PER,LOC,ORG")]
        types: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Main,
    Ratio,
    Stability,
    Fit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

fn load_config(path: Option<&Path>) -> Result<(ExperimentConfig, PathBuf)> {
    match path {
        Some(p) => {
            let cfg = ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?;
            let base = p.parent().unwrap_or(Path::new(".")).to_path_buf();
            Ok((cfg, base))
        }
        None => Ok((ExperimentConfig::default(), PathBuf::from("."))),
    }
}

fn context(cfg: ExperimentConfig, base: &Path) -> Result<RunContext> {
    let corpora = CorpusRegistry::from_config(&cfg, base)?;
    Ok(RunContext::new(cfg, corpora))
}

fn render(table: &adaft::runner::report::Table, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Markdown => table.to_markdown(),
    }
}

fn read_losses(path: &Path) -> Result<Vec<f64>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))
    };
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().with_context(|| format!("line {}: not a number: {t:?}", i + 1))?);
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run {
            config,
            approach,
            corpus,
            x,
            x_val,
            seeds,
            merge_train_val,
            pinned_epochs,
            no_traces,
        } => {
            let (mut cfg, base) = load_config(config.as_deref())?;
            cfg.record_traces &= !no_traces;
            let mut spec = ExperimentSpec::new(approach.parse()?, corpus, x);
            spec.x_val = x_val.unwrap_or(x);
            if let Some(s) = seeds {
                spec.seeds = s;
            }
            spec.merge_train_val = merge_train_val;
            spec.pinned_epochs = pinned_epochs;
            let ctx = context(cfg, &base)?;
            for r in runner::run_experiment(&spec, &ctx)? {
                writeln!(out, "{}", serde_json::to_string(&r)?)?;
            }
        }
        Command::Sweep {
            config,
            threads,
            no_traces,
        } => {
            let (mut cfg, base) = load_config(Some(&config))?;
            cfg.record_traces &= !no_traces;
            let threads = threads.or(cfg.threads).unwrap_or_else(default_threads);
            let path = cfg.results_path(&base);
            let specs = runner::expand_grid(&cfg.grid)?;
            let ctx = context(cfg, &base)?;
            let s = runner::sweep(&specs, &ctx, &path, threads)?;
            eprintln!(
                "{}: {} runs, {} already present, {} computed",
                path.display(),
                s.total,
                s.skipped,
                s.computed
            );
        }
        Command::Report { results, kind, format } => {
            let rs = read_results(&results)?;
            let kind = match kind {
                Kind::Main => ReportKind::MainTable,
                Kind::Ratio => ReportKind::RatioTable,
                Kind::Stability => ReportKind::StabilityTable,
                Kind::Fit => ReportKind::FitTable,
            };
            write!(out, "{}", render(&build_report(&rs, kind), format))?;
        }
        Command::Fit {
            results,
            delta_floor,
            format,
        } => {
            let rs = read_results(&results)?;
            let cells = adaft::runner::report::aggregate(&rs);
            let table = adaft::runner::report::fit_table(&cells, FitOptions { delta_floor });
            write!(out, "{}", render(&table, format))?;
        }
        Command::SimulateSchedule {
            losses,
            variant,
            patience,
            warmup,
            max_lr,
            epochs,
            cap,
        } => {
            let approach: Approach = variant.parse()?;
            let defaults = ScheduleDefaults {
                max_lr,
                warmup_epochs: warmup,
                patience,
                ..ScheduleDefaults::default()
            };
            let cfg = approach.schedule(&defaults, epochs)?;
            let losses = read_losses(&losses)?;
            let trace = schedule_trace(&cfg, &losses, cap)?;
            match trace.stop_epoch {
                Some(e) => writeln!(out, "# stop_epoch={e}")?,
                None if trace.cap_reached => writeln!(out, "# cap_reached={}", trace.decisions.len())?,
                None => bail!("trace ended without a stop"),
            }
            writeln!(out, "epoch,val_loss,lr,decision")?;
            for (i, (lr, d)) in trace.lr_curve.iter().zip(&trace.decisions).enumerate() {
                let loss = losses.get(i).map_or(String::new(), |l| l.to_string());
                writeln!(out, "{},{loss},{lr},{d}", i + 1)?;
            }
        }
        Command::GenCorpus {
            out: dir,
            sentences,
            types,
            noise,
            seed,
        } => {
            let types: Vec<&str> = types.iter().map(String::as_str).collect();
            let corpus = generate_synthetic(&SyntheticSpec::new(sentences, &types, noise, seed))?;
            corpus.write_dir(&dir)?;
            eprintln!(
                "{}: {} train, {} val, {} test sentences",
                dir.display(),
                corpus.train.len(),
                corpus.val.len(),
                corpus.test.len()
            );
        }
    }
    Ok(())
}
