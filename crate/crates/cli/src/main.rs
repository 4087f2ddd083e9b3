mod args;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use apfit_core::dataio::normalize;
use apfit_core::model::{model_spec, reference_params, ModelId, ModelOptions, Params};
use apfit_core::orchestrator::{
    bench, build_job, export_convergence_csv, export_parameters, export_run_details,
    export_trace_csv, run_fit, FitConfig, Progress, RunControl,
};
use apfit_core::simulator::{sample_alignment_window, Protocol};
use apfit_core::stimulus::StimulusConfig;
use clap::{Parser, Subcommand};

use args::{FitArgs, Invalid, ProtocolArgs, StimArgs};

#[derive(Parser)]
#[command(
    name = "apfit",
    version,
    about = "Fit cardiac action potential models with a particle swarm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to voltage traces and/or APD targets
    Fit(FitArgs),
    /// Time repeated fits of one configuration
    Bench {
        #[command(flatten)]
        fit: FitArgs,
        /// Number of timed runs
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Simulate a model and write one voltage file per cycle length
    Generate(GenerateArgs),
    /// List models, or show one model's parameters and default bounds
    Models {
        /// Model id to describe
        model: Option<ModelId>,
    },
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Model id (mfhn, ms, mms, fk, bocf, bbocf)
    #[arg(long)]
    model: ModelId,
    /// Cycle lengths in ms, comma-separated or repeated
    #[arg(long = "cl", value_delimiter = ',', required = true, value_name = "MS")]
    cycle_lengths: Vec<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Parameter file with NAME<TAB>VALUE lines; reference values otherwise
    #[arg(long, value_name = "PATH")]
    params: Option<PathBuf>,
    /// Override one parameter: NAME=VALUE (repeatable)
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    stim: StimArgs,
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn validated(config: &FitConfig) -> anyhow::Result<apfit_core::orchestrator::FitJob> {
    build_job(config).map_err(|e| Invalid(format!("invalid configuration:\n{e}")).into())
}

fn cmd_fit(args: &FitArgs) -> anyhow::Result<()> {
    let config = args.to_config()?;
    let job = validated(&config)?;
    let iterations = job.hyper().iterations;
    eprintln!(
        "fitting {} to {} dataset(s): {} particles, {} iterations, seed {}",
        config.model,
        config.datasets.len(),
        job.hyper().particles,
        iterations,
        config.seed
    );
    let result = run_fit(
        &job,
        RunControl {
            threads: args.threads,
            cancel: None,
            progress: Some(Box::new(move |p: Progress| {
                eprintln!(
                    "iteration {}/{iterations}: lowest error {:e}",
                    p.iteration, p.lowest_error
                );
            })),
        },
    )?;

    let outputs = [
        (&args.out_params, export_parameters(&result)),
        (&args.out_details, export_run_details(job.config(), &result)),
        (&args.out_trace, export_trace_csv(&result)),
        (&args.out_convergence, export_convergence_csv(&result)),
    ];
    for (path, text) in &outputs {
        if let Some(path) = path {
            write_atomic(path, text)?;
        }
    }

    println!("final error: {:e}", result.best_error);
    println!("wall time: {:.3} s", result.wall_time_s);
    println!("seed: {}", result.seed);
    for e in &result.breakdown.per_dataset {
        println!(
            "  {} (CL {} ms): {:e}",
            e.label, e.cycle_length, e.normalized
        );
    }
    print!("{}", export_parameters(&result));
    Ok(())
}

fn cmd_bench(args: &FitArgs, repeats: usize) -> anyhow::Result<()> {
    if repeats == 0 {
        return Err(Invalid("--repeats must be at least 1".into()).into());
    }
    let job = validated(&args.to_config()?)?;
    let report = bench(&job, repeats, args.threads)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn load_param_file(model: ModelId, path: &Path) -> anyhow::Result<Params> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once(['\t', ' '])
            .and_then(|(n, v)| Some((n, v.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| {
                Invalid(format!(
                    "{}:{}: expected NAME<TAB>VALUE",
                    path.display(),
                    i + 1
                ))
            })?;
        pairs.push((name.to_string(), value));
    }
    let mut params = reference_params(model);
    for (name, value) in pairs {
        params
            .set(&name, value)
            .map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(params)
}

fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let model = args.model;
    let mut params = match &args.params {
        Some(path) => load_param_file(model, path)?,
        None => reference_params(model),
    };
    for spec in &args.set {
        let (name, value) = spec
            .split_once('=')
            .and_then(|(n, v)| Some((n.trim(), v.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| Invalid(format!("--set '{spec}': expected NAME=VALUE")))?;
        params
            .set(name, value)
            .map_err(|e| Invalid(format!("--set '{spec}': {e}")))?;
    }
    let stimulus = args.stim.apply(StimulusConfig::default())?;
    let mut protocol = Protocol::default();
    let p = &args.protocol;
    if let Some(n) = p.num_stimuli {
        protocol.num_stimuli = n;
    }
    if let Some(n) = p.pre_stimuli {
        protocol.pre_stimuli = n;
    }
    if let Some(si) = p.sample_interval {
        protocol.sample_interval = si;
    }
    let normalize_to = p
        .normalize_to
        .unwrap_or(model_spec(model).default_normalize_to);
    if !(normalize_to.is_finite() && normalize_to >= 0.0) {
        return Err(Invalid("--normalize-to must be non-negative".into()).into());
    }

    let mut files = Vec::new();
    for &cl in &args.cycle_lengths {
        let pacing = protocol.pacing(cl);
        pacing
            .validate()
            .map_err(|e| Invalid(format!("cycle length {cl}: {e}")))?;
        let trace = sample_alignment_window(
            model,
            &params,
            &stimulus,
            &pacing,
            0,
            &ModelOptions::default(),
        )?;
        if trace.diverged {
            anyhow::bail!("{model} diverged at cycle length {cl} ms with these parameters");
        }
        let samples = normalize(&trace.samples, normalize_to)
            .with_context(|| format!("cycle length {cl} ms"))?;
        let text: String = samples.iter().map(|v| format!("{v}\n")).collect();
        files.push((
            args.out_dir.join(format!("{}_cl{cl}.txt", model.key())),
            text,
        ));
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    for (path, text) in &files {
        write_atomic(path, text)?;
        println!("{}", path.display());
    }
    let record: String = params
        .named()
        .map(|(name, value)| format!("{name}\t{value}\n"))
        .collect();
    let record_path = args.out_dir.join(format!("{}_params.tsv", model.key()));
    write_atomic(&record_path, &record)?;
    println!("{}", record_path.display());
    Ok(())
}

fn cmd_models(model: Option<ModelId>) {
    match model {
        None => {
            for id in ModelId::ALL {
                let spec = model_spec(id);
                println!(
                    "{:<6} {:<40} {:>2} parameters",
                    id.key(),
                    id.display_name(),
                    spec.len()
                );
            }
        }
        Some(id) => {
            let spec = model_spec(id);
            println!("{} ({})", id.display_name(), id.key());
            println!("default normalize_to: {}", spec.default_normalize_to);
            println!("{:<14} {:<8} {:>12} {:>12}", "name", "symbol", "min", "max");
            for p in spec.parameters {
                println!("{:<14} {:<8} {:>12} {:>12}", p.name, p.symbol, p.min, p.max);
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Bench { fit, repeats } => cmd_bench(fit, *repeats),
        Command::Generate(args) => cmd_generate(args),
        Command::Models { model } => {
            cmd_models(*model);
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
