mod args;
mod names;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;
use serde_json::json;

use vfold::criteria::{compute_table, select};
use vfold::densities::{density_by_name, Measure};
use vfold::experiments::{
    run_cor_with, run_variance_curves, write_csv, write_csv_to, BenchTable, CsvReport,
    ExperimentConfig, PlotData,
};
use vfold::fastvf::{bench_kernels, BenchConfig, Kernel};
use vfold::heuristic::selection_distribution;
use vfold::models::collection_by_name;
use vfold::Sample;

use args::{BenchArgs, Cli, Command, HeuristicArgs, SelectArgs, SimulateArgs, VarianceArgs};

/// Usage problems exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<vfold::Error> for Failure {
    fn from(e: vfold::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// A reader such as `head` stopped listening; nothing left to report.
fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Variance(a) => variance(a),
        Command::Heuristic(a) => heuristic(a),
        Command::Bench(a) => bench(a),
        Command::Select(a) => select_model(a),
    }
}

/// Writes a report to a file, or to standard output for `-`.
fn emit<R: CsvReport + ?Sized>(report: &R, out: &Path) -> Outcome {
    if out == Path::new("-") {
        let mut buf = Vec::new();
        write_csv_to(report, &mut buf)?;
        io::stdout().lock().write_all(&buf).context("cannot write to standard output")?;
    } else {
        write_csv(report, out)?;
    }
    Ok(())
}

fn emit_plot(plot: Option<&Path>, data: impl FnOnce() -> PlotData) -> Outcome {
    match plot {
        Some(path) => emit(&data(), path),
        None => Ok(()),
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let file = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_file(file).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig {
            setting: a.setting.clone().expect("required by clap"),
            collection: a.collection.clone().expect("required by clap"),
            n: a.n.expect("required by clap"),
            reps: a.reps.expect("required by clap"),
            seed: a.seed.expect("required by clap"),
            procedures: match &a.procedures {
                Some(text) => names::procedures(text)?,
                None => vfold::criteria::default_procedures(),
            },
        },
    };
    names::setting(&config.setting)?;
    names::collection(&config.collection)?;
    config.validate().map_err(|e| usage(e.to_string()))?;
    for spec in &config.procedures {
        spec.validate(config.n).map_err(|e| usage(e.to_string()))?;
    }
    let density = density_by_name(&config.setting)?;
    let collection = collection_by_name(&config.collection, config.n)?;
    let report = run_cor_with(&density, &collection, &config)?;
    emit(&report, &a.out)?;
    emit_plot(a.plot_data.as_deref(), || report.plot_data())
}

fn variance(a: VarianceArgs) -> Outcome {
    let p = &a.problem;
    names::setting(&p.setting)?;
    names::collection(&p.collection)?;
    let v_list: Vec<usize> = names::list(&a.v_list, "--V")?;
    if let Some(&v) = v_list.iter().find(|&&v| v < 2 || v > p.n || !p.n.is_multiple_of(v)) {
        return Err(usage(format!("--V {v}: need 2 ≤ V ≤ n with V dividing n = {}", p.n)));
    }
    if !(a.c.is_finite() && a.c > 0.0) {
        return Err(usage("--C must be a positive real"));
    }
    let mc = match (a.mc, a.seed) {
        (0, _) => None,
        (_, None) => return Err(usage("--mc needs --seed")),
        (reps, Some(seed)) => Some((reps, seed)),
    };
    let density = density_by_name(&p.setting)?;
    let collection = collection_by_name(&p.collection, p.n)?;
    let (table, fit) = run_variance_curves(&density, &collection, p.n, &v_list, a.c, mc)?;
    emit(&table, &a.out)?;
    if a.kfit {
        let fit = fit.ok_or_else(|| anyhow!("not enough models above the best one to fit K1..K4"))?;
        let per_v: Vec<_> = fit
            .per_v
            .iter()
            .map(|(v, intercept, slope)| json!({"V": v, "intercept": intercept, "slope": slope}))
            .collect();
        let value = json!({
            "K1": fit.k1, "K2": fit.k2, "K3": fit.k3, "K4": fit.k4,
            "best_dim": fit.m_star_dim, "per_V": per_v,
        });
        println!("{value}");
    }
    emit_plot(a.plot_data.as_deref(), || table.plot_data())
}

fn heuristic(a: HeuristicArgs) -> Outcome {
    let p = &a.problem;
    names::setting(&p.setting)?;
    names::collection(&p.collection)?;
    let spec = names::criterion(&a.criterion)?;
    spec.validate(p.n).map_err(|e| usage(e.to_string()))?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let density = density_by_name(&p.setting)?;
    let collection = collection_by_name(&p.collection, p.n)?;
    let report = selection_distribution(&density, &collection, p.n, &spec, a.reps, a.seed, a.renormalize)?;
    emit(&report, &a.out)?;
    emit_plot(a.plot_data.as_deref(), || report.plot_data())
}

fn bench(a: BenchArgs) -> Outcome {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let kernels = a
        .kernels
        .split(',')
        .map(|k| Kernel::parse(k.trim()).map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let config = BenchConfig {
        n_list: names::list(&a.n_list, "--n-list")?,
        v_list: names::list(&a.v_list, "--v-list")?,
        d_list: names::list(&a.d_list, "--d-list")?,
        repeats: a.repeats,
        seed: a.seed,
        kernels,
    };
    if config.d_list.contains(&0) || config.n_list.contains(&0) {
        return Err(usage("sample sizes and dimensions must be positive"));
    }
    let table = BenchTable(bench_kernels(&config)?);
    emit(&table, &a.out)?;
    emit_plot(a.plot_data.as_deref(), || table.plot_data())
}

fn select_model(a: SelectArgs) -> Outcome {
    names::collection(&a.collection)?;
    let spec = names::criterion(&a.criterion)?;
    let density = match (&a.setting, spec.needs_density()) {
        (Some(name), _) => {
            names::setting(name)?;
            Some(density_by_name(name)?)
        }
        (None, true) => return Err(usage(format!("{spec} needs --setting"))),
        (None, false) => None,
    };
    let file = File::open(&a.data).with_context(|| format!("cannot open {}", a.data.display()))?;
    let sample = Sample::from_reader(BufReader::new(file))
        .with_context(|| format!("{}", a.data.display()))?;
    let n = sample.len();
    let collection = collection_by_name(&a.collection, n)?;
    let measure = density.as_ref().map(|d| d as &dyn Measure);
    let table = compute_table(&spec, &sample, &collection, measure)?;
    let index = select(&table, &collection)?;
    let model = &collection.models()[index];
    let value = json!({
        "model": model.id(),
        "dim": model.dim(),
        "breakpoints": model.breakpoints(),
        "criterion": spec.to_string(),
        "value": table.values[index],
        "n": n,
    });
    let mut out = io::stdout().lock();
    writeln!(out, "{value}").context("cannot write to standard output")?;
    Ok(())
}
