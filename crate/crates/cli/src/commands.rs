//! Subcommand definitions and their drivers.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use salmix_core::classify::ClassificationTask;
use salmix_core::simulate::{generate_one, paper_sim_spec, SimComponents};

use crate::error::{CliError, Result};
use crate::grid::{density_grid, write_grid_csv, GridSpec};
use crate::input::{read_table_path, Standardization, Table};
use crate::report::{read_fit_document, write_json, write_labels_csv, Criterion, Model};
use crate::repro::run_study;
use crate::sweep::{classify_sweep, cluster_sweep, init_thread_pool, FitSettings, SweepResult};

#[derive(Debug, Parser)]
#[command(name = "salmix", version, about = "SAL and Gaussian mixture clustering and classification")]
pub struct Cli {
    /// Worker threads for the fitting pool.
    #[arg(long, env = "SALMIX_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit mixtures over a range of G and keep the best by ICL or BIC.
    Cluster(ClusterArgs),
    /// Fit with some rows' classes known and label the rest.
    Classify(ClassifyArgs),
    /// Write simulated data sets as CSV.
    Simulate(SimulateArgs),
    /// Evaluate a fitted bivariate mixture on a grid.
    DensityGrid(GridArgs),
    /// Run the two-component simulation study and print a summary table.
    ReproSim(ReproArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_delimiter = ',', default_value = "sal")]
    pub model: Vec<Model>,
    #[arg(long, value_enum, default_value_t = Criterion::Icl)]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 25)]
    pub anneal_steps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Z-score columns before fitting; parameters are reported in original units.
    #[arg(long)]
    pub standardize: bool,
    /// Directory for the JSON reports and the labels CSV.
    #[arg(long, short, default_value = "salmix-out")]
    pub out_dir: PathBuf,
}

impl FitArgs {
    fn settings(&self) -> FitSettings {
        FitSettings {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts,
            anneal_steps: self.anneal_steps,
            seed: self.seed,
        }
    }

    fn models(&self) -> Vec<Model> {
        let mut m = self.model.clone();
        m.dedup();
        m
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub g_min: usize,
    #[arg(long, default_value_t = 5)]
    pub g_max: usize,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// CSV with a `label` column; a `known` column selects the labeled rows,
    /// otherwise every row with a label is known.
    pub input: PathBuf,
    /// Number of classes; defaults to the distinct labels in the file.
    #[arg(long)]
    pub g: Option<usize>,
    /// Total components (at least G); extra ones only serve unlabeled rows.
    #[arg(long)]
    pub h: Option<usize>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Two skewed components, 500 rows, 25 data sets.
    #[arg(long)]
    pub paper: bool,
    #[arg(long)]
    pub datasets: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Components to draw from (1 or 2), equally weighted.
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, short, default_value = "salmix-sim")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// A fit report written by `cluster` or `classify`.
    pub report: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub datasets: usize,
    #[arg(long, default_value_t = 7)]
    pub g_max: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 25)]
    pub anneal_steps: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    init_thread_pool(cli.threads)?;
    match cli.command {
        Command::Cluster(a) => cluster(&a).map(|_| ()),
        Command::Classify(a) => classify(&a).map(|_| ()),
        Command::Simulate(a) => simulate(&a).map(|_| ()),
        Command::DensityGrid(a) => grid(&a),
        Command::ReproSim(a) => repro(&a),
    }
}

fn prepare(path: &Path, standardize: bool) -> Result<(Table, Option<Standardization>)> {
    let mut table = read_table_path(path)?;
    let s = standardize.then(|| Standardization::fit(&table.data));
    if let Some(s) = &s {
        table.data = s.apply(&table.data)?;
    }
    Ok((table, s))
}

fn write_outputs(result: &SweepResult, fit: &FitArgs) -> Result<()> {
    let dir = &fit.out_dir;
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    for doc in &result.documents {
        write_json(&dir.join(doc.file_name()), doc)?;
    }
    write_json(&dir.join("summary.json"), &result.summary(fit.criterion, fit.seed))?;
    let labels = dir.join("labels.csv");
    let file = std::fs::File::create(&labels).map_err(CliError::io(&labels))?;
    write_labels_csv(std::io::BufWriter::new(file), result.selected())?;
    let best = result.selected();
    println!(
        "selected {} G={} ({} = {:.4}); {} fits, {} failures; outputs in {}",
        best.model.name(),
        best.g,
        match fit.criterion {
            Criterion::Icl => "ICL",
            Criterion::Bic => "BIC",
        },
        best.criterion(fit.criterion),
        result.documents.len(),
        result.failures.len(),
        dir.display()
    );
    for f in &result.failures {
        eprintln!("warning: {} G={} failed: {}", f.model.name(), f.g, f.error);
    }
    Ok(())
}

pub fn cluster(a: &ClusterArgs) -> Result<SweepResult> {
    if a.g_min == 0 || a.g_min > a.g_max {
        return Err(CliError::InvalidArgument("need 1 <= g-min <= g-max".into()));
    }
    let (table, s) = prepare(&a.input, a.fit.standardize)?;
    let mut result = cluster_sweep(&table.data, &a.fit.models(), a.g_min..=a.g_max, &a.fit.settings(), a.fit.criterion, s.as_ref())?;
    for doc in &mut result.documents {
        doc.class_names.clone_from(&table.class_names);
    }
    write_outputs(&result, &a.fit)?;
    Ok(result)
}

/// Rows whose class is supplied to the fit.
fn known_labels(table: &Table) -> Result<Vec<Option<usize>>> {
    let labels = table.labels.as_ref().ok_or_else(|| CliError::InvalidArgument("classification needs a label column".into()))?;
    let Some(known) = &table.known else { return Ok(labels.clone()) };
    labels
        .iter()
        .zip(known)
        .enumerate()
        .map(|(i, (l, &k))| match (l, k) {
            (Some(l), true) => Ok(Some(*l)),
            (None, true) => Err(CliError::Parse { line: i as u64 + 2, message: "row marked known has no label".into() }),
            (_, false) => Ok(None),
        })
        .collect()
}

pub fn classify(a: &ClassifyArgs) -> Result<SweepResult> {
    let (table, s) = prepare(&a.input, a.fit.standardize)?;
    let known = known_labels(&table)?;
    let g = a.g.unwrap_or(table.class_names.len());
    let h = a.h.unwrap_or(g);
    if g == 0 {
        return Err(CliError::InvalidArgument("no classes found; pass --g".into()));
    }
    let truth = table.labels.clone();
    let task = ClassificationTask::new(table.data.clone(), known, g, h)?;
    let mut result = classify_sweep(&task, truth.as_deref(), &a.fit.models(), &a.fit.settings(), a.fit.criterion, s.as_ref())?;
    for doc in &mut result.documents {
        doc.class_names.clone_from(&table.class_names);
    }
    write_outputs(&result, &a.fit)?;
    Ok(result)
}

/// Writes `sim-001.csv`, ... and returns their paths.
pub fn simulate(a: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let mut spec = paper_sim_spec(a.seed);
    if !a.paper {
        spec.datasets = 1;
        let g = a.g.unwrap_or(2);
        let SimComponents::Sal(c) = &mut spec.components else { unreachable!() };
        if !(1..=c.len()).contains(&g) {
            return Err(CliError::InvalidArgument(format!("--g must be between 1 and {}", c.len())));
        }
        c.truncate(g);
        spec.weights = vec![1.0 / g as f64; g];
    } else if a.g.is_some_and(|g| g != 2) {
        return Err(CliError::InvalidArgument("--paper fixes G = 2".into()));
    }
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(d) = a.datasets {
        spec.datasets = d;
    }
    spec.validate()?;
    std::fs::create_dir_all(&a.out_dir).map_err(CliError::io(&a.out_dir))?;
    let mut paths = Vec::new();
    for d in 0..spec.datasets {
        let data = generate_one(&spec, d)?;
        let path = a.out_dir.join(format!("sim-{:03}.csv", d + 1));
        let file = std::fs::File::create(&path).map_err(CliError::io(&path))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        let labels = data.labels().expect("simulated data carry labels");
        for (row, l) in data.rows().zip(labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push((l + 1).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        paths.push(path);
    }
    println!("wrote {} data sets to {}", paths.len(), a.out_dir.display());
    Ok(paths)
}

fn grid(a: &GridArgs) -> Result<()> {
    let doc = read_fit_document(&a.report)?;
    let m = doc.parameters.to_mixture()?;
    let spec = GridSpec { x: (a.x_min, a.x_max), y: (a.y_min, a.y_max), nx: a.resolution, ny: a.resolution };
    let g = density_grid(&m, &spec)?;
    match &a.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(CliError::io(path))?;
            write_grid_csv(std::io::BufWriter::new(file), &g)
        }
        None => write_grid_csv(std::io::stdout().lock(), &g),
    }
}

fn repro(a: &ReproArgs) -> Result<()> {
    let settings =
        FitSettings { epsilon: a.epsilon, max_iter: 1000, restarts: a.restarts, anneal_steps: a.anneal_steps, seed: a.seed };
    let summary = run_study(a.seed, a.datasets, a.g_max, &settings)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{summary}").map_err(CliError::io("stdout"))?;
    Ok(())
}
