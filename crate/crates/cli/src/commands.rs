use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::json;

use sampledefect_core::fixtures::{self, LogisticSelection};
use sampledefect_core::grid::{diagnostics_by_resolution, write_resolution_csv, GridPopulation};
use sampledefect_core::mitigation::{
    evaluate_mitigation, evaluate_true_stratum_weights, fit_propensity, FitOptions, Normalization,
    WeightingOptions, DEFAULT_MAX_ITER, DEFAULT_RIDGE, DEFAULT_TOL,
};
use sampledefect_core::montecarlo::{export_distributions, run_experiment, ExperimentConfig};
use sampledefect_core::population::{load_membership, write_membership, write_population};
use sampledefect_core::{diagnose, load_population, Population, SampleMembership, Schema};

use crate::manifest::{write_json, RunManifest};
use crate::report;

pub const SRS_CONFIG: &str = include_str!("../../../configs/box2_srs.json");
pub const BIASED_CONFIG: &str = include_str!("../../../configs/box2_biased.json");

/// Shared state for one invocation. `root` is set when commands run as
/// stages of a larger pipeline.
#[derive(Debug, Clone, Default)]
pub struct Ctx {
    pub quiet: bool,
    pub root: Option<PathBuf>,
}

impl Ctx {
    fn say(&self, text: impl fmt::Display) {
        if !self.quiet {
            println!("{text}");
        }
    }
}

/// Propensity fit stopped before meeting its tolerance.
#[derive(Debug)]
pub struct Unconverged {
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl fmt::Display for Unconverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "propensity model did not converge after {} iterations (gradient max-norm {:e}); \
             rerun with --allow-unconverged to keep the fit",
            self.iterations, self.gradient_norm
        )
    }
}

impl std::error::Error for Unconverged {}

#[derive(Debug, Clone, Args)]
pub struct PopulationArgs {
    /// Population table (CSV with `id`, `y` and optionally `sampled`, `row`, `col`, covariates)
    #[arg(long)]
    pub population: PathBuf,
    /// Separate `id,sampled` table; overrides any `sampled` column
    #[arg(long)]
    pub membership: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    pub id_column: String,
    #[arg(long, default_value = "y")]
    pub y_column: String,
    /// Covariate columns to load (default: every unrecognised column)
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

impl PopulationArgs {
    pub fn at(population: PathBuf) -> Self {
        Self {
            population,
            membership: None,
            id_column: "id".into(),
            y_column: "y".into(),
            covariates: None,
        }
    }

    fn schema(&self) -> Schema {
        Schema {
            id: self.id_column.clone(),
            y: self.y_column.clone(),
            covariates: self.covariates.clone(),
            ..Schema::default()
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "id_column": self.id_column,
            "y_column": self.y_column,
            "covariates": self.covariates,
        })
    }

    fn load(
        &self,
        manifest: &mut RunManifest,
        ctx: &Ctx,
    ) -> Result<(Population, Option<SampleMembership>)> {
        let bytes = fs::read(&self.population)
            .with_context(|| format!("reading population {}", self.population.display()))?;
        manifest.add_input(&self.population, &bytes, ctx.root.as_deref());
        let loaded = load_population(bytes.as_slice(), &self.schema())
            .with_context(|| format!("loading {}", self.population.display()))?;
        let membership = match &self.membership {
            Some(path) => {
                let bytes = fs::read(path)
                    .with_context(|| format!("reading membership {}", path.display()))?;
                manifest.add_input(path, &bytes, ctx.root.as_deref());
                Some(
                    load_membership(bytes.as_slice(), &loaded.population)
                        .with_context(|| format!("loading {}", path.display()))?,
                )
            }
            None => loaded.membership,
        };
        Ok((loaded.population, membership))
    }

    fn load_with_membership(
        &self,
        manifest: &mut RunManifest,
        ctx: &Ctx,
    ) -> Result<(Population, SampleMembership)> {
        match self.load(manifest, ctx)? {
            (pop, Some(m)) => Ok((pop, m)),
            (_, None) => bail!(
                "{} has no `sampled` column; add one or pass --membership",
                self.population.display()
            ),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: PopulationArgs,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn cmd_diagnose(args: &DiagnoseArgs, ctx: &Ctx) -> Result<()> {
    let mut manifest = RunManifest::new("diagnose", args.input.describe(), None);
    let (pop, m) = args.input.load_with_membership(&mut manifest, ctx)?;
    let d = diagnose(&pop, &m)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("diagnostics.json"), &d)?;
    manifest.finish(&args.out, &["diagnostics.json"])?;
    ctx.say(report::diagnostics_summary(&d));
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub input: PopulationArgs,
    /// Experiment configuration (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured number of replicates
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Overrides the configured confidence level
    #[arg(long)]
    pub ci_level: Option<f64>,
}

pub fn cmd_coverage(args: &CoverageArgs, ctx: &Ctx) -> Result<()> {
    let text = fs::read(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_slice(&text)
        .with_context(|| format!("parsing config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(level) = args.ci_level {
        cfg.ci_level = level;
    }
    cfg.validate()?;

    let mut manifest = RunManifest::new(
        "coverage",
        json!({ "experiment": cfg, "input": args.input.describe() }),
        Some(cfg.master_seed),
    );
    manifest.add_input(&args.config, &text, ctx.root.as_deref());
    let (pop, _) = args.input.load(&mut manifest, ctx)?;
    let result = run_experiment(&pop, &cfg)?;

    create_dir(&args.out)?;
    write_json(&args.out.join("coverage.json"), &result)?;
    export_distributions(&result, &args.out)?;
    manifest.finish(
        &args.out,
        &["coverage.json", "replicates.csv", "histogram.csv"],
    )?;
    ctx.say(report::coverage_summary(&result));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Hajek,
    HorvitzThompson,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Hajek => Normalization::Hajek,
            NormalizationArg::HorvitzThompson => Normalization::HorvitzThompson,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MitigateArgs {
    #[command(flatten)]
    pub input: PopulationArgs,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Convergence tolerance on the gradient max-norm
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "hajek")]
    pub normalization: NormalizationArg,
    /// Upper bound on raw weights
    #[arg(long)]
    pub cap: Option<f64>,
    /// Keep a fit that hit the iteration limit instead of exiting with status 4
    #[arg(long)]
    pub allow_unconverged: bool,
    /// Weight by the true inclusion rates of the two y-strata instead of a fitted model
    #[arg(long)]
    pub true_strata: bool,
}

pub fn cmd_mitigate(args: &MitigateArgs, ctx: &Ctx) -> Result<()> {
    let options = WeightingOptions {
        normalization: args.normalization.into(),
        cap: args.cap,
    };
    let config = json!({
        "input": args.input.describe(),
        "ridge": args.ridge,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "normalization": options.normalization,
        "cap": args.cap,
        "allow_unconverged": args.allow_unconverged,
        "true_strata": args.true_strata,
    });
    let mut manifest = RunManifest::new("mitigate", config, None);
    let (pop, m) = args.input.load_with_membership(&mut manifest, ctx)?;

    let report = if args.true_strata {
        evaluate_true_stratum_weights(&pop, &m, &options)?
    } else {
        let fit = FitOptions {
            ridge: args.ridge,
            tol: args.tol,
            max_iter: args.max_iter,
        };
        let model = fit_propensity(&pop, &m, &fit)?;
        if !model.converged && !args.allow_unconverged {
            return Err(Unconverged {
                iterations: model.iterations,
                gradient_norm: model.gradient_norm,
            }
            .into());
        }
        evaluate_mitigation(&pop, &m, &model, &options)?
    };

    create_dir(&args.out)?;
    write_json(&args.out.join("mitigation.json"), &report)?;
    manifest.finish(&args.out, &["mitigation.json"])?;
    ctx.say(report::mitigation_summary(&report));
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct RegridArgs {
    #[command(flatten)]
    pub input: PopulationArgs,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregation factors, e.g. `1,10`
    #[arg(long, value_delimiter = ',', required = true)]
    pub factors: Vec<u32>,
    /// Name of the input resolution
    #[arg(long, default_value = "fine")]
    pub label: String,
}

pub fn cmd_regrid(args: &RegridArgs, ctx: &Ctx) -> Result<()> {
    if let Some(bad) = args.factors.iter().find(|&&k| k == 0) {
        bail!("aggregation factor must be at least 1, got {bad}");
    }
    let config = json!({
        "input": args.input.describe(),
        "factors": args.factors,
        "label": args.label,
    });
    let mut manifest = RunManifest::new("regrid", config, None);
    let (pop, m) = args.input.load_with_membership(&mut manifest, ctx)?;
    let grid = GridPopulation::new(pop, args.label.clone())?;
    let rows = diagnostics_by_resolution(&grid, &m, &args.factors)?;

    create_dir(&args.out)?;
    let path = args.out.join("by_resolution.csv");
    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    write_resolution_csv(BufWriter::new(file), &rows)?;
    manifest.finish(&args.out, &["by_resolution.csv"])?;
    ctx.say(report::resolution_summary(&rows));
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of earlier runs
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_report(args: &ReportArgs, ctx: &Ctx) -> Result<()> {
    let text = report::render(&args.dirs)?;
    match &args.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            ctx.say(text.trim_end());
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    /// Gridded heather occupancy with the targeted recorded sample
    Calluna,
    /// Same population, recording confined to a subset of 10-cell blocks
    CallunaClustered,
    /// N = 50,000 with logistic selection on one covariate
    Logistic,
    /// Logistic selection at heather scale
    LogisticLarge,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    #[arg(long, value_enum)]
    pub kind: FixtureKind,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
}

pub fn cmd_fixture(args: &FixtureArgs, ctx: &Ctx) -> Result<()> {
    let (pop, m) = match args.kind {
        FixtureKind::Calluna => {
            let pop = fixtures::calluna_population();
            let m = fixtures::calluna_sample(&pop, args.seed)?;
            (pop, m)
        }
        FixtureKind::CallunaClustered => {
            let pop = fixtures::calluna_population();
            let m = fixtures::calluna_clustered_sample(&pop, args.seed)?;
            (pop, m)
        }
        FixtureKind::Logistic => LogisticSelection::standard(args.seed).generate(),
        FixtureKind::LogisticLarge => LogisticSelection::calluna_scale(args.seed).generate(),
    };
    write_table(&args.out, |w| write_population(w, &pop, Some(&m)))?;
    ctx.say(format!(
        "wrote {} ({} units, {} sampled)",
        args.out.display(),
        pop.len(),
        m.n()
    ));
    Ok(())
}

fn write_table(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> sampledefect_core::Result<()>,
) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// Output directory for the whole pipeline
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the recorded sample and master seed for both coverage runs
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
    /// Overrides the replicate count of both coverage runs
    #[arg(long)]
    pub replicates: Option<usize>,
}

/// Heather fixture through diagnose, both coverage designs, mitigation,
/// regridding and the combined report.
pub fn cmd_reproduce(args: &ReproduceArgs, ctx: &Ctx) -> Result<()> {
    let out = &args.out;
    create_dir(out)?;
    let stage = Ctx {
        quiet: true,
        root: Some(out.clone()),
    };

    let pop = fixtures::calluna_population();
    let recorded = fixtures::calluna_sample(&pop, args.seed)?;
    let clustered = fixtures::calluna_clustered_sample(&pop, args.seed)?;
    let population = out.join("population.csv");
    let clustered_path = out.join("clustered_membership.csv");
    write_table(&population, |w| write_population(w, &pop, Some(&recorded)))?;
    write_table(&clustered_path, |w| write_membership(w, &pop, &clustered))?;
    drop(pop);

    let configs = out.join("configs");
    create_dir(&configs)?;
    fs::write(configs.join("box2_srs.json"), SRS_CONFIG)?;
    fs::write(configs.join("box2_biased.json"), BIASED_CONFIG)?;

    let input = PopulationArgs::at(population.clone());
    cmd_diagnose(
        &DiagnoseArgs {
            input: input.clone(),
            out: out.join("diagnose"),
        },
        &stage,
    )?;
    for (name, config) in [("srs", "box2_srs.json"), ("biased", "box2_biased.json")] {
        cmd_coverage(
            &CoverageArgs {
                input: input.clone(),
                config: configs.join(config),
                out: out.join(format!("coverage-{name}")),
                seed: Some(args.seed),
                replicates: args.replicates,
                ci_level: None,
            },
            &stage,
        )?;
    }
    cmd_mitigate(
        &MitigateArgs {
            input: input.clone(),
            out: out.join("mitigate"),
            ridge: DEFAULT_RIDGE,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            normalization: NormalizationArg::Hajek,
            cap: None,
            allow_unconverged: false,
            true_strata: false,
        },
        &stage,
    )?;
    cmd_regrid(
        &RegridArgs {
            input: PopulationArgs {
                membership: Some(clustered_path),
                ..input
            },
            out: out.join("regrid"),
            factors: vec![1, 10],
            label: "1 km".into(),
        },
        &stage,
    )?;

    let text = report::render(&[out.clone()])?;
    fs::write(out.join("report.md"), &text)?;
    let manifest = RunManifest::new(
        "reproduce-paper",
        json!({ "seed": args.seed, "replicates": args.replicates }),
        Some(args.seed),
    );
    manifest.finish(
        out,
        &[
            "population.csv",
            "clustered_membership.csv",
            "configs/box2_srs.json",
            "configs/box2_biased.json",
            "report.md",
        ],
    )?;
    ctx.say(text.trim_end());
    Ok(())
}
