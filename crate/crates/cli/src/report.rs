//! Human-readable summaries. All rounding of numbers happens here.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

use sampledefect_core::grid::ResolutionRow;
use sampledefect_core::mitigation::MitigationReport;
use sampledefect_core::montecarlo::{normal_quantile, CoverageResult};
use sampledefect_core::{DefectDiagnostics, SamplerSpec};

pub fn verdict(d: &DefectDiagnostics) -> String {
    format!(
        "effective sample size: {} of {} ({:.2}% reduction)",
        d.reported_n_eff(),
        d.n,
        100.0 * d.relative_reduction
    )
}

pub fn z_statement(d: &DefectDiagnostics) -> String {
    let nominal = normal_quantile(0.95).expect("valid level");
    format!(
        "required z: {:.2}; a 95% interval around the sample mean would need z = {:.2} \
         instead of {:.2} to cover the population mean",
        d.required_z, d.required_z, nominal
    )
}

pub fn diagnostics_summary(d: &DefectDiagnostics) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "population    N = {}, mean = {:.5}",
        d.population_size, d.population_mean
    );
    let _ = writeln!(
        s,
        "sample        n = {} (f = {:.5}), mean = {:.5}",
        d.n, d.f, d.sample_mean
    );
    let _ = writeln!(
        s,
        "error         {:+.5} = rho {:+.5} x dropout {:.4} x sd {:.5}",
        d.actual_error, d.rho, d.dropout_factor, d.sigma_y
    );
    let clamp = if d.n_eff_clamped {
        " (capped at N)"
    } else {
        ""
    };
    let _ = writeln!(s, "n_eff         {:.3}{clamp}", d.n_eff);
    let _ = writeln!(s, "{}", verdict(d));
    let _ = write!(s, "{}", z_statement(d));
    s
}

fn design(spec: &SamplerSpec) -> String {
    match *spec {
        SamplerSpec::Srs { n, .. } => format!("simple random sample, n = {n}"),
        SamplerSpec::TargetedRho { n, target_rho, .. } => {
            format!("targeted rho = {target_rho}, n = {n}")
        }
    }
}

pub fn coverage_summary(r: &CoverageResult) -> String {
    format!(
        "{}: {:.1}% of {} nominal {:.0}% intervals cover the population mean {:.5}; \
         mean estimate {:.5}, mse {:.6}",
        design(&r.sampler),
        100.0 * r.coverage,
        r.replicates,
        100.0 * r.ci_level,
        r.true_mean,
        r.mean_estimate,
        r.mse
    )
}

pub fn mitigation_summary(r: &MitigationReport) -> String {
    let mut s = format!(
        "unweighted {:.5} -> weighted {:.5}",
        r.unweighted_estimate, r.weighted_estimate
    );
    if let (Some(t), Some(pct)) = (r.true_mean, r.bias_reduction_pct) {
        let _ = write!(s, " (population mean {t:.5}; bias reduced by {pct:.1}%)");
    }
    if let Some(m) = &r.model {
        let state = if m.converged {
            "converged"
        } else {
            "NOT converged"
        };
        let _ = write!(
            s,
            "\npropensity model {state} in {} iterations",
            m.iterations
        );
    }
    s
}

pub fn resolution_summary(rows: &[ResolutionRow]) -> String {
    let mut s = String::from("factor        N        n        f       rho     n_eff");
    for row in rows {
        let _ = write!(
            s,
            "\n{:>6} {:>8} {:>8} {:>8.5}",
            row.factor, row.population_size, row.n, row.f
        );
        match &row.diagnostics {
            Some(d) => {
                let _ = write!(s, " {:>+9.5} {:>9.2}", d.rho, d.n_eff);
            }
            None => {
                let _ = write!(s, "  {}", row.status);
            }
        }
    }
    s
}

#[derive(Default)]
struct Findings {
    diagnostics: Vec<DefectDiagnostics>,
    coverage: Vec<CoverageResult>,
    mitigation: Vec<MitigationReport>,
    resolution: Vec<Vec<csv::StringRecord>>,
}

impl Findings {
    fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
            && self.coverage.is_empty()
            && self.mitigation.is_empty()
            && self.resolution.is_empty()
    }

    fn collect(&mut self, dir: &Path) -> Result<()> {
        if let Some(d) = read_json(&dir.join("diagnostics.json"))? {
            self.diagnostics.push(d);
        }
        if let Some(c) = read_json(&dir.join("coverage.json"))? {
            self.coverage.push(c);
        }
        if let Some(m) = read_json(&dir.join("mitigation.json"))? {
            self.mitigation.push(m);
        }
        let table = dir.join("by_resolution.csv");
        if table.is_file() {
            let mut reader = csv::Reader::from_path(&table)
                .with_context(|| format!("reading {}", table.display()))?;
            let rows = reader.records().collect::<Result<Vec<_>, _>>()?;
            self.resolution.push(rows);
        }
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let value =
        serde_json::from_slice(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(value))
}

/// Each directory and its immediate subdirectories, in name order.
fn search_dirs(dirs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for dir in dirs {
        if !dir.is_dir() {
            bail!("{} is not a directory", dir.display());
        }
        out.push(dir.clone());
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        out.extend(subdirs);
    }
    Ok(out)
}

pub fn render(dirs: &[PathBuf]) -> Result<String> {
    let mut found = Findings::default();
    for dir in search_dirs(dirs)? {
        found.collect(&dir)?;
    }
    if found.is_empty() {
        bail!("no result files found");
    }
    found
        .coverage
        .sort_by_key(|c| !matches!(c.sampler, SamplerSpec::Srs { .. }));

    let mut s = String::from("# Sampling defect report\n\n");
    if let Some(d) = found.diagnostics.first() {
        let _ = writeln!(s, "{}\n", verdict(d));
        let _ = writeln!(s, "{}.\n", z_statement(d));
        let _ = writeln!(
            s,
            "A simple random sample of {} units would estimate the mean about as well as these {} records.\n",
            d.reported_n_eff(),
            d.n
        );
    }

    for d in &found.diagnostics {
        s.push_str("## Diagnostics\n\n| quantity | value |\n|---|---|\n");
        let rows = [
            ("population size N", d.population_size.to_string()),
            ("sample size n", d.n.to_string()),
            ("sampling rate f", format!("{:.5}", d.f)),
            ("population mean", format!("{:.5}", d.population_mean)),
            ("sample mean", format!("{:.5}", d.sample_mean)),
            ("actual error", format!("{:+.5}", d.actual_error)),
            ("defect correlation rho", format!("{:+.5}", d.rho)),
            ("dropout factor", format!("{:.4}", d.dropout_factor)),
            ("sd of y", format!("{:.5}", d.sigma_y)),
            ("effective sample size", format!("{:.3}", d.n_eff)),
            ("required z", format!("{:.2}", d.required_z)),
            (
                "relative reduction",
                format!("{:.2}%", 100.0 * d.relative_reduction),
            ),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "| {k} | {v} |");
        }
        s.push('\n');
    }

    if !found.coverage.is_empty() {
        s.push_str("## Coverage\n\n");
        s.push_str(
            "| design | replicates | coverage | mean estimate | mse |\n|---|---|---|---|---|\n",
        );
        for c in &found.coverage {
            let _ = writeln!(
                s,
                "| {} | {} | {:.1}% | {:.5} | {:.6} |",
                design(&c.sampler),
                c.replicates,
                100.0 * c.coverage,
                c.mean_estimate,
                c.mse
            );
        }
        let _ = writeln!(
            s,
            "\nIntervals are nominal {:.0}% normal intervals; the population mean is {:.5}.\n",
            100.0 * found.coverage[0].ci_level,
            found.coverage[0].true_mean
        );
    }

    for m in &found.mitigation {
        s.push_str("## Weighting\n\n");
        let _ = writeln!(s, "{}\n", mitigation_summary(m));
        if let Some(model) = &m.model {
            let names =
                std::iter::once("intercept").chain(model.covariates.iter().map(String::as_str));
            s.push_str("| term | coefficient | std. error |\n|---|---|---|\n");
            for ((name, b), se) in names.zip(&model.coefficients).zip(&model.std_errors) {
                let _ = writeln!(s, "| {name} | {b:+.4} | {se:.4} |");
            }
            s.push('\n');
        }
        let w = &m.weights_summary;
        let _ = writeln!(
            s,
            "Weights: {} units, range {:.3} to {:.3}, cv {:.3}.\n",
            w.count, w.min, w.max, w.cv
        );
    }

    for table in &found.resolution {
        s.push_str("## Resolution\n\n| factor | N | n | f | rho | n_eff | status |\n|---|---|---|---|---|---|---|\n");
        for r in table {
            let num = |i: usize, digits: usize| {
                r.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .map_or(String::new(), |v| format!("{v:.digits$}"))
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.get(0).unwrap_or(""),
                r.get(1).unwrap_or(""),
                r.get(2).unwrap_or(""),
                num(3, 5),
                num(4, 5),
                num(5, 2),
                r.get(7).unwrap_or("")
            );
        }
        s.push('\n');
    }
    Ok(s)
}
