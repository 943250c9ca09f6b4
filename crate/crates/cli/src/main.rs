//! `sampledefect`: defect diagnostics and simulation for samples of a
//! known finite population.
//!
//! Exit status: 0 success, 2 input or configuration error, 3 degenerate
//! statistics, 4 propensity model did not converge.

mod commands;
mod manifest;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sampledefect_core::ErrorClass;

use commands::{
    CoverageArgs, Ctx, DiagnoseArgs, FixtureArgs, MitigateArgs, RegridArgs, ReportArgs,
    ReproduceArgs, Unconverged,
};

#[derive(Debug, Parser)]
#[command(name = "sampledefect", version, about)]
struct Cli {
    /// Suppress printed summaries
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Defect correlation and effective sample size for one sample
    Diagnose(DiagnoseArgs),
    /// Replicated interval coverage and MSE for a sampling design
    Coverage(CoverageArgs),
    /// Propensity weighting and its effect on the estimate
    Mitigate(MitigateArgs),
    /// Diagnostics after coarsening a gridded population
    Regrid(RegridArgs),
    /// Combined summary of earlier output directories
    Report(ReportArgs),
    /// Heather fixture through every stage, with the combined report
    ReproducePaper(ReproduceArgs),
    /// Write a synthetic population table
    Fixture(FixtureArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sampledefect_core::Error>() {
            return match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Degenerate => 3,
            };
        }
        if cause.is::<Unconverged>() {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        quiet: cli.quiet,
        root: None,
    };
    let result = match &cli.command {
        Command::Diagnose(a) => commands::cmd_diagnose(a, &ctx),
        Command::Coverage(a) => commands::cmd_coverage(a, &ctx),
        Command::Mitigate(a) => commands::cmd_mitigate(a, &ctx),
        Command::Regrid(a) => commands::cmd_regrid(a, &ctx),
        Command::Report(a) => commands::cmd_report(a, &ctx),
        Command::ReproducePaper(a) => commands::cmd_reproduce(a, &ctx),
        Command::Fixture(a) => commands::cmd_fixture(a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let degenerate = anyhow::Error::from(sampledefect_core::Error::ConstantStudyVariable);
        assert_eq!(exit_code(&degenerate.context("diagnosing")), 3);
        let input = anyhow::Error::from(sampledefect_core::Error::MissingCovariates);
        assert_eq!(exit_code(&input), 2);
        let stuck = anyhow::Error::from(Unconverged {
            iterations: 3,
            gradient_norm: 1.0,
        });
        assert_eq!(exit_code(&stuck), 4);
        assert_eq!(exit_code(&anyhow::anyhow!("anything else")), 2);
    }
}
