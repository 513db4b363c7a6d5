//! Command-line surface of the event-based hidden Markov model.
//!
//! Every command reads a [`RunConfig`], folds its flags into it, and
//! stamps its artifacts with the SHA-256 of the result plus the seed, so
//! a rerun with the same inputs reproduces them byte for byte.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;

pub use args::{Cli, Command};
pub use config::RunConfig;
pub use error::CliError;

use commands::Context;

/// Config file (if any) with the command-line flags applied on top.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Fit(a) => {
            if let Some(k) = a.model_kind {
                cfg.model_kind = k;
            }
        }
        Command::Stage(a) => {
            if let Some(h) = a.horizon {
                cfg.prediction_horizon_months = h;
            }
        }
        Command::Predict(a) => {
            if let Some(h) = a.horizon {
                cfg.prediction_horizon_months = h;
            }
        }
        Command::Simulate(a) => {
            if let Some(n) = a.n {
                cfg.simulate.n_individuals = n;
            }
        }
        Command::Evaluate(a) => {
            if let Some(k) = a.folds {
                cfg.eval.folds = k;
            }
        }
        Command::Ablate(a) => {
            if let Some(k) = a.folds {
                cfg.eval.folds = k;
            }
            if let Some(f) = &a.fractions {
                cfg.eval.fractions = f.clone();
            }
        }
        Command::Timeline(_) => {}
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Context::new(effective_config(cli)?)?;
    match &cli.command {
        Command::Fit(a) => commands::fit_cmd(&ctx, a, stdout),
        Command::Stage(a) => commands::stage_cmd(&ctx, a, stdout),
        Command::Predict(a) => commands::predict_cmd(&ctx, a, stdout),
        Command::Timeline(a) => commands::timeline_cmd(&ctx, a, stdout),
        Command::Simulate(a) => commands::simulate_cmd(&ctx, a, stdout),
        Command::Evaluate(a) => commands::evaluate_cmd(&ctx, a, stdout),
        Command::Ablate(a) => commands::ablate_cmd(&ctx, a, stdout),
    }
}
