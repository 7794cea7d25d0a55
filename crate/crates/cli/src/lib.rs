//! Command-line front end: `train`, `score`, `roc`, `perturb`, `experiment`.

pub mod args;
pub mod commands;
pub mod data;
pub mod experiment;
pub mod table;

use anyhow::Result;
use serde_json::Value;

use args::{Cli, Command};

/// Runs one command and returns its JSON status.
pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Roc(a) => commands::roc_command(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Experiment(a) => experiment::run(&a.config, &a.out),
    }
}
