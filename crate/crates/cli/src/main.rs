//! `fairauction`: single auctions, experiment grids, score training and
//! mechanism audits.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible or no
//! solution, 4 property violation, 5 training diverged.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunAuction(a) => commands::run_auction(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::TrainScores(a) => commands::train_scores(a),
        Command::VerifyIc(a) => commands::verify_ic(a),
        Command::VerifyFairness(a) => commands::verify_fairness(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fairauction: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl From<fair_auction::AuctionError> for CliError {
    fn from(e: fair_auction::AuctionError) -> Self {
        CliError::Auction(e)
    }
}
