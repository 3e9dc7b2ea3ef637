mod commands;
mod dataset;
mod formats;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mtc", version, about = "Motion-type clip models: data, training, retrieval, playback styles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic five-class corpus onto disk
    Synthgen(commands::SynthgenArgs),
    /// Train the segment model (or the flow baseline) on a dataset directory
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on a labeled split
    Eval(commands::EvalArgs),
    /// Classify one clip
    Classify(commands::ClassifyArgs),
    /// Run clips through a trained model and write an MTFS feature store
    ExtractFeatures(commands::ExtractFeaturesArgs),
    /// k-nearest-neighbour query against a feature store
    Retrieve(commands::RetrieveArgs),
    /// Classify a clip and recommend a playback style
    Recommend(commands::RecommendArgs),
    /// Apply a playback style to a clip
    ApplyStyle(commands::ApplyStyleArgs),
    /// Print the MAC profile of a model configuration
    Macs(commands::MacsArgs),
    /// Run the finite-difference gradient suite
    Gradcheck(commands::GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synthgen(a) => commands::synthgen(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Classify(a) => commands::classify(a),
        Command::ExtractFeatures(a) => commands::extract_features(a),
        Command::Retrieve(a) => commands::retrieve(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::ApplyStyle(a) => commands::apply_style(a),
        Command::Macs(a) => commands::macs(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<commands::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
