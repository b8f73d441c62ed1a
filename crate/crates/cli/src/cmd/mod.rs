mod classify;
mod corpus;
mod lr_curve;
mod pipeline;
mod plan;
mod sample;

use anyhow::Result;
use clap::Subcommand;

pub struct Ctx {
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Document, token, source and score counts.
    Stats(corpus::StatsArgs),
    /// MinHash near-duplicate removal.
    Dedup(corpus::DedupArgs),
    /// Remove documents that overlap benchmark items.
    Decontam(corpus::DecontamArgs),
    /// Keep documents whose score bucket meets a threshold.
    Filter(corpus::FilterArgs),
    /// Train the hashed n-gram quality classifier.
    ClassifyTrain(classify::TrainArgs),
    /// Score documents with a trained classifier.
    ClassifyScore(classify::ScoreArgs),
    /// Validate a mixture plan and print epoch tables.
    Plan(plan::PlanArgs),
    /// Print a learning-rate curve as delimited rows.
    LrCurve(lr_curve::LrCurveArgs),
    /// Sample a document stream that realizes one stage.
    Sample(sample::SampleArgs),
    /// Run a sequence of subcommands from a config file.
    Pipeline(pipeline::PipelineArgs),
}

pub fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Stats(a) => corpus::stats(ctx, &a),
        Command::Dedup(a) => corpus::dedup(ctx, &a),
        Command::Decontam(a) => corpus::decontam(ctx, &a),
        Command::Filter(a) => corpus::filter(ctx, &a),
        Command::ClassifyTrain(a) => classify::train(ctx, &a),
        Command::ClassifyScore(a) => classify::score(ctx, &a),
        Command::Plan(a) => plan::run(ctx, &a),
        Command::LrCurve(a) => lr_curve::run(ctx, &a),
        Command::Sample(a) => sample::run(ctx, &a),
        Command::Pipeline(a) => pipeline::run(ctx, &a),
    }
}
