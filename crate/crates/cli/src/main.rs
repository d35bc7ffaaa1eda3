mod args;
mod commands;
mod dataset;
mod png;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, CmfCommand, Command, DatasetCommand, DeconvCommand, ErrorCommand, KernelsCommand, MetricsCommand};

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cmf(CmfCommand::Build(a)) => commands::cmf_build(&a),
        Command::Cmf(CmfCommand::Inspect { file }) => commands::cmf_inspect(&file),
        Command::Error(ErrorCommand::Inject {
            gyro,
            out,
            seed,
            noise_model,
        }) => commands::error_inject(&gyro, &out, seed, noise_model.as_deref()),
        Command::Dataset(DatasetCommand::Synth(a)) => dataset::synth(&a),
        Command::Kernels(KernelsCommand::Render(a)) => commands::kernels_render(&a),
        Command::Deconv(DeconvCommand::Run(a)) => commands::deconv_run(&a),
        Command::Metrics(MetricsCommand::Eval { pred, gt, out, summary }) => {
            commands::metrics_eval(&pred, &gt, out.as_deref(), summary.as_deref())
        }
    }
}

/// One JSON object on stderr: `{"error": code, "message": text}`.
fn report(err: &anyhow::Error) {
    let code = err
        .chain()
        .find_map(|e| e.downcast_ref::<gyroblur_core::Error>())
        .map_or("failed", |e| e.code());
    let message = err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ");
    eprintln!("{}", serde_json::json!({ "error": code, "message": message }));
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
