use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod runlog;

use args::{Cli, Command, DEFAULT_SEED};
use commands::Ctx;
use nfp_core::Error;

/// Exit status and error class for the first library error in the chain.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
    match core {
        Some(Error::Config(_)) => (2, "config"),
        Some(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
            (3, "missing_input")
        }
        Some(Error::Backend(_) | Error::DimensionMismatch { .. } | Error::NonFinite(_)) => {
            (4, "backend")
        }
        _ => (1, "error"),
    }
}

fn run(cli: &Cli, ctx: &Ctx) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest(ctx, a),
        Command::Embed(a) => commands::embed(ctx, a),
        Command::Novelty(a) => commands::novelty(ctx, a),
        Command::Features(a) => commands::features(ctx, a),
        Command::Fingerprint(a) => commands::fingerprint(ctx, a),
        Command::Attribute(a) => commands::attribute(ctx, a),
        Command::Windows(a) => commands::windows(ctx, a),
        Command::Cluster(a) => commands::cluster(ctx, a),
        Command::Synth(a) => commands::synth(ctx, a),
        Command::Report(a) => commands::report(ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or_else(|| {
        log::warn!("no --seed given; using {DEFAULT_SEED}");
        DEFAULT_SEED
    });
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("nfp:error:config: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx {
        seed,
        threads: pool.current_num_threads(),
    };
    match pool.install(|| run(&cli, &ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class) = classify(&e);
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            let msg = msg.replace('\n', " ");
            eprintln!("nfp:error:{class}: {msg}");
            ExitCode::from(code)
        }
    }
}
