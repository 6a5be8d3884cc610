use std::process::ExitCode;

use clap::Parser;
use sensiloop_core::gsa::GsaOptions;
use sensiloop_service::cli::{
    evaluate_command, explain_command, format_explanation, gsa_command, run_command, Cli, CliError, Command,
};
use sensiloop_service::{router, AppState, ServiceConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Serve { port, data_dir, conflict } => serve(port, ServiceConfig { conflict, data_dir, seed }),
        Command::Run { config, out } => {
            println!("{}", run_command(&config, &out, cli.seed)?);
            Ok(())
        }
        Command::Gsa { model, data, split, out, samples, interference, resamples } => {
            let options = GsaOptions { samples_per_curve: samples, interference, seed, resamples };
            for w in gsa_command(&model, &data, &split, &out, options)? {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Explain { model, data, sample, method, split, target, format } => {
            let e = explain_command(&model, &data, sample, method, &split, target, seed)?;
            print!("{}", format_explanation(&e, format));
            Ok(())
        }
        Command::Evaluate { models_dir, data, split, loss } => {
            print!("{}", evaluate_command(&models_dir, &data, &split, &loss, seed)?);
            Ok(())
        }
    }
}

fn serve(port: u16, config: ServiceConfig) -> Result<(), CliError> {
    let fail = |stage: &'static str| move |e: std::io::Error| CliError { stage, message: e.to_string() };
    let state = AppState::new(config).map_err(fail("serve"))?;
    let rt = tokio::runtime::Runtime::new().map_err(fail("serve"))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(fail("serve"))?;
        eprintln!("listening on http://{}/api/v1", listener.local_addr().map_err(fail("serve"))?);
        axum::serve(listener, router(state)).await.map_err(fail("serve"))
    })
}
