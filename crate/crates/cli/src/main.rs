mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, FromArgMatches};
use serde_json::Value;

use crate::args::{Cli, Command};
use crate::commands::Run;
use crate::manifest::{apply_overlay, load_overlay, RunManifest};

fn execute(command: &Command, cli: &Cli) -> Result<()> {
    if let Command::Serve(a) = command {
        return commands::serve(a);
    }
    if let Command::Replay(a) = command {
        let m = RunManifest::read(&a.manifest)?;
        let replayed = rebuild(&m.command, m.config)?;
        return execute(&replayed, cli);
    }
    let config: Value = match command {
        Command::GenBev(a) => serde_json::to_value(a)?,
        Command::Render(a) => serde_json::to_value(a)?,
        Command::Traverse(a) | Command::Stitch(a) => serde_json::to_value(a)?,
        Command::Eqt(a) => serde_json::to_value(a)?,
        Command::Ablate(a) => serde_json::to_value(a)?,
        Command::InitWeights(a) => serde_json::to_value(a)?,
        Command::Serve(_) | Command::Replay(_) => unreachable!(),
    };
    let mut run = Run::new(&cli.out, RunManifest::new(command.name(), &config, cli.threads)?)?;
    match command {
        Command::GenBev(a) => commands::gen_bev(a, &mut run)?,
        Command::Render(a) => commands::render_cmd(a, &mut run)?,
        Command::Traverse(a) => commands::stitch_cmd(a, false, &mut run)?,
        Command::Stitch(a) => commands::stitch_cmd(a, true, &mut run)?,
        Command::Eqt(a) => commands::eqt_cmd(a, &mut run)?,
        Command::Ablate(a) => commands::ablate_cmd(a, &mut run)?,
        Command::InitWeights(a) => commands::init_weights(a, &mut run)?,
        Command::Serve(_) | Command::Replay(_) => unreachable!(),
    }
    run.finish()
}

/// The command a manifest describes, with every flag taken from its config.
fn rebuild(name: &str, config: Value) -> Result<Command> {
    let bad = || format!("manifest config does not fit `{name}`");
    Ok(match name {
        "gen-bev" => Command::GenBev(serde_json::from_value(config).with_context(bad)?),
        "render" => Command::Render(serde_json::from_value(config).with_context(bad)?),
        "traverse" => Command::Traverse(serde_json::from_value(config).with_context(bad)?),
        "stitch" => Command::Stitch(serde_json::from_value(config).with_context(bad)?),
        "eqt" => Command::Eqt(serde_json::from_value(config).with_context(bad)?),
        "ablate" => Command::Ablate(serde_json::from_value(config).with_context(bad)?),
        "init-weights" => Command::InitWeights(serde_json::from_value(config).with_context(bad)?),
        other => anyhow::bail!("manifest command `{other}` cannot be replayed"),
    })
}

fn resolve(mut cli: Cli, matches: &clap::ArgMatches) -> Result<Cli> {
    let Some(path) = &cli.config else { return Ok(cli) };
    let (_, sub) = matches.subcommand().context("missing subcommand")?;
    let overlay = load_overlay(path, cli.command.name())?;
    cli.command = match &cli.command {
        Command::GenBev(a) => Command::GenBev(apply_overlay(a, sub, &overlay)?),
        Command::Render(a) => Command::Render(apply_overlay(a, sub, &overlay)?),
        Command::Traverse(a) => Command::Traverse(apply_overlay(a, sub, &overlay)?),
        Command::Stitch(a) => Command::Stitch(apply_overlay(a, sub, &overlay)?),
        Command::Eqt(a) => Command::Eqt(apply_overlay(a, sub, &overlay)?),
        Command::Ablate(a) => Command::Ablate(apply_overlay(a, sub, &overlay)?),
        Command::InitWeights(a) => Command::InitWeights(apply_overlay(a, sub, &overlay)?),
        Command::Serve(a) => Command::Serve(apply_overlay(a, sub, &overlay)?),
        Command::Replay(_) => anyhow::bail!("replay takes no --config"),
    };
    Ok(cli)
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let result = Cli::from_arg_matches(&matches).map_err(anyhow::Error::from).and_then(|cli| {
        let cli = resolve(cli, &matches)?;
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
        }
        execute(&cli.command, &cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
