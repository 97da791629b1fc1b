use std::process::ExitCode;

use clap::Parser;

mod cli;

use cli::commands::{self, Ctx};
use cli::io::CliError;
use cli::{Cli, Command};

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::Content("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Content(e.to_string()))?;
    }
    let mut ctx = Ctx::new(&cli.global)?;
    let ok = match &cli.command {
        Command::Validate { input, rows, cols } => {
            commands::validate(&mut ctx, input, *rows, *cols)?
        }
        Command::Align {
            input,
            rows,
            cols,
            grid_file,
            max_len,
            log,
        } => commands::align(
            &mut ctx,
            input,
            (*rows, *cols),
            grid_file.as_deref(),
            *max_len,
            log.as_deref(),
        )?,
        Command::Otsl2html { input } => commands::otsl2html(&mut ctx, input)?,
        Command::Html2otsl { input } => commands::html2otsl(&mut ctx, input)?,
        Command::Teds { gt, pred } => commands::teds(&mut ctx, gt, pred)?,
        Command::Grid { input, grid } => commands::grid(&mut ctx, input, grid)?,
        Command::Gridmetrics { pred, gt } => commands::gridmetrics(&mut ctx, pred, gt)?,
        Command::Stats {
            dataset,
            field,
            group_by,
        } => commands::stats(&mut ctx, dataset, field, group_by)?,
        Command::Eval {
            dataset,
            detections,
            grid,
            max_len,
            group_by,
            records_out,
        } => commands::eval(
            &mut ctx,
            dataset,
            detections.as_deref(),
            grid,
            *max_len,
            group_by,
            records_out.as_deref(),
        )?,
    };
    ctx.finish()?;
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("otslkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
