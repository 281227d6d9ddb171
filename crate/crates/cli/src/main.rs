use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

mod config;
mod run;

use config::Mode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Asymptotic,
    Oracle,
    Compare,
    Profile,
    Rays,
}

/// Asymptotic and finite-difference solutions of the 2D wave equation with a
/// localized, decaying source.
#[derive(Parser, Debug)]
#[command(name = "raywave", version)]
struct Cli {
    mode: ModeArg,
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides RAYWAVE_OUT and [output] dir)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.mode {
        ModeArg::Asymptotic => Mode::Asymptotic,
        ModeArg::Oracle => Mode::Oracle,
        ModeArg::Compare => Mode::Compare,
        ModeArg::Profile => Mode::Profile,
        ModeArg::Rays => Mode::Rays,
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match config::load(&cli.config, mode) {
        Ok(c) => c,
        Err(e) => {
            match e.line {
                Some(l) => eprintln!("error: {}:{l}: {}", cli.config.display(), e.msg),
                None => eprintln!("error: {}: {}", cli.config.display(), e.msg),
            }
            return ExitCode::from(2);
        }
    };
    let out = run::output_dir(cli.out, &cfg);
    let mut log = run::RunLog::new();
    log.note(format!("mode {:?}, config {}, threads {}", mode, cli.config.display(), rayon::current_num_threads()));
    let result = run::execute(&cfg, &out, &mut log);
    if let Err(e) = &result {
        log.note(format!("failed: {e}"));
    } else {
        log.note("done");
    }
    if let Err(e) = log.write(&out) {
        eprintln!("warning: cannot write run.log: {e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
