mod config;
mod plot;
mod run;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use choquard::Error;
use config::{Command, Flags, RunConfig};

/// Cayley-graph truncations, discrete Riesz kernels, functional inequalities
/// and Choquard ground states.
#[derive(Parser, Debug)]
#[command(name = "choquard", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Cap { .. } => 2,
        Error::Numerical(_) | Error::Cache(_) => 3,
        Error::Invalid(_) | Error::DomainMismatch(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
    }
}

fn write_manifest(config: &RunConfig, started: Instant, code: u8, body: Value) -> std::io::Result<()> {
    let mut doc = json!({
        "config": config,
        "versions": {
            "choquard": env!("CARGO_PKG_VERSION"),
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
        },
        "wall_time_s": started.elapsed().as_secs_f64(),
        "exit_code": code,
    });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join("manifest.json");
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("manifest serializes"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match RunConfig::resolve(cli.command, &cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let (code, body) = match run::run(&config) {
        Ok(out) => {
            let base = config.out_dir.as_path();
            let artifacts: Vec<String> = out.artifacts.iter().map(|p| run::relative(p, base)).collect();
            println!("{}", serde_json::to_string(&out.summary).expect("summary serializes"));
            (0, json!({ "seeds": out.seeds, "artifacts": artifacts, "summary": out.summary }))
        }
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code(&e), json!({ "seeds": [config.seed], "error": e.to_string() }))
        }
    };
    if let Err(e) = write_manifest(&config, started, code, body) {
        eprintln!("error: cannot write manifest in {}: {e}", Path::new(&config.out_dir).display());
        return ExitCode::from(if code == 0 { 1 } else { code });
    }
    ExitCode::from(code)
}
