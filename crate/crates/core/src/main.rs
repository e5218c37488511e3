use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heavyloc::runner::{exit_code, run, ExperimentConfig};
use heavyloc::Error;

#[derive(Parser)]
#[command(
    name = "heavyloc",
    version,
    about = "Heavy-tailed Kronig-Penney experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a config and list every problem found.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, u8> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            Error::Io(_) => 3,
            _ => 2,
        }
    })
}

fn validate(config: &Path) -> u8 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let problems = cfg.validate();
    if problems.is_empty() {
        println!("ok");
        return 0;
    }
    for p in &problems {
        println!("{p}");
    }
    2
}

fn run_config(config: &Path, workers: Option<usize>, output_dir: Option<PathBuf>) -> u8 {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let result = run(&cfg);
    match &result {
        Ok(report) => {
            eprintln!(
                "wrote {} rows to {}",
                report.rows,
                report.output_dir.display()
            );
            for f in &report.failures {
                eprintln!(
                    "task failed (combo {}, seed {}, alpha {}, energy {}, n {}): {}",
                    f.combo, f.seed, f.alpha, f.energy, f.n, f.message
                );
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result) as u8
}

/// Parse `args` and execute the command; returns the process exit code.
fn cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run {
            config,
            workers,
            output_dir,
        } => run_config(&config, workers, output_dir),
    }
}

fn main() -> ExitCode {
    ExitCode::from(cli(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const IDS: &str = r#"{"experiment":"ids","model":"III","alpha_grid":[0.5],"energy_grid":[1.0],
        "n_grid":[10000],"n_seeds":50,"master_seed":3,"output_dir":"unused"}"#;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("config.json");
        fs::write(&p, text).unwrap();
        p
    }

    fn validate_text(text: &str) -> u8 {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), text);
        cli(["heavyloc".as_ref(), "validate".as_ref(), p.as_os_str()])
    }

    #[test]
    fn validate_exit_codes() {
        assert_eq!(validate_text(IDS), 0);
        assert_eq!(validate_text(&IDS.replace("[0.5]", "[1.2]")), 2);
        assert_eq!(validate_text(&IDS.replace("\"energy_grid\":[1.0]", "\"energy_grid\":[]")), 2);
        let model1 = IDS
            .replace("\"III\"", "\"I\"")
            .replace("\"energy_grid\":[1.0]", "\"energy_grid\":[-1.0]");
        assert_eq!(validate_text(&model1), 2);
        assert_eq!(validate_text("{not json"), 2);
        assert_eq!(cli(["heavyloc", "validate", "/nonexistent/config.json"]), 3);
        assert_eq!(cli(["heavyloc", "bogus"]), 2);
    }

    #[test]
    fn run_writes_outputs_and_recovers_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), IDS);
        let out = dir.path().join("out");
        let code = cli([
            "heavyloc".as_ref(),
            "run".as_ref(),
            p.as_os_str(),
            "--output-dir".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, 0);
        for f in ["results.csv", "summary.json", "manifest.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let csv = fs::read_to_string(out.join("results.csv")).unwrap();
        assert!(csv.starts_with("experiment,model,alpha,energy,n,seed,observable,value\n"));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        let ids = summary["observables"]
            .as_array()
            .unwrap()
            .iter()
            .find(|o| o["observable"] == "ids_x")
            .unwrap();
        let median = ids["median"].as_f64().unwrap();
        let expected = 1.0 / std::f64::consts::PI;
        assert!((median / expected - 1.0).abs() < 0.02, "{median}");
    }
}
