use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reeb_gdnf::emit::{to_json, Manifest};
use reeb_gdnf::report::{run, Command, ExitStatus};
use reeb_gdnf::spec_file::{all_fixtures, fixture, AnalysisSpec};

/// Reeb graphs of the height function on strips between two curves.
#[derive(Parser)]
#[command(name = "reeb-gdnf", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Windowed pre-digraph with events and critical points.
    Analyze(RunArgs),
    /// Simplified NF diagram, pattern label and stability certificate.
    Classify(RunArgs),
    /// Close the ends at the poles and compare diagrams before and after.
    Compactify(RunArgs),
    /// Compare the sweep against the dense-sampling oracle.
    Check(RunArgs),
    /// SVG of the strip with critical and NF levels.
    Render(RunArgs),
    /// List the bundled specs, or write them to a directory.
    Fixtures {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Spec file (TOML).
    #[arg(required_unless_present = "fixture", conflicts_with = "fixture")]
    spec: Option<PathBuf>,
    /// Use a bundled spec by name instead of a file.
    #[arg(long)]
    fixture: Option<String>,
    /// Output directory.
    #[arg(long, short, env = "REEB_GDNF_OUT", default_value = "reeb-out")]
    out: PathBuf,
    /// Treat suspect tail descriptors as an error (exit 3).
    #[arg(long)]
    strict: bool,
}

fn load(args: &RunArgs) -> Result<AnalysisSpec, String> {
    match (&args.spec, &args.fixture) {
        (_, Some(name)) => fixture(name).ok_or_else(|| format!("no bundled spec named {name}")),
        (Some(path), None) => AnalysisSpec::load(path).map_err(|e| e.to_string()),
        (None, None) => Err("no spec given".into()),
    }
}

fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn execute(command: Command, args: &RunArgs) -> ExitStatus {
    let spec = match load(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitStatus::Usage;
        }
    };
    let outcome = run(&spec, command, args.strict);
    let mut manifest = Manifest::new(&spec.name, command.name());
    let mut files: Vec<(String, String)> = Vec::new();
    for a in &outcome.artifacts {
        manifest.add(&a.path, a.contents.as_bytes());
        files.push((a.path.clone(), a.contents.clone()));
    }
    files.push(("manifest.json".into(), to_json(&manifest)));
    if let Err(e) = write_all(&args.out, &files) {
        eprintln!("error: cannot write to {}: {e}", args.out.display());
        return ExitStatus::Usage;
    }
    if outcome.status == ExitStatus::Success {
        println!("{}", outcome.message);
    } else {
        eprintln!("error: {}", outcome.message);
    }
    outcome.status
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Classify(a) => (Command::Classify, a),
        Cmd::Compactify(a) => (Command::Compactify, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Render(a) => (Command::Render, a),
        Cmd::Fixtures { write } => {
            for (name, text) in all_fixtures() {
                match &write {
                    Some(dir) => {
                        let file = format!("{}.toml", name.to_lowercase().replace('-', "_"));
                        if let Err(e) = write_all(dir, &[(file, text.to_string())]) {
                            eprintln!("error: {e}");
                            return ExitCode::from(1);
                        }
                    }
                    None => println!("{name}"),
                }
            }
            return ExitCode::SUCCESS;
        }
    };
    ExitCode::from(execute(command, &args).code() as u8)
}
