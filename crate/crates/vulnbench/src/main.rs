use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vulnbench::report::{render_report, ReportFormat};
use vulnbench::runner::{
    evaluate_existing, replay_counts_file, run_benchmark, write_artifacts, BenchmarkConfig,
    BenchmarkResult,
};

#[derive(Parser)]
#[command(name = "vulnbench", version, about = "Vulnerability analyzer benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run analyzers over the corpus and score the results.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to one project id.
        #[arg(long)]
        project: Option<String>,
        /// Restrict to one analyzer id.
        #[arg(long)]
        analyzer: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Match and score SARIF artifacts from a previous run.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compute metrics from a (total, tp, known) counts file.
    Replay {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render a stored result.json in another format.
    Report {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value = "md", value_parser = parse_format)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_format(text: &str) -> Result<ReportFormat, String> {
    text.parse()
}

fn write_reports(result: &BenchmarkResult, out: &PathBuf) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.md"), render_report(result, ReportFormat::Markdown))?;
    std::fs::write(out.join("report.csv"), render_report(result, ReportFormat::Csv))?;
    Ok(())
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Analyze {
            config,
            project,
            analyzer,
            out,
        } => {
            let cfg = BenchmarkConfig::from_file(&config)?;
            let result = run_benchmark(&cfg, project.as_deref(), analyzer.as_deref())?;
            write_artifacts(&result, &out)?;
            write_reports(&result, &out)?;
            print!(
                "{}",
                String::from_utf8_lossy(&render_report(&result, ReportFormat::Markdown))
            );
            if !result.failures.is_empty() {
                eprintln!("{} cell(s) failed; see report", result.failures.len());
            }
        }
        Command::Evaluate { config, out } => {
            let cfg = BenchmarkConfig::from_file(&config)?;
            let result = evaluate_existing(&cfg, &out)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("result.json"),
                render_report(&result, ReportFormat::Json),
            )?;
            write_reports(&result, &out)?;
            print!(
                "{}",
                String::from_utf8_lossy(&render_report(&result, ReportFormat::Markdown))
            );
        }
        Command::Replay { counts, out } => {
            let result = replay_counts_file(&counts)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("result.json"),
                render_report(&result, ReportFormat::Json),
            )?;
            write_reports(&result, &out)?;
            print!(
                "{}",
                String::from_utf8_lossy(&render_report(&result, ReportFormat::Markdown))
            );
        }
        Command::Report { result, format, out } => {
            let text = std::fs::read_to_string(&result)?;
            let parsed: BenchmarkResult = serde_json::from_str(&text)?;
            let bytes = render_report(&parsed, format);
            match out {
                Some(path) => std::fs::write(path, bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
