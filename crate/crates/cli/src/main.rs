use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridsynth::config::RunConfig;
use gridsynth::{demo, pipeline};

#[derive(Parser)]
#[command(name = "gridsynth", version, about = "Generate synthetic unbalanced distribution feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a reference feeder and save it.
    Fit(Common),
    /// Draw synthetic samples from a saved model.
    Generate(Common),
    /// Check phase consistency, run power flow and write a report.
    Validate(Common),
    /// Write each sample as an OpenDSS script.
    ExportOpendss(Common),
    /// Build the bundled demo feeder and run every step on it.
    Demo {
        /// Output directory.
        #[arg(long, default_value = "gridsynth-demo")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    zones: Option<usize>,
    /// Output location: the model file for `fit`, otherwise a directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> gridsynth::Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.samples {
            c.samples = n;
        }
        if let Some(z) = self.zones {
            c.zones = z;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> gridsynth::Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let mut c = a.load()?;
            if let Some(o) = a.out {
                c.paths.model = o;
            }
            let m = pipeline::fit(&c)?;
            print!("{}", m.diagnostics_report());
            println!("fitted model written to {}", c.paths.model.display());
        }
        Command::Generate(a) => {
            let mut c = a.load()?;
            if let Some(o) = a.out {
                c.paths.samples = o;
            }
            let files = pipeline::generate(&c)?;
            report_generation(&files);
            println!("{} samples written to {}", files.len(), c.paths.samples.display());
        }
        Command::Validate(a) => {
            let mut c = a.load()?;
            if let Some(o) = a.out {
                c.paths.report = o;
            }
            let r = pipeline::validate(&c)?;
            print!("{}", r.to_text());
            println!("report written to {}", c.paths.report.display());
        }
        Command::ExportOpendss(a) => {
            let mut c = a.load()?;
            if let Some(o) = a.out {
                c.paths.opendss = o;
            }
            let files = pipeline::export_opendss(&c)?;
            println!("{} OpenDSS scripts written to {}", files.len(), c.paths.opendss.display());
        }
        Command::Demo { out, seed, samples } => run_demo(&out, seed, samples)?,
    }
    Ok(())
}

fn run_demo(out: &Path, seed: u64, samples: Option<usize>) -> gridsynth::Result<()> {
    let mut c = demo::write_inputs(out, seed)?;
    if let Some(n) = samples {
        c.samples = n;
    }
    println!("demo inputs written to {}", out.display());
    let m = pipeline::fit(&c)?;
    print!("{}", m.diagnostics_report());
    let files = pipeline::generate(&c)?;
    report_generation(&files);
    let r = pipeline::validate(&c)?;
    print!("{}", r.to_text());
    pipeline::export_opendss(&c)?;
    println!("outputs in {}", out.display());
    Ok(())
}

fn report_generation(files: &[pipeline::Generated]) {
    if files.is_empty() {
        println!("no samples requested");
        return;
    }
    let ms: Vec<f64> = files.iter().map(|g| g.elapsed.as_secs_f64() * 1e3).collect();
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let max = ms.iter().copied().fold(0.0, f64::max);
    println!("generated {} samples; per-sample time mean {mean:.2} ms, max {max:.2} ms", files.len());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
