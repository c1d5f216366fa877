use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Runs a biot-mrfem configuration and writes CSV tables and plot scripts.
#[derive(Parser, Debug)]
#[command(name = "biot-mrfem", version)]
struct Args {
    /// key=value configuration file
    config: PathBuf,
    /// Output directory (overrides `output.dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    verbose: bool,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("BIOT_MRFEM_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("BIOT_MRFEM_THREADS: expected a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| format!("BIOT_MRFEM_THREADS: {e}"))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let start = std::time::Instant::now();
    let result = biot_mrfem_cli::load_config(&args.config, args.out, args.seed).and_then(|cfg| biot_mrfem_cli::run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            log::info!("done in {:.2}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
