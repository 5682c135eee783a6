//! Command-line front end: frame design reports, effective-channel dumps,
//! BER sweeps, and sounding campaigns, all driven by a JSON experiment
//! configuration.
//!
//! Exit codes: `0` on success, `2` when the configuration itself is rejected
//! (parse failure, infeasible geometry, unsupported waveform), `1` for any
//! other error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use afdm::config::ExperimentConfig;
use afdm::params::ChannelBounds;
use afdm::{runner, Error};

#[derive(Parser)]
#[command(
    name = "afdm",
    version,
    about = "Chirp-carrier link simulator with integrated delay-Doppler channel sounding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON). Omit for the built-in default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print the resolved configuration before running.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print chirp rates, guard counts, overheads, and the delay-Doppler
    /// shift table per waveform.
    Design {
        /// Frame size in subcarriers.
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Maximum path delay in samples.
        #[arg(long, default_value_t = 1)]
        l_max: usize,
        /// Maximum path Doppler in bins.
        #[arg(long, default_value_t = 1)]
        k_max: usize,
        /// Extra Doppler guard bins for off-grid margin.
        #[arg(long, default_value_t = 0)]
        xi: usize,
        /// Prefix length override; defaults to the minimal l_max.
        #[arg(long)]
        cpp_override: Option<usize>,
        /// Directory for design.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Dump the magnitude pattern of one drawn channel after demodulation.
    EffectiveChannel(RunArgs),
    /// Monte-Carlo bit error rate sweep across the configured waveforms.
    BerSweep(RunArgs),
    /// Delay-Doppler sounding campaign over a slowly fading channel.
    Sound(RunArgs),
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default_desk(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.emit_config {
        print!("{}", cfg.to_json());
    }
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Design {
            n,
            l_max,
            k_max,
            xi,
            cpp_override,
            out,
        } => {
            let bounds = ChannelBounds::new(l_max, k_max, xi);
            let report = runner::run_design(n, &bounds, cpp_override)?;
            let body = serde_json::to_string_pretty(&report)? + "\n";
            let path = write_out(&out, "design.json", &body)?;
            for w in &report.waveforms {
                println!(
                    "{}: c1={} c2={} q={} l_cpp={} data_symbols={} guard_zone={:.4} separable={}",
                    w.waveform,
                    w.c1,
                    w.c2,
                    w.guard_q,
                    w.l_cpp,
                    w.data_symbols,
                    w.guard_zone_fraction,
                    w.separable
                );
            }
            println!(
                "2d embedded pilot would cost {} cells; wrote {}",
                report.otfs_pilot_area,
                path.display()
            );
        }
        Command::EffectiveChannel(args) => {
            let cfg = load_config(&args)?;
            let (kind, rows) = runner::effective_channel_rows(&cfg)?;
            let path = write_out(&args.out, "heff.csv", &runner::heff_csv(&rows))?;
            println!(
                "{kind}: {} entries above the magnitude floor; wrote {}",
                rows.len(),
                path.display()
            );
        }
        Command::BerSweep(args) => {
            let cfg = load_config(&args)?;
            let rows = runner::run_ber_sweep(&cfg)?;
            let path = write_out(&args.out, "ber.csv", &runner::ber_csv(&rows))?;
            for r in &rows {
                println!(
                    "{} @ {} dB: ber={:.3e} ci=[{:.3e}, {:.3e}] evm={:.2}% ({} bits, {} frames)",
                    r.waveform,
                    r.snr_db,
                    r.ber,
                    r.ci_low,
                    r.ci_high,
                    r.evm_percent,
                    r.bits,
                    r.frames
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Sound(args) => {
            let cfg = load_config(&args)?;
            let run = runner::run_sounding(&cfg)?;
            let json = serde_json::to_string_pretty(&run)? + "\n";
            write_out(&args.out, "sounding.json", &json)?;
            // pdp.csv / dps.csv carry the estimated profiles; without usable
            // detections they stay header-only and the JSON holds the truth.
            let (pdp_body, dps_body) = match &run.estimated {
                Some(r) => (runner::pdp_csv(r), runner::dps_csv(r)),
                None => (
                    String::from("delay_s,power\n"),
                    String::from("doppler_hz,power\n"),
                ),
            };
            write_out(&args.out, "pdp.csv", &pdp_body)?;
            write_out(&args.out, "dps.csv", &dps_body)?;
            match &run.estimated {
                Some(est) => println!(
                    "rms delay spread {:.3e} s, rms doppler spread {:.3e} Hz \
                     ({} of {} frames with detections)",
                    est.rms_delay_spread_s,
                    est.rms_doppler_spread_hz,
                    run.detected_frames,
                    run.frame_count
                ),
                None => println!(
                    "insufficient detections: {} of {} frames saw any path; \
                     ground truth is in sounding.json",
                    run.detected_frames, run.frame_count
                ),
            }
            println!(
                "wrote sounding.json, pdp.csv, dps.csv in {}",
                args.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.config_code().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
