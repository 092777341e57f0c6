use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ftn_core::baselines::{complexity_report, ComplexityParams, Scheme};
use ftn_harness::config::{parse_f64_list, RunConfig};
use ftn_harness::report::{parse_csv, sort_rows, to_csv};
use ftn_harness::training::{detector_from, train_detector, write_loss_trace};
use ftn_harness::weights::{load_weights, save_weights};
use ftn_harness::{run_campaign, Campaign, ConfigError, HarnessError, Result, Scenario};

#[derive(Parser)]
#[command(name = "ftn", version, about = "Faster-than-Nyquist detection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a detector network and write its weights and loss trace.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run an uncoded or coded BER campaign.
    Ber {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated Eb/N0 values in dB.
        #[arg(long)]
        snr_list: Option<String>,
    },
    /// BER campaign of the joint detection and decoding chain.
    Joint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snr_list: Option<String>,
    },
    /// Merge BER CSV files into one sorted table.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Print per-symbol operation counts.
    Complexity {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn run_ber(common: &Common, scenario: Option<Scenario>, snr_list: Option<&str>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(sc) = scenario {
        cfg.scenario = sc;
    }
    if let Some(list) = snr_list {
        cfg.snr_list = parse_f64_list("snr_list", list)?;
        cfg.validate()?;
    }
    let mut campaign = Campaign::new(cfg.clone(), cfg.scenario);
    if cfg.scenario.needs_detector() {
        let path = cfg.weights.clone().unwrap_or_else(|| common.out.join("detector.ftnw"));
        let det = detector_from(load_weights(&path)?, cfg.window)?;
        campaign = campaign.with_detector(Arc::new(det));
    }
    let report = run_campaign(&campaign)?;
    create_dir(&common.out)?;
    let path = common.out.join(format!("{}.csv", cfg.scenario));
    let text = to_csv(&ftn_harness::report::merge_rows(std::slice::from_ref(&report))?)?;
    std::fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
    for p in &report.points {
        println!(
            "{} {:>6.2} dB  ber {:.3e} ± {:.1e}  ({} errors / {} bits{})",
            report.scenario,
            p.eb_n0_db,
            p.ber,
            p.ci_half_width,
            p.errors,
            p.bits,
            if p.cap_hit { ", cap" } else { "" }
        );
    }
    if let Some(cp) = report.cp_overhead {
        println!("cyclic prefix overhead {:.2}%", 100.0 * cp);
    }
    println!(
        "run {} in {:.1} s -> {}",
        report.run_id,
        report.wall_time_s,
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common } => {
            let cfg = load_config(&common)?;
            let out = train_detector(&cfg, |e, l| println!("epoch {:>3}  loss {l:.6e}", e + 1))?;
            create_dir(&common.out)?;
            let weights = common.out.join("detector.ftnw");
            save_weights(&weights, &out.net)?;
            write_loss_trace(&common.out.join("loss_trace.csv"), &out.loss_trace)?;
            println!(
                "trained at {:.2} dB, validation loss {:.6e} -> {}",
                out.train_eb_n0_db,
                out.validation_loss,
                weights.display()
            );
            Ok(())
        }
        Command::Ber {
            common,
            scenario,
            snr_list,
        } => {
            let scenario = scenario
                .map(|s| s.parse::<Scenario>())
                .transpose()
                .map_err(|e| ConfigError::invalid("scenario", e.to_string()))?;
            run_ber(&common, scenario, snr_list.as_deref())
        }
        Command::Joint { common, snr_list } => run_ber(&common, Some(Scenario::CodedJointPolar), snr_list.as_deref()),
        Command::Report { out, inputs } => {
            let mut rows = Vec::new();
            for p in &inputs {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                rows.extend(parse_csv(&text)?);
            }
            let text = to_csv(&sort_rows(rows)?)?;
            create_dir(&out)?;
            let path = out.join("report.csv");
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Complexity { config } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            let c = cfg.constellation();
            let params = ComplexityParams {
                window: cfg.window,
                fft_len: cfg.fde_block,
                alphabet: c.axis().size(),
                memory: cfg
                    .map_memory
                    .unwrap_or_else(|| ftn_core::baselines::default_memory(&c)),
                ..ComplexityParams::default()
            };
            println!(
                "{:<6} {:>10} {:>10} {:>9}   {:>10} {:>10}",
                "scheme", "add", "mul", "parallel", "ref add", "ref mul"
            );
            for scheme in Scheme::ALL {
                let r = complexity_report(scheme, &params)?;
                println!(
                    "{:<6} {:>10} {:>10} {:>9}   {:>10} {:>10}",
                    r.scheme,
                    r.additions,
                    r.multiplications,
                    if r.parallelizable { "Support" } else { "No" },
                    r.published_additions,
                    r.published_multiplications
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
