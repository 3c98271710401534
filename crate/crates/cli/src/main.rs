use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpl_cli::probes::{barrier_study, check_anisotropy, write_probe_report};
use fpl_cli::{run_experiment, run_suite, ExperimentConfig, Overrides, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_STAGE_ERROR};

#[derive(Parser)]
#[command(name = "fpl", version, about = "Anisotropic p-Laplacian experiments and concavity certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (suite: root of per-experiment directories).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the concavity scan.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Mesh size override.
    #[arg(long, global = true)]
    h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one experiment and run its checks.
    Solve { config: PathBuf },
    /// Run every `*.json` config in a directory and write summary.csv.
    Suite { dir: PathBuf },
    /// Anisotropy probes only.
    CheckAnisotropy { config: PathBuf },
    /// Barrier profile and residual refinement study.
    Barrier { config: PathBuf },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn load(path: &Path, ov: &Overrides) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(mut cfg) => {
            ov.apply(&mut cfg);
            Ok(cfg)
        }
        Err(e) => {
            eprintln!("stage config failed: {e}");
            Err(exit(EXIT_STAGE_ERROR))
        }
    }
}

fn verdict(passed: bool) -> ExitCode {
    exit(if passed { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides { out: cli.common.out, seed: cli.common.seed, h: cli.common.h };
    match cli.command {
        Command::Solve { config } => {
            let cfg = match load(&config, &ov) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = ov.output_dir(&cfg);
            match run_experiment(&cfg, &dir) {
                Ok(out) => {
                    let r = &out.report;
                    for (name, ok) in &r.checks {
                        println!("{name:<16} {}", if *ok { "pass" } else { "FAIL" });
                    }
                    match r.lambda_1 {
                        Some(l) => println!("lambda_1         {l:.6}"),
                        None => println!("max_u            {:.6}", r.max_u),
                    }
                    if let Some(c) = &r.concavity {
                        println!("max_violation    {:e} (tolerance {:e})", c.max_violation, c.tolerance);
                    }
                    println!("report           {}", dir.join("report.json").display());
                    verdict(r.passed)
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit(EXIT_STAGE_ERROR)
                }
            }
        }
        Command::Suite { dir } => match run_suite(&dir, &ov) {
            Ok(outcome) => {
                for r in &outcome.rows {
                    println!("{:<32} {:?}", r.experiment, r.status);
                }
                println!("summary {}", outcome.summary.display());
                verdict(outcome.all_passed())
            }
            Err(e) => {
                eprintln!("suite failed: {e}");
                exit(EXIT_STAGE_ERROR)
            }
        },
        Command::CheckAnisotropy { config } => {
            let cfg = match load(&config, &ov) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = ov.output_dir(&cfg);
            match check_anisotropy(&cfg).and_then(|rep| write_probe_report(&rep, &dir).map(|_| rep)) {
                Ok(rep) => {
                    println!("smoothness       {:?}", rep.smoothness);
                    println!("phi(e), phi(-e)  {:.6} {:.6}", rep.phi_e1.0, rep.phi_e1.1);
                    println!("polar identities {}", if rep.polar_passed { "pass" } else { "FAIL" });
                    println!("lambda_hat       {:.6e} .. {:.6e}", rep.hp2.lambda, rep.hp2.big_lambda);
                    println!(
                        "h_theta spread   {:.3} / {:.3}",
                        rep.h_theta.lambda_variation, rep.h_theta.big_lambda_variation
                    );
                    verdict(rep.passed)
                }
                Err(e) => {
                    eprintln!("check-anisotropy failed: {e}");
                    exit(EXIT_STAGE_ERROR)
                }
            }
        }
        Command::Barrier { config } => {
            let cfg = match load(&config, &ov) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = ov.output_dir(&cfg);
            match barrier_study(&cfg, &dir) {
                Ok(study) => {
                    println!("A, B             {:.12} {:.12}", study.profile.a, study.profile.b);
                    println!("invariant defect {:e}", study.invariant_defect);
                    for r in &study.residuals {
                        println!("h {:<8} residual {:e}", r.h, r.max);
                    }
                    if let Some(rate) = study.rate {
                        println!("rate             {rate:.3}");
                    }
                    verdict(study.passed)
                }
                Err(e) => {
                    eprintln!("barrier failed: {e}");
                    exit(EXIT_STAGE_ERROR)
                }
            }
        }
    }
}
