use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcflow::app::{self, exit_code};
use pcflow::config::{parse_config, print_config, ScenarioConfig};
use pcflow::{parallel, Result};

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Pseudo Calabi flow laboratory.
#[derive(Parser)]
#[command(name = "pcflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its CSV trace.
    Run { config: PathBuf },
    /// Continue a scenario from a checkpoint.
    Resume { checkpoint: PathBuf, config: PathBuf },
    /// Run PCF and NKRF in lockstep and record their density divergence.
    Crosscheck { config: PathBuf },
    /// Evaluate every functional and probe on the initial state.
    Probe { config: PathBuf },
    /// Print the effective configuration, defaults included.
    PrintConfig { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn execute(cli: Cli) -> Result<()> {
    let threads = app::parse_threads(std::env::var("PCFLOW_THREADS").ok().as_deref())?;
    parallel::set_threads(threads);
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let r = app::run_scenario(&cfg)?;
            summarize(&r.trajectory);
            println!("csv = {}", r.csv.display());
            println!("checkpoint = {}", r.final_checkpoint.display());
        }
        Command::Resume { checkpoint, config } => {
            let cfg = load(&config)?;
            let r = app::resume_scenario(&checkpoint, &cfg)?;
            summarize(&r.trajectory);
            println!("csv = {}", r.csv.display());
            println!("checkpoint = {}", r.final_checkpoint.display());
        }
        Command::Crosscheck { config } => {
            let cfg = load(&config)?;
            let r = app::crosscheck_scenario(&cfg)?;
            summarize(&r.pcf);
            println!("max_rho_divergence = {:.6e}", r.max_divergence());
            println!("csv_pcf = {}", r.csv_pcf.display());
            println!("csv_nkrf = {}", r.csv_nkrf.display());
        }
        Command::Probe { config } => {
            let cfg = load(&config)?;
            let r = app::probe_scenario(&cfg)?;
            let rec = &r.record;
            for (k, v) in [
                ("sup_F", rec.sup_f),
                ("inf_F", rec.inf_f),
                ("sup_P", rec.sup_p),
                ("entropy", rec.entropy),
                ("j_neg_ric", rec.j_neg_ric),
                ("k_energy", rec.k_energy),
                ("i_functional", rec.i_functional),
                ("dissipation", rec.dissipation),
                ("calabi_energy", rec.calabi_energy),
                ("rho_min", rec.rho_min),
                ("volume", rec.volume),
                ("poisson_residual", rec.poisson_residual),
                ("p_mean_defect", r.p_mean_defect),
                ("curvature_discrepancy", r.curvature_discrepancy),
            ] {
                println!("{k} = {v:.16e}");
            }
            for (p, v) in &r.probes.grad_f {
                println!("grad_F_Lp{p} = {v:.16e}");
            }
            for (p, v) in &r.probes.trace0 {
                println!("trace0_Lp{p} = {v:.16e}");
            }
            for (p, v) in &r.probes.grad_p {
                println!("grad_P_Lp{p} = {v:.16e}");
            }
        }
        Command::PrintConfig { config } => {
            let cfg = load(&config)?;
            print!("{}", print_config(&cfg));
        }
    }
    Ok(())
}

fn summarize(t: &pcflow::flow::Trajectory) {
    let last = t.records.last().expect("at least one record");
    println!("terminated = {:?}", t.terminated);
    println!("steps = {}", t.steps);
    println!("t = {:.16e}", last.time);
    println!("sup_abs_F = {:.6e}", last.norm_f());
    println!("k_energy = {:.16e}", last.k_energy);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
