use std::process::ExitCode;

use clap::Parser;
use impulse_hum::config::{parse_config, CliArgs};
use impulse_hum::experiment::{fit_cost_exponent, run_matrix};
use impulse_hum::export::export_results;
use impulse_hum::HumError;

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn run(args: CliArgs) -> Result<(), HumError> {
    let config = parse_config(&args)?;
    let outcome = run_matrix(&config)?;

    println!(
        "{:<10} {:>8} {:>6} {:>14} {:>14} {:>9} {:>10}",
        "bc", "eps", "n_iter", "|Psi(T)|", "|h|_L2(w)", "converged", "time_s"
    );
    for run in &outcome.runs {
        let r = &run.row;
        println!(
            "{:<10} {:>8.0e} {:>6} {:>14.6e} {:>14.6e} {:>9} {:>10.4}",
            r.bc.name(),
            r.eps,
            r.n_iter,
            r.final_norm,
            r.control_norm,
            r.converged,
            r.wall_time
        );
        if !r.converged {
            eprintln!("warning: {} eps={:e} stopped at max_iter without converging", r.bc, r.eps);
        }
    }

    if !outcome.ordering.checks.is_empty() {
        println!();
        println!("ordering checks:");
        for c in &outcome.ordering.checks {
            println!("  eps={:<8.0e} {:<34} {}", c.eps, c.label, if c.holds { "holds" } else { "FAILS" });
        }
    }

    let mut fits = Vec::new();
    if config.fit_cost {
        println!();
        for bc in &config.bcs {
            match fit_cost_exponent(&outcome.rows_for(*bc)) {
                Ok(fit) => {
                    println!(
                        "cost fit {:<10} delta_hat = {:.4}  intercept = {:.4}  r^2 = {:.4}",
                        bc.name(),
                        fit.delta_hat,
                        fit.intercept,
                        fit.r_squared
                    );
                    fits.push(fit);
                }
                Err(e) => eprintln!("cost fit {}: {e}", bc.name()),
            }
        }
    }

    if let Some(dir) = &config.output_dir {
        let written = export_results(&outcome.runs, &fits, dir, config.record_timing)?;
        eprintln!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match CliArgs::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (HumError::Usage(_) | HumError::ConfigFile { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
