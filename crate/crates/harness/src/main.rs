use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rhl_core::comparison::{b_root_residuals, gamma_slack, solve_gamma, ConstantLedger, ROOT_TOLERANCE};
use rhl_harness::config::{load_config, ConfigError};
use rhl_harness::output::{fmt_f64, ledger_rows, write_report};
use rhl_harness::run::run_scenario;
use rhl_harness::suite::{bundled_scenarios, run_all};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CHECK: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "rhl", version, about = "Numerical checks of derivative estimates along Ricci flow")]
struct Cli {
    /// Output directory; defaults to the scenario's output_dir, then $RHL_OUT, then ./rhl-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Print the constant ledger as CSV.
    Ledger {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        kmax: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
    },
    /// Certify the root-solved constants without running any PDE.
    VerifyConstants {
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Run every bundled scenario.
    Suite,
}

fn out_dir(cli: Option<&Path>, scenario: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| scenario.map(Path::to_path_buf))
        .or_else(|| std::env::var_os("RHL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rhl-out"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Run { config } => run(&config, out),
        Command::Ledger { n, kmax, a } => ledger(n, kmax, a),
        Command::VerifyConstants { n } => verify_constants(n),
        Command::Suite => suite(out),
    }
}

fn run(path: &Path, out: Option<&Path>) -> ExitCode {
    let scenario = match load_config(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let dir = out_dir(out, scenario.output_dir.as_deref()).join(&scenario.name);
    let report = run_scenario(&scenario);
    if let Err(e) = write_report(&report, &dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(EXIT_USAGE);
    }
    print_summary(&report);
    println!("reports in {}", dir.display());
    exit_for(&report)
}

fn exit_for(report: &rhl_harness::RunReport) -> ExitCode {
    if report.error.is_some() {
        ExitCode::from(EXIT_RUNTIME)
    } else if !report.pass() {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    }
}

fn print_summary(report: &rhl_harness::RunReport) {
    for c in &report.components {
        println!("{:<5} {}: {} ({})", if c.pass { "ok" } else { "FAIL" }, report.scenario, c.name, c.detail);
    }
    if let Some(e) = &report.error {
        println!("ERROR {}: {e}", report.scenario);
    }
    println!("{} {}", if report.pass() { "PASS" } else { "FAIL" }, report.scenario);
}

fn ledger(n: usize, kmax: usize, a: f64) -> ExitCode {
    let ledger = match ConstantLedger::standard(n, a, kmax) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let header = rhl_harness::output::LEDGER.columns.iter().map(|c| c.0);
    let ok = w.write_record(header).is_ok()
        && ledger_rows(&ledger).iter().all(|r| w.write_record(r).is_ok())
        && w.flush().is_ok();
    if !ok {
        return ExitCode::from(EXIT_RUNTIME);
    }
    let violations = ledger.certify();
    for v in &violations {
        eprintln!("certificate failed: {v}");
    }
    if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    }
}

fn verify_constants(n: usize) -> ExitCode {
    if n < 2 {
        eprintln!("error: dimension must be at least 2");
        return ExitCode::from(EXIT_USAGE);
    }
    let mut all = true;
    let mut line = |name: &str, value: f64, residual: f64| {
        let ok = residual.abs() < ROOT_TOLERANCE;
        all &= ok;
        println!("{:<5} {name} = {} (residual {})", if ok { "ok" } else { "FAIL" }, fmt_f64(value), fmt_f64(residual));
    };
    for k in 1..=3 {
        let g = solve_gamma(k).expect("k ≥ 1");
        let scale = g * g + g.abs() + 1.0;
        line(&format!("gamma{}", k + 1), g, gamma_slack(k, g) / scale);
    }
    let ledger = ConstantLedger::standard(n, 1.0, 1).expect("n ≥ 2");
    let (r1, r2) = b_root_residuals(n, std::f64::consts::E);
    let (_, r2_eps1) = b_root_residuals(n, 1.0);
    line("B_first", ledger.b_first_root, r1);
    line("B_second", ledger.b_second_root, r2);
    line("B_second_eps1", ledger.b_second_root_eps1, r2_eps1);
    line("B", ledger.b_prop32, ledger.b_prop32 - ledger.b_first_root.max(ledger.b_second_root));
    let violations = ledger.certify();
    for v in &violations {
        println!("FAIL  ledger certificate: {v}");
    }
    if all && violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    }
}

fn suite(out: Option<&Path>) -> ExitCode {
    let scenarios = match bundled_scenarios() {
        Ok(s) => s,
        Err(e @ ConfigError::Parse(_)) | Err(e @ ConfigError::Invalid { .. }) | Err(e @ ConfigError::Io { .. }) => {
            eprintln!("error: bundled scenario: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let dir = out_dir(out, None);
    let mut code = ExitCode::SUCCESS;
    let mut worst = 0;
    for (report, written) in run_all(&scenarios, &dir) {
        print_summary(&report);
        if let Err(e) = written {
            eprintln!("error: writing {}: {e}", report.scenario);
            return ExitCode::from(EXIT_USAGE);
        }
        let rank = if report.error.is_some() {
            2
        } else if !report.pass() {
            1
        } else {
            0
        };
        if rank > worst {
            worst = rank;
            code = exit_for(&report);
        }
    }
    println!("reports in {}", dir.display());
    code
}
