use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use proxbp::backpressure::AlphaMode;
use proxbp::net::{parse_scenario, serialize_scenario};
use proxbp::oracle::{format_report, parse_report, solve_centralized, ORACLE_TOL};
use proxbp::sim::{
    self, appendix_b::format_policies, compare, gen_appendix_b, parse_compare_spec, run_appendix_b,
    write_trace_csv, RunConfig,
};
use proxbp::{OracleSolutionF64, ScenarioF64};

#[derive(Parser)]
#[command(
    name = "proxbp",
    version,
    about = "Proximal backpressure simulator and oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    New,
    Dpp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    Gap,
    Bound,
}

impl From<AlphaArg> for AlphaMode {
    fn from(a: AlphaArg) -> Self {
        match a {
            AlphaArg::Gap => AlphaMode::UtilityGap,
            AlphaArg::Bound => AlphaMode::QueueBound,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one algorithm and write its trace as CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        alg: Alg,
        #[arg(long)]
        slots: u64,
        #[arg(long, value_enum, default_value = "bound")]
        alpha_mode: AlphaArg,
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
        #[arg(long = "V", default_value_t = 500.0)]
        v: f64,
        /// Oracle report from `proxbp oracle`; enables the gap column and the
        /// bound checks.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Solve sources and links on a thread pool.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the centralized problem and write the report.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = ORACLE_TOL)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate scenarios.
    Gen {
        #[command(subcommand)]
        what: Generator,
    },
    /// Run several configurations against one oracle.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = ORACLE_TOL)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Generator {
    /// Chain whose merge node backlog reaches k + 1 while instant-forwarding
    /// queues stay empty.
    AppendixB {
        #[arg(long)]
        k: usize,
        /// Slots to simulate; defaults to 3k.
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_scenario(path: &Path) -> Result<ScenarioF64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_oracle(path: &Path, scenario: &ScenarioF64) -> Result<OracleSolutionF64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_report(&text, scenario).with_context(|| format!("parsing {}", path.display()))
}

fn write_csv(path: &Path, traces: &[&proxbp::TraceF64]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace_csv(std::io::BufWriter::new(file), traces)?;
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            alg,
            slots,
            alpha_mode,
            alpha_scale,
            v,
            oracle,
            parallel,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let oracle = oracle.map(|p| load_oracle(&p, &sc)).transpose()?;
            let mut config = match alg {
                Alg::New => RunConfig::new_alg(&sc, alpha_mode.into(), alpha_scale, slots)?,
                Alg::Dpp => RunConfig::dpp(&sc, v, slots)?,
            };
            config.parallel = parallel;
            let output = sim::run(&sc, &config, oracle.as_ref())?;
            write_csv(&out, &[&output.trace])?;
            eprint!("{}", output.summary);
            Ok(if output.summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Oracle { scenario, tol, out } => {
            let sc = load_scenario(&scenario)?;
            let sol = solve_centralized(&sc, tol)?;
            fs::write(&out, format_report(&sc, &sol))
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("u_star {} duality_gap {:e}", sol.u_star, sol.duality_gap);
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            what: Generator::AppendixB { k, slots, out_dir },
        } => {
            let ex = gen_appendix_b::<f64>(k)?;
            fs::create_dir_all(&out_dir)?;
            fs::write(
                out_dir.join("scenario.net"),
                serialize_scenario(&ex.scenario),
            )?;
            fs::write(out_dir.join("policy.txt"), format_policies(&ex))?;
            let rows = run_appendix_b(&ex, slots.unwrap_or(3 * k as u64));
            let mut w = String::from("slot,max_y,z_node0,max_z\n");
            for r in &rows {
                w.push_str(&format!(
                    "{},{},{},{}\n",
                    r.slot, r.max_y, r.z_merge, r.max_z
                ));
            }
            fs::write(out_dir.join("queues.csv"), w)?;
            if let Some(r) = rows.get(3 * k - 1) {
                eprintln!("node 0 backlog after slot {}: {}", r.slot, r.z_merge);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            scenario,
            spec,
            tol,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec = parse_compare_spec(&text)?;
            let sol = solve_centralized(&sc, tol)?;
            let outcome = compare(&sc, &spec, &sol)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("oracle.txt"), format_report(&sc, &sol))?;
            let traces: Vec<_> = outcome.runs.iter().map(|r| &r.trace).collect();
            write_csv(&out.join("traces.csv"), &traces)?;
            let summary = outcome.summary();
            fs::write(out.join("summary.txt"), &summary)?;
            eprint!("{summary}");
            Ok(if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
