use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dofbound::assignment::{generate, validate, GeneratorKind, GeneratorSpec};
use dofbound::certificate::{
    construct_certificate, construct_certificate_m3, general_grid, m3_grid,
};
use dofbound::expansion::{
    dof_upper_bound_with_cap, exact_profile_with_cap, sampled_profile, ProfileMode,
    DEFAULT_EXACT_CAP,
};
use dofbound::io::{
    assignment_json, certificate_json, parse_assignment, parse_document, to_json_pretty,
    write_experiment_csv, write_profile_csv, write_ratio_csv,
};
use dofbound::search::{
    default_alphas, epsilon_experiment, epsilon_threshold, eta_out_exact, eta_out_random,
    expansion_ratio, min_cooperation_order, Fraction, RandomGenerator, SearchBudget,
};
use dofbound::verify::{self, Suite, VerifyConfig};
use dofbound::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dofbound",
    version,
    about = "DoF upper bounds for CoMP message assignments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Assignment JSON file.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Check an assignment file against every invariant.
    Validate(Common),
    /// Exact bound with witness set.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        cap_k: usize,
    },
    /// Expansion profile e(0..K).
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ProfileMode,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        cap_k: usize,
    },
    /// Greedy certificate for B <= (K(M-1)+1)/M.
    Certify(Common),
    /// Two-phase certificate for B <= 5(K+1)/8 under M = 3.
    CertifyM3(Common),
    /// Generate an assignment.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: GeneratorKind,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        radius: usize,
        #[arg(long)]
        wrap: bool,
    },
    /// Exhaustive search for eta_out(k, m).
    SearchExact {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// Largest k for isomorphism dedup.
        #[arg(long, default_value_t = 6)]
        cap_k: usize,
        #[arg(long)]
        no_dedup: bool,
        #[arg(long, default_value_t = 100_000)]
        max_assignments: u128,
    },
    /// Best bound over seeded random assignments.
    SearchRandom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, value_enum, default_value = "matching_union")]
        kind: RandomGenerator,
    },
    /// e(round(alpha K)) / round(alpha K) for each alpha.
    Expansion {
        #[command(flatten)]
        common: Common,
        /// Comma-separated fractions, e.g. 1/8,1/4.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<Fraction>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Cooperation-order threshold for epsilon; with --k and --m, also run
    /// the expander experiment.
    Epsilon {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Fraction,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Evaluate the counting inequalities on their admissible grids.
    IneqGrid {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 40)]
        max_k: usize,
        #[arg(long, default_value_t = 6)]
        max_m: usize,
        #[arg(long, default_value_t = 63)]
        max_k_m3: usize,
    },
    /// Run the verification suites.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        trials: Option<u64>,
    },
}

enum Failure {
    Code(u8, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Io(_) => EXIT_IO,
        Error::BudgetExceeded { .. } | Error::SearchBudgetExceeded { .. } => EXIT_BUDGET,
        _ => EXIT_VALIDATION,
    }
}

fn emit(out: &Option<PathBuf>, body: &[u8]) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, body),
        None => io::stdout().write_all(body),
    }
}

fn emit_line(out: &Option<PathBuf>, text: String) -> io::Result<()> {
    emit(out, format!("{text}\n").as_bytes())
}

fn read_input(common: &Common) -> Result<Vec<u8>, Failure> {
    match &common.input {
        Some(path) => Ok(fs::read(path)?),
        None => Err(Failure::Code(EXIT_IO, "--in PATH is required".into())),
    }
}

fn load(common: &Common) -> Result<dofbound::MessageAssignment, Failure> {
    match parse_assignment(&read_input(common)?) {
        Err(Error::Invalid(report)) => {
            emit_line(&common.out, to_json_pretty(&report))?;
            Err(Failure::Code(EXIT_VALIDATION, "invalid assignment".into()))
        }
        other => Ok(other?),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(common) => {
            let bytes = read_input(&common)?;
            let report = validate(&parse_document(&bytes)?);
            emit_line(&common.out, to_json_pretty(&report))?;
            if !report.valid {
                return Err(Failure::Code(EXIT_VALIDATION, report.to_string()));
            }
        }
        Command::Bound { common, cap_k } => {
            let a = load(&common)?;
            emit_line(
                &common.out,
                to_json_pretty(&dof_upper_bound_with_cap(&a, cap_k)?),
            )?;
        }
        Command::Profile {
            common,
            mode,
            samples,
            format,
            cap_k,
        } => {
            let a = load(&common)?;
            let profile = match mode {
                ProfileMode::Exact => exact_profile_with_cap(&a, cap_k)?,
                ProfileMode::Sampled => sampled_profile(&a, samples, common.seed)?,
            };
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_profile_csv(&profile, &mut buf)?;
                    emit(&common.out, &buf)?;
                }
                Format::Json => emit_line(&common.out, to_json_pretty(&profile))?,
            }
        }
        Command::Certify(common) => {
            let a = load(&common)?;
            emit_line(&common.out, certificate_json(&construct_certificate(&a)?))?;
        }
        Command::CertifyM3(common) => {
            let a = load(&common)?;
            emit_line(
                &common.out,
                certificate_json(&construct_certificate_m3(&a)?),
            )?;
        }
        Command::Generate {
            common,
            kind,
            k,
            m,
            radius,
            wrap,
        } => {
            let spec = GeneratorSpec {
                kind,
                k,
                m: if kind == GeneratorKind::Full { k } else { m },
                radius,
                wraparound: wrap,
            };
            emit_line(&common.out, assignment_json(&generate(&spec, common.seed)?))?;
        }
        Command::SearchExact {
            common,
            k,
            m,
            cap_k,
            no_dedup,
            max_assignments,
        } => {
            let budget = SearchBudget {
                max_assignments,
                dedup: !no_dedup,
                canonical_cap: cap_k,
            };
            match eta_out_exact(k, m, budget) {
                Ok(report) => emit_line(&common.out, to_json_pretty(&report))?,
                Err(Error::SearchBudgetExceeded { total, partial }) => {
                    emit_line(&common.out, to_json_pretty(&partial))?;
                    return Err(Failure::Code(
                        EXIT_BUDGET,
                        format!(
                            "budget exhausted after {} of {total} assignments; partial result printed",
                            partial.trials_or_count
                        ),
                    ));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::SearchRandom {
            common,
            k,
            m,
            trials,
            kind,
        } => {
            let report = eta_out_random(k, m, trials, common.seed, kind)?;
            emit_line(&common.out, to_json_pretty(&report))?;
        }
        Command::Expansion {
            common,
            alpha,
            format,
        } => {
            let a = load(&common)?;
            let alphas = if alpha.is_empty() {
                default_alphas()
            } else {
                alpha
            };
            let ratios = expansion_ratio(&a, &alphas)?;
            match format {
                Format::Json => emit_line(&common.out, to_json_pretty(&ratios))?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_ratio_csv(&ratios, &mut buf)?;
                    emit(&common.out, &buf)?;
                }
            }
        }
        Command::Epsilon {
            common,
            epsilon,
            k,
            m,
            trials,
            format,
        } => {
            let eps = *epsilon.numer() as f64 / *epsilon.denom() as f64;
            match (k, m) {
                (Some(k), Some(m)) => {
                    let exp = epsilon_experiment(k, m, epsilon, trials, common.seed)?;
                    match format {
                        Format::Json => emit_line(&common.out, to_json_pretty(&exp))?,
                        Format::Csv => {
                            let mut buf = Vec::new();
                            write_experiment_csv(&exp, &mut buf)?;
                            emit(&common.out, &buf)?;
                        }
                    }
                }
                (None, None) => {
                    let report = json!({
                        "epsilon": epsilon.to_string(),
                        "threshold": epsilon_threshold(eps)?,
                        "min_cooperation_order": min_cooperation_order(eps)?,
                    });
                    emit_line(&common.out, to_json_pretty(&report))?;
                }
                _ => {
                    return Err(Failure::Code(
                        EXIT_VALIDATION,
                        "--k and --m must be given together".into(),
                    ))
                }
            }
        }
        Command::IneqGrid {
            common,
            max_k,
            max_m,
            max_k_m3,
        } => {
            let general = general_grid(max_k, max_m);
            let m3 = m3_grid(max_k_m3);
            let ok = general.all_true() && m3.all_true();
            emit_line(
                &common.out,
                to_json_pretty(&json!({ "general": general, "m3": m3, "all_true": ok })),
            )?;
            if !ok {
                return Err(Failure::Code(
                    EXIT_VERIFY,
                    "counting inequality false".into(),
                ));
            }
        }
        Command::Verify {
            common,
            suite,
            trials,
        } => {
            let cfg = VerifyConfig {
                seed: common.seed,
                trials,
            };
            let checks = verify::run(suite, &cfg);
            let mut text = String::new();
            for c in &checks {
                text.push_str(&format!(
                    "{} {} ({:.0} ms): {}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.elapsed_ms,
                    c.observed
                ));
            }
            emit(&common.out, text.as_bytes())?;
            if let Some(first) = checks.iter().find(|c| !c.passed) {
                return Err(Failure::Code(
                    EXIT_VERIFY,
                    format!("verification failed: {}", first.name),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Code(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
