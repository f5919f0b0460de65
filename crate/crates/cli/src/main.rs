//! `greedcert`: command-line front end for the greedy sparse-recovery
//! analysis toolkit — solver traces, recovery certificates, worst-case
//! instance construction, boundary-tie demonstrations, and Monte-Carlo
//! sweeps, all through file-based I/O.
//!
//! Exit codes: 0 = success/pass, 1 = checked failure (certificate fails,
//! guarantee violated, tie not confirmed), 2 = usage or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use greedcert_core::adversarial::{
    build_dictionary, demonstrate_converse_j, demonstrate_converse_k, worst_case_vector,
    AdversarialError,
};
use greedcert_core::certificates::{
    certify_donoho_baseline, certify_theorem1, certify_theorem2, certify_theorem3,
    certify_theorem4, certify_theorem5, certify_uniform, certify_uniform_termination,
    check_lemma4_step, SignalProfile, Verdict,
};
use greedcert_core::experiments::{default_grid, prob_satisfy_decay_all, RunManifest};
use greedcert_core::linalg::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
use greedcert_core::{
    decay_constraint_curve, emit_csv, run_oxx, CertificateReport, Dictionary, DistributionSpec,
    SolverConfig, TheoremId, Variant,
};

#[derive(Parser)]
#[command(
    name = "greedcert",
    version,
    about = "Greedy sparse-recovery analysis: OMP/OLS traces, recovery certificates, \
             worst-case constructions, and Monte-Carlo sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run OMP or OLS on a dictionary and observation, writing the full
    /// iteration trace as JSON.
    Solve(SolveArgs),
    /// Evaluate a recovery certificate on a coefficient profile.
    Certify(CertifyArgs),
    /// Build the equiangular worst-case dictionary (optionally with the
    /// boundary coefficient vector).
    Construct(ConstructArgs),
    /// Demonstrate sharpness: the forced selection tie at the coherence
    /// boundary. Exits 0 only when the tie is confirmed.
    VerifyConverse(VerifyConverseArgs),
    /// Monte-Carlo sweep: probability that random coefficient profiles
    /// satisfy the decay condition, per family and grid point.
    Experiment(ExperimentArgs),
    /// Tabulate the decay-threshold factors across coherence values.
    Curve(CurveArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CliVariant {
    Omp,
    Ols,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Variant {
        match v {
            CliVariant::Omp => Variant::Omp,
            CliVariant::Ols => Variant::Ols,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Dictionary CSV, one matrix row per line; columns are the atoms and
    /// are normalized on load.
    #[arg(long)]
    dict: PathBuf,
    /// Observation vector CSV (one entry per line).
    #[arg(long)]
    y: PathBuf,
    /// Number of selection steps to run.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum)]
    variant: CliVariant,
    /// Tolerance for reporting near-tied selection scores.
    #[arg(long = "tie-tol")]
    tie_tol: Option<f64>,
    /// Output path for the trace JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Certificate id: uniform, uniform_termination, thm1, thm2, thm3,
    /// thm4, thm5, donoho, or lemma4_step.
    #[arg(long)]
    theorem: String,
    /// Total sparsity (selected prefix plus remaining magnitudes).
    #[arg(long)]
    k: usize,
    /// Mutual coherence of the dictionary.
    #[arg(long)]
    mu: f64,
    /// Remaining head magnitudes, comma separated, largest first (unsorted
    /// input is sorted with a warning). Required by the profile-based
    /// certificates.
    #[arg(long, value_delimiter = ',')]
    head: Option<Vec<f64>>,
    /// Noise budget ε (ℓ2 radius of the disturbance).
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Off-support ℓ1 tail mass.
    #[arg(long, default_value_t = 0.0)]
    tail: f64,
    /// Atoms already correctly selected.
    #[arg(long, default_value_t = 0)]
    g: usize,
    /// Partial-recovery horizon: the next p selections (thm3).
    #[arg(long)]
    p: Option<usize>,
    /// Partial-recovery lookahead r with p <= r <= k−g (thm3).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_enum, default_value_t = CliVariant::Omp)]
    variant: CliVariant,
    /// Output path for the verdict report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConstructArgs {
    /// Sparsity level; the dictionary has k+1 atoms.
    #[arg(long)]
    k: usize,
    /// Target mutual coherence, 0 < mu <= 1/k.
    #[arg(long)]
    mu: f64,
    /// Boundary position for the worst-case coefficient vector.
    #[arg(long, requires = "vec")]
    j: Option<usize>,
    /// Decay slack for positions before j (must exceed 1).
    #[arg(long, default_value_t = 1.5)]
    slack: f64,
    /// Output path for the dictionary CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output path for the worst-case coefficient vector CSV.
    #[arg(long, requires = "j")]
    vec: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ConverseMode {
    K,
    J,
}

#[derive(Args)]
struct VerifyConverseArgs {
    /// k: full-support failure at mu = 1/k; j: boundary tie at
    /// mu = 1/(2k−j).
    #[arg(long, value_enum)]
    mode: ConverseMode,
    #[arg(long)]
    k: usize,
    /// Boundary position (required in mode j).
    #[arg(long)]
    j: Option<usize>,
    /// Decay slack above the boundary position (mode j).
    #[arg(long, default_value_t = 1.5)]
    slack: f64,
    /// Output path for the demonstration report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Sparsity of the sampled profiles.
    #[arg(long)]
    k: usize,
    /// Trials per (family, grid point) cell.
    #[arg(long)]
    trials: usize,
    /// Base seed for the deterministic per-trial streams.
    #[arg(long)]
    seed: u64,
    /// Number of kμ grid points spanning (0, 1].
    #[arg(long = "grid-points")]
    grid_points: usize,
    /// Output path for the results CSV; a reproducibility manifest is
    /// written next to it with extension .manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    k: usize,
    /// Coherence values, comma separated, each in (0, 1/k].
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    /// Output path for the curve CSV.
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("GREEDCERT_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore "already initialized": tests may configure twice.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid GREEDCERT_THREADS value {raw:?}"),
        }
    }
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_solve(args: SolveArgs) -> Result<u8> {
    let raw = read_matrix_csv(&args.dict)
        .with_context(|| format!("reading dictionary {}", args.dict.display()))?;
    let dictionary = Dictionary::normalize_columns(raw).context("normalizing dictionary")?;
    let y = read_vector_csv(&args.y)
        .with_context(|| format!("reading observation {}", args.y.display()))?;
    let mut config = SolverConfig::new(args.variant.into(), args.k);
    if let Some(tol) = args.tie_tol {
        config.tie_tolerance = tol;
    }
    let trace = run_oxx(&dictionary, &y, &config).context("running the solver")?;
    write_text(&args.out, &(trace.to_json() + "\n"))?;
    Ok(0)
}

fn run_certify(args: CertifyArgs) -> Result<u8> {
    let theorem = TheoremId::from_str(&args.theorem)?;

    let profile = match &args.head {
        Some(raw_head) => {
            let mut head = raw_head.clone();
            let sorted = head.windows(2).all(|w| w[0] >= w[1]);
            if !sorted {
                eprintln!("warning: head magnitudes were not sorted; sorting largest first");
                head.sort_by(|a, b| b.partial_cmp(a).expect("finite magnitudes"));
            }
            if args.g + head.len() != args.k {
                bail!(
                    "expected k = g + head length, got k = {}, g = {}, head length {}",
                    args.k,
                    args.g,
                    head.len()
                );
            }
            Some(SignalProfile::new(head, args.tail, args.eps, args.g)?)
        }
        None => None,
    };
    fn need_profile(profile: Option<&SignalProfile>, id: TheoremId) -> Result<&SignalProfile> {
        profile.with_context(|| format!("--head is required for {id}"))
    }
    let prof = profile.as_ref();

    let verdict: Verdict = match theorem {
        TheoremId::Uniform => certify_uniform(args.k, args.mu)?,
        TheoremId::UniformTermination => certify_uniform_termination(args.k, args.g, args.mu)?,
        TheoremId::Thm1 => certify_theorem1(need_profile(prof, theorem)?, args.mu)?.0,
        TheoremId::Thm2 => certify_theorem2(need_profile(prof, theorem)?, args.mu)?.verdict,
        TheoremId::Thm3 => {
            let p = args.p.context("--p is required for thm3")?;
            let r = args.r.context("--r is required for thm3")?;
            certify_theorem3(need_profile(prof, theorem)?, p, r, args.mu)?.0
        }
        TheoremId::Thm4 => certify_theorem4(need_profile(prof, theorem)?, args.mu)?,
        TheoremId::Donoho => certify_donoho_baseline(need_profile(prof, theorem)?, args.mu)?,
        TheoremId::Thm5 => {
            certify_theorem5(need_profile(prof, theorem)?, args.mu, args.variant.into())?
        }
        TheoremId::Lemma4Step => {
            check_lemma4_step(need_profile(prof, theorem)?, args.g, args.mu, args.variant.into())?
        }
    };

    let mut report = CertificateReport::new();
    report.insert(theorem, verdict.clone());
    write_text(&args.out, &(report.to_json() + "\n"))?;
    if verdict.pass {
        println!("{theorem}: pass");
        Ok(0)
    } else {
        eprintln!(
            "{theorem}: fail (binding index {:?}, boundary {})",
            verdict.binding_index, verdict.boundary
        );
        Ok(1)
    }
}

fn run_construct(args: ConstructArgs) -> Result<u8> {
    let instance = build_dictionary(args.k, args.mu)?;
    write_matrix_csv(&args.out, instance.dictionary.atoms())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let (Some(j), Some(vec_path)) = (args.j, &args.vec) {
        let x = worst_case_vector(args.k, j, args.mu, args.slack)?;
        write_vector_csv(vec_path, &x)
            .with_context(|| format!("writing {}", vec_path.display()))?;
    }
    Ok(0)
}

fn run_verify_converse(args: VerifyConverseArgs) -> Result<u8> {
    let outcome = match args.mode {
        ConverseMode::K => demonstrate_converse_k(args.k),
        ConverseMode::J => {
            let j = args.j.context("--j is required in mode j")?;
            demonstrate_converse_j(args.k, j, args.slack)
        }
    };
    match outcome {
        Ok(report) => {
            let text = report.to_json().context("serializing the report")?;
            write_text(&args.out, &(text + "\n"))?;
            println!("tie confirmed (k = {}, mode {:?})", args.k, args.mode);
            Ok(0)
        }
        Err(AdversarialError::ConstructionFailed(message)) => {
            eprintln!("tie not confirmed: {message}");
            Ok(1)
        }
        Err(other) => Err(other.into()),
    }
}

fn run_experiment(args: ExperimentArgs) -> Result<u8> {
    if args.grid_points == 0 {
        bail!("--grid-points must be at least 1");
    }
    let grid = default_grid(args.grid_points);
    let families = DistributionSpec::standard_families();
    let result = prob_satisfy_decay_all(&families, args.k, &grid, args.trials, args.seed)?;
    emit_csv(&result, &args.out)?;
    let manifest = RunManifest::new(args.k, grid, args.trials, args.seed, &families);
    let manifest_path = args.out.with_extension("manifest.json");
    write_text(
        &manifest_path,
        &(manifest.to_json().context("serializing the manifest")? + "\n"),
    )?;
    Ok(0)
}

fn run_curve(args: CurveArgs) -> Result<u8> {
    if args.mu.is_empty() {
        bail!("--mu needs at least one coherence value");
    }
    let rows = decay_constraint_curve(args.k, &args.mu)?;
    let mut text = String::from("mu,i,factor\n");
    for row in rows {
        text.push_str(&format!("{},{},{}\n", row.mu, row.i, row.factor));
    }
    write_text(&args.out, &text)?;
    Ok(0)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Solve(args) => run_solve(args),
        Command::Certify(args) => run_certify(args),
        Command::Construct(args) => run_construct(args),
        Command::VerifyConverse(args) => run_verify_converse(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Curve(args) => run_curve(args),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
