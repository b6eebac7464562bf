use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use linkstop::causal::{build_subclasses, fit_propensity, EstimatorKind, SubclassConfig, Subclassification};
use linkstop::harness::{emit_tables, run_experiment, ExperimentConfig, HarnessError, Method};
use linkstop::linkage::{
    known_links, link, link_quality, read_scored_pairs, write_scored_pairs, LinkageConfig, ScorerKind, TruthTable,
};
use linkstop::records::{parse_file_a, parse_file_b, write_file_a, write_file_b, Field, RecordA, RecordId};
use linkstop::rng::{stream, Purpose};
use linkstop::selection::{
    build_candidate_sequence, evaluate_ladder, select, LadderPoint, Rule, Selection, TetherConfig,
};
use linkstop::simgen::{generate_corpus, generate_dataset, read_truth, write_corruption_log, write_truth};

#[derive(Parser)]
#[command(
    name = "linkstop",
    version,
    about = "Record linkage with variance-based link-threshold selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pair of files with ground truth.
    Simulate(SimulateArgs),
    /// Score candidate pairs and keep the top link per File A record.
    Link(LinkArgs),
    /// Subclassified effect estimate on a set of links.
    Estimate(EstimateArgs),
    /// Apply stopping rules to the ladder of candidate link sets.
    Select(SelectArgs),
    /// Run a Monte Carlo experiment and write summary tables.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (TOML); only corpus, scenario and seed keys matter.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Which replication of the corpus to draw.
    #[arg(long, default_value_t = 0)]
    replication: u64,
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long)]
    file_a: PathBuf,
    #[arg(long)]
    file_b: PathBuf,
    #[arg(long, default_value = "fs")]
    scorer: ScorerKind,
    #[arg(long, default_value_t = 0.95)]
    theta_m: f64,
    #[arg(long, default_value_t = 0.95)]
    jw_cutoff: f64,
    /// Minimum score of a link; 0 for fs, 0.8 for avg-jw by default.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long, default_value = "birth_year")]
    block_field: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth links (`a_id,b_id`) for a link-quality table.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, requires = "truth")]
    quality_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CausalArgs {
    #[arg(long)]
    file_a: PathBuf,
    #[arg(long)]
    file_b: PathBuf,
    /// Scored pairs as written by `link`.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 5)]
    subclasses: usize,
    #[arg(long, default_value_t = 2)]
    min_per_arm: usize,
    #[arg(long, default_value = "dim")]
    estimator: EstimatorKind,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CausalArgs,
    /// Use only pairs scoring at least this much.
    #[arg(long, conflicts_with = "known_only")]
    min_score: Option<f64>,
    /// Use only pairs agreeing on every field.
    #[arg(long)]
    known_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Mev,
    Etsr,
    Medov,
    All,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CausalArgs,
    #[arg(long, value_enum, default_value = "all")]
    rule: RuleArg,
    #[arg(long, default_value_t = 0.5)]
    etsr_k: f64,
    /// Pairs below this score are not candidates (default: keep all).
    #[arg(long)]
    floor: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::from_path(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let corpus = generate_corpus(&cfg.corpus, &mut stream(cfg.seed, None, Purpose::Corpus))?;
    let data = generate_dataset(&corpus, &cfg.corpus, &cfg.scenario, cfg.seed, args.replication)?;
    fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    write_file_a(create(&dir.join("file_a.csv"))?, &data.file_a)?;
    write_file_b(create(&dir.join("file_b.csv"))?, &data.file_b)?;
    write_truth(create(&dir.join("truth.csv"))?, &data.truth.links)?;
    write_corruption_log(create(&dir.join("corruption_log.csv"))?, &data.truth.corruption_log)?;
    eprintln!(
        "wrote {} File A and {} File B records with {} true links to {}",
        data.file_a.len(),
        data.file_b.len(),
        data.truth.links.len(),
        dir.display()
    );
    Ok(())
}

fn run_link(args: &LinkArgs) -> Result<()> {
    let a = parse_file_a(&args.file_a)?;
    let b = parse_file_b(&args.file_b)?;
    let cfg = LinkageConfig {
        scorer: args.scorer,
        theta_m: args.theta_m,
        jw_cutoff: args.jw_cutoff,
        floor: args.floor,
        block_field: args.block_field.parse::<Field>()?,
        ..LinkageConfig::default()
    };
    let out = link(&a, &b, &cfg)?;
    write_scored_pairs(output(args.out.as_deref())?, &out.pairs)?;
    eprintln!(
        "{} candidate pairs, {} links, {} agreeing on every field",
        out.candidate_pairs,
        out.pairs.len(),
        known_links(&out.pairs).len()
    );
    if let Some(truth_path) = &args.truth {
        let links = read_truth(File::open(truth_path).with_context(|| format!("opening {}", truth_path.display()))?)?;
        let table = TruthTable::new(a.iter().map(|r| r.id), links);
        let rows = link_quality(&out.pairs, &table)?;
        let mut wtr = csv::Writer::from_writer(output(args.quality_out.as_deref())?);
        wtr.write_record(["threshold", "link_rate", "units", "duplicates"])?;
        for r in rows.iter().rev() {
            wtr.write_record([
                r.threshold.to_string(),
                r.link_rate.to_string(),
                r.units.to_string(),
                r.duplicates.to_string(),
            ])?;
        }
        wtr.flush()?;
    }
    Ok(())
}

struct Prepared {
    a: Vec<RecordA>,
    b: Vec<linkstop::records::RecordB>,
    pairs: Vec<linkstop::linkage::ScoredPair>,
    sub: Subclassification,
    coefficients: Vec<f64>,
}

/// Loads both files and the pairs, fits the propensity model on all of
/// File A and freezes the subclass boundaries.
fn prepare(args: &CausalArgs) -> Result<Prepared> {
    let a = parse_file_a(&args.file_a)?;
    let b = parse_file_b(&args.file_b)?;
    let pairs =
        read_scored_pairs(File::open(&args.pairs).with_context(|| format!("opening {}", args.pairs.display()))?)?;
    let x: Vec<Vec<f64>> = a.iter().map(|r| r.covariates.clone()).collect();
    let w: Vec<bool> = a.iter().map(|r| r.treated).collect();
    let ids: Vec<RecordId> = a.iter().map(|r| r.id).collect();
    let model = fit_propensity(&x, &w)?;
    let cfg = SubclassConfig {
        subclasses: args.subclasses,
        min_per_arm: args.min_per_arm,
    };
    let sub = build_subclasses(&ids, &model.scores, &w, &cfg)?;
    if sub.num_classes() < args.subclasses {
        eprintln!("note: reduced to {} subclasses", sub.num_classes());
    }
    Ok(Prepared {
        a,
        b,
        pairs,
        sub,
        coefficients: model.coefficients,
    })
}

#[derive(Serialize)]
struct EstimateReport {
    n_links: usize,
    subclasses: usize,
    boundaries: Vec<f64>,
    propensity_coefficients: Vec<f64>,
    estimator: EstimatorKind,
    #[serde(flatten)]
    estimate: linkstop::causal::EffectEstimate,
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let p = prepare(&args.common)?;
    let chosen: Vec<_> = if args.known_only {
        known_links(&p.pairs)
    } else {
        p.pairs
            .iter()
            .filter(|q| args.min_score.is_none_or(|m| q.score >= m))
            .copied()
            .collect()
    };
    if chosen.is_empty() {
        bail!("no links to estimate on");
    }
    let seq = build_candidate_sequence(&[], &chosen, f64::NEG_INFINITY);
    let units = seq.units(&p.a, &p.b, &p.sub)?;
    let est = args.common.estimator.estimate(&units, &p.sub)?;
    write_json(
        args.common.out.as_deref(),
        &EstimateReport {
            n_links: units.len(),
            subclasses: p.sub.num_classes(),
            boundaries: p.sub.boundaries.clone(),
            propensity_coefficients: p.coefficients,
            estimator: args.common.estimator,
            estimate: est,
        },
    )
}

#[derive(Serialize)]
struct SelectReport {
    n_known: usize,
    max_h: usize,
    subclasses: usize,
    ladder: Vec<LadderPoint>,
    selections: Vec<Selection>,
}

fn run_select(args: &SelectArgs) -> Result<()> {
    let p = prepare(&args.common)?;
    let tether = TetherConfig::new(args.etsr_k)?;
    let l0 = known_links(&p.pairs);
    let seq = build_candidate_sequence(&p.pairs, &l0, args.floor.unwrap_or(f64::NEG_INFINITY));
    let units = seq.units(&p.a, &p.b, &p.sub)?;
    let ladder = evaluate_ladder(&seq, &units, args.common.estimator, &p.sub);
    let rules: Vec<Rule> = match args.rule {
        RuleArg::Mev => vec![Rule::Mev],
        RuleArg::Etsr => vec![Rule::Etsr],
        RuleArg::Medov => vec![Rule::Medov],
        RuleArg::All => Rule::ALL.to_vec(),
    };
    let selections = rules
        .into_iter()
        .map(|r| select(r, &ladder, &tether))
        .collect::<Result<Vec<_>, _>>()?;
    write_json(
        args.common.out.as_deref(),
        &SelectReport {
            n_known: seq.l0.len(),
            max_h: seq.max_h(),
            subclasses: p.sub.num_classes(),
            ladder,
            selections,
        },
    )
}

fn experiment(args: &ExperimentArgs) -> ExitCode {
    let cfg = load_config(args.config.as_deref()).and_then(|mut cfg| {
        if let Some(r) = args.reps {
            cfg.replications = r;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(j) = args.jobs {
            cfg.jobs = j;
        }
        cfg.validate()?;
        Ok(cfg)
    });
    let cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let exp = match run_experiment(&cfg) {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() { 1 } else { 2 });
        }
    };
    if let Err(e) = fs::create_dir_all(&args.out_dir)
        .map_err(HarnessError::from)
        .and_then(|_| emit_tables(&exp, &args.out_dir))
    {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let s = &exp.summary;
    println!("{} replications, tau = {}", s.replications, s.tau);
    println!(
        "{:<8} {:>8} {:>8} {:>10} {:>8} {:>10}",
        "method", "mean", "var", "avg var^", "mse", "threshold"
    );
    for m in &s.methods {
        let thr = match (m.method, m.avg_threshold) {
            (Method::Perfect, _) | (_, None) => "-".to_string(),
            (_, Some(t)) => format!("{t:.1}"),
        };
        println!(
            "{:<8} {:>8.2} {:>8.2} {:>10.2} {:>8.2} {:>10}",
            m.method.name(),
            m.mean_tau,
            m.var_tau,
            m.avg_var_hat,
            m.mse,
            thr
        );
    }
    println!("difference in marginal means: {:.2}", s.marginal_mean);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Link(a) => run_link(a),
        Command::Estimate(a) => estimate(a),
        Command::Select(a) => run_select(a),
        Command::Experiment(a) => return experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
