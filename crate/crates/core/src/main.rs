use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use jobpruner::bench::{
    preset, run_study, study_cells, write_outputs, BenchFamily, LandscapeFamily, StudyConfig,
    DEFAULT_REPS, FAMILY_NAMES, FAST_REPS, KB_SIZES, P_GRID,
};
use jobpruner::kb::{self, KbEntry, Metadata};
use jobpruner::matcher::{common_sample, PriorProfile, DEFAULT_SAMPLE_SEED, DEFAULT_THRESHOLD};
use jobpruner::optimizers::{OptimizerConfig, OptimizerKind, DEFAULT_BATCH_SIZE};
use jobpruner::orchestrator::{self, Budget, Evaluator, KnowledgeBase, RunConfig, DEFAULT_BUDGET_FRACTION};
use jobpruner::pruner::{prune_with_evidence, Aggressiveness, PruneConfig, DEFAULT_CAP};
use jobpruner::spec_file::{AppSpec, ExperimentSpec};
use jobpruner::variogram::{suggest_with, CheckThresholds};
use jobpruner::space::ExperimentRecord;
use jobpruner::{Error, Job, Result};

#[derive(Parser)]
#[command(name = "jobpruner", version, about = "Prune parameter sweeps using previous experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize an experiment, pruning with a knowledge base.
    Run(RunArgs),
    /// Apply one pruning step of a prior to the space of a specification.
    Prune(PruneArgs),
    /// Automatic aggressiveness and variogram diagnostics of a prior.
    SuggestAggr(SuggestArgs),
    /// Correlate a (partial) experiment with a knowledge base.
    Match(MatchArgs),
    /// Repeated-trial study on a synthetic family.
    Bench(BenchArgs),
    /// Write a synthetic family as a knowledge base plus a runnable spec.
    GenKb(GenKbArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Knowledge-base directory; entries of another structure are skipped.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long, default_value = "pso")]
    optimizer: OptimizerKind,
    #[arg(long, default_value = "auto")]
    paggr: Aggressiveness,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    corr_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: f64,
    #[arg(long, default_value_t = 1)]
    min_evidence: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET_FRACTION, conflicts_with = "budget")]
    budget_frac: f64,
    /// Absolute number of jobs.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Store the executed jobs as a new knowledge-base entry in this directory.
    #[arg(long)]
    save_kb: Option<PathBuf>,
    /// Id of the saved entry; defaults to the specification name.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    paggr: f64,
    #[arg(long, default_value_t = 1)]
    min_evidence: usize,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: f64,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    kb: PathBuf,
    /// Knowledge-base document of the current experiment.
    #[arg(long)]
    current: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    reps: Option<usize>,
    /// Smoke run with fewer repetitions.
    #[arg(long, conflicts_with = "reps")]
    fast: bool,
    #[arg(long, value_delimiter = ',', default_value = "pso,sa")]
    optimizers: Vec<OptimizerKind>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenKbArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subject left out of the knowledge base and written as `spec.toml`.
    #[arg(long, default_value_t = 0)]
    subject: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Prune(a) => cmd_prune(a),
        Command::SuggestAggr(a) => cmd_suggest(a),
        Command::Match(a) => cmd_match(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GenKb(a) => cmd_gen_kb(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}

fn load_record(path: &Path) -> Result<ExperimentRecord<f64>> {
    Ok(kb::load_entry(path)?.record)
}

fn builtin_family(family: &str, seed: u64) -> Result<LandscapeFamily> {
    if preset(family).is_none() {
        return Err(Error::SpecFile(format!(
            "unknown builtin `{family}`; expected one of {}",
            FAMILY_NAMES.join(", ")
        )));
    }
    LandscapeFamily::preset(family, seed)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&a.spec)?;
    let family;
    let command;
    let (app, application): (&dyn Evaluator, String) = match &spec.app {
        None => return Err(Error::SpecFile("the specification has no [app] table".into())),
        Some(AppSpec::Command { template, .. }) => {
            command = spec.command()?.expect("command app");
            (&command, template.clone())
        }
        Some(AppSpec::Builtin {
            family: name,
            family_seed,
            subject,
        }) => {
            family = builtin_family(name, *family_seed)?;
            let s = family.subjects().get(*subject).ok_or_else(|| {
                Error::SpecFile(format!("builtin `{name}` has no subject {subject}"))
            })?;
            if !s.space().same_structure(&spec.space) {
                return Err(Error::SpecFile(format!(
                    "parameters do not match builtin `{name}`; generate them with gen-kb"
                )));
            }
            (s, format!("builtin:{name}:{family_seed}:{subject}"))
        }
    };

    let mut records = Vec::new();
    if let Some(dir) = &a.kb {
        let loaded = kb::load_kb(dir)?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        for e in loaded.entries {
            if e.record.space().same_structure(&spec.space) {
                records.push(e.record);
            } else {
                eprintln!("warning: skipped `{}`: different parameters", e.record.id());
            }
        }
    }
    let knowledge = KnowledgeBase::new(records);

    let prune = PruneConfig {
        aggressiveness: a.paggr,
        cap: a.cap,
        corr_threshold: a.corr_threshold,
        min_evidence: a.min_evidence,
    };
    let budget = match a.budget {
        Some(n) => Budget::Absolute(n),
        None => Budget::Fraction(a.budget_frac),
    };
    let cfg = RunConfig::new(OptimizerConfig::new(a.optimizer, a.seed, a.batch_size), budget, prune);
    let report = orchestrator::run(&spec.space, app, &knowledge, &cfg)?;

    let csv = report.to_csv();
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    match &report.best {
        Some((p, v)) => {
            let levels: Vec<String> = spec.space.resolve(p).iter().map(|l| l.to_string()).collect();
            eprintln!(
                "best {v} at [{}] after {} of {} jobs; space {} of {}",
                levels.join(", "),
                report.evals_used,
                report.budget,
                report.final_space.size(),
                spec.space.size()
            );
        }
        None => eprintln!("no successful job in {} executions", report.evals_used),
    }
    for (p, e) in &report.failures {
        eprintln!("warning: job at {:?} failed: {e}", p.coords());
    }

    if let Some(dir) = &a.save_kb {
        let id = a.id.clone().unwrap_or_else(|| spec.name.clone());
        let jobs = report.evaluated.iter().map(|(p, v)| Job::done(p.clone(), *v)).collect();
        let record = ExperimentRecord::new(id, spec.space.clone(), jobs, None)?;
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = KbEntry::new(
            record,
            Metadata {
                application,
                created_unix,
                notes: format!("{} seed {}", a.optimizer, a.seed),
            },
        );
        let path = kb::save(&entry, dir)?;
        eprintln!("saved {}", path.display());
    }
    Ok(())
}

fn cmd_prune(a: PruneArgs) -> Result<()> {
    let prior = load_record(&a.prior)?;
    let spec = ExperimentSpec::load(&a.spec)?;
    if !prior.space().same_structure(&spec.space) {
        return Err(Error::StructuralMismatch {
            record: prior.id().to_owned(),
        });
    }
    let outcome = prune_with_evidence(&prior, &spec.space, a.paggr, a.min_evidence)?;
    let mut out = String::from("parameter,removed\n");
    for (d, removed) in outcome.removed.iter().enumerate() {
        let domain = spec.space.domain(d);
        let labels: Vec<String> = removed.iter().map(|&i| domain.values()[i].to_string()).collect();
        let _ = writeln!(out, "{},{}", domain.name(), labels.join(";"));
    }
    let _ = writeln!(out, "reduction,{}", outcome.reduction);
    let _ = writeln!(out, "space_size,{}", outcome.new_space.size());
    print!("{out}");
    Ok(())
}

fn cmd_suggest(a: SuggestArgs) -> Result<()> {
    let prior = load_record(&a.prior)?;
    let s = suggest_with(&prior, a.cap, &CheckThresholds::default())?;
    println!("s_aggr,{}", s.value);
    println!("fallback,{}", s.fallback);
    println!("nugget,{}", s.variogram.nugget);
    println!("sill,{}", s.variogram.sill);
    println!("bin_width,{}", s.variogram.bin_width);
    println!("skewness,{}", s.normality.skewness);
    println!("excess_kurtosis,{}", s.normality.excess_kurtosis);
    println!("normality,{}", if s.normality.passed { "pass" } else { "fail" });
    println!("stationarity,{}", if s.stationarity.passed { "pass" } else { "fail" });
    println!("worst_block_mean_shift,{}", s.stationarity.worst_mean_shift);
    println!("worst_block_variance_ratio,{}", s.stationarity.worst_variance_ratio);
    Ok(())
}

fn cmd_match(a: MatchArgs) -> Result<()> {
    let current = load_record(&a.current)?;
    let loaded = kb::load_kb(&a.kb)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let sample = common_sample(current.space(), DEFAULT_SAMPLE_SEED);
    let profile = PriorProfile::compute(&current, &sample)?.profile.ok_or_else(|| {
        Error::DegenerateSurrogate(format!("`{}` predicts a constant", current.id()))
    })?;
    let mut best: Option<(String, f64)> = None;
    println!("prior,n_corr");
    for e in loaded.entries.iter().filter(|e| e.record.id() != current.id()) {
        if !e.record.space().same_structure(current.space()) {
            eprintln!("warning: skipped `{}`: different parameters", e.record.id());
            continue;
        }
        let prior = PriorProfile::compute(&e.record, &sample)?;
        let Some(p) = &prior.profile else {
            println!("{},", prior.id);
            continue;
        };
        let c = profile.correlate(p)?;
        println!("{},{c}", prior.id);
        let better = match &best {
            None => true,
            Some((id, b)) => c > *b || (c == *b && prior.id < *id),
        };
        if better {
            best = Some((prior.id.clone(), c));
        }
    }
    match best.filter(|(_, c)| *c > a.threshold) {
        Some((id, c)) => eprintln!("selected {id} (n_corr {c})"),
        None => eprintln!("no prior above threshold {}", a.threshold),
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if preset(&a.family).is_none() {
        return Err(Error::InvalidConfig(format!(
            "unknown family `{}`; expected one of {}",
            a.family,
            FAMILY_NAMES.join(", ")
        )));
    }
    let reps = match (a.reps, a.fast) {
        (Some(n), _) => n,
        (None, true) => FAST_REPS,
        (None, false) => DEFAULT_REPS,
    };
    let bench = BenchFamily::preset(&a.family, a.seed)?;
    eprintln!(
        "{}: {} subjects, {} points, mean best correlation {:.4}",
        a.family,
        bench.subjects(),
        bench.family().space().size(),
        bench.family().rho
    );
    let full_kb = *KB_SIZES.iter().max().expect("non-empty");
    let cells = study_cells(&a.optimizers, &P_GRID, &KB_SIZES, full_kb);
    let study = run_study(&bench, &cells, &StudyConfig::new(a.seed, reps))?;
    for p in write_outputs(&study, &a.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_gen_kb(a: GenKbArgs) -> Result<()> {
    let family = builtin_family(&a.family, a.seed)?;
    if a.subject >= family.subjects().len() {
        return Err(Error::InvalidConfig(format!(
            "subject {} out of range; the family has {}",
            a.subject,
            family.subjects().len()
        )));
    }
    let kb_dir = a.out.join("kb");
    for i in (0..family.subjects().len()).filter(|&i| i != a.subject) {
        let record = family.subject(i).full_record(family.subject_id(i))?;
        let meta = Metadata {
            application: format!("builtin:{}:{}:{i}", a.family, a.seed),
            created_unix: 0,
            notes: "synthetic subject, fully evaluated".into(),
        };
        kb::save(&KbEntry::new(record, meta), &kb_dir)?;
    }
    let mut toml = format!("name = \"{}-s{:02}\"\n", a.family, a.subject);
    for d in family.space().domains() {
        let values: Vec<String> = d
            .values()
            .iter()
            .map(|l| match l.as_num() {
                Some(x) => x.to_string(),
                None => format!("\"{l}\""),
            })
            .collect();
        let _ = write!(
            toml,
            "\n[[param]]\nname = \"{}\"\nkind = \"{}\"\nvalues = [{}]\n",
            d.name(),
            d.kind().as_str(),
            values.join(", ")
        );
    }
    let _ = write!(
        toml,
        "\n[app]\nbuiltin = \"{}\"\nfamily_seed = {}\nsubject = {}\n",
        a.family, a.seed, a.subject
    );
    fs::create_dir_all(&a.out)?;
    let spec = a.out.join("spec.toml");
    fs::write(&spec, toml)?;
    eprintln!("wrote {} and {} entries under {}", spec.display(), family.subjects().len() - 1, kb_dir.display());
    Ok(())
}
