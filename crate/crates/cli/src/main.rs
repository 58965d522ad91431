//! Command-line front end for the rule-decomposition pipeline.
//!
//! Subcommands cover the whole workflow: `rewrite` applies a decomposition
//! policy to a program, `features`/`label` build datasets, `train`/`eval`/
//! `predict` handle the classifier, and `ground` runs the reference
//! grounder. Payload output goes to standard output and is byte-identical
//! across runs with the same inputs and seeds (wall-clock oracles aside);
//! the effective configuration is echoed to standard error as one
//! `config: key=value ...` line.
//!
//! Exit codes: 0 success, 1 input error, 2 model error, 3 oracle or
//! timeout error. Failures print a single `error: <category>: <detail>`
//! line to standard error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ruledec_core::ast::{Program, Rule};
use ruledec_core::decomp::SelectionConfig;
use ruledec_core::features::{
    FeatureVector, IdbScope, extract_features_with, features_csv, labeled_features_csv,
};
use ruledec_core::ground::{
    CostOracle, ExternalCost, GroundConfig, GroundError, InternalCost, OracleError, Timing,
    TimingConfig, TimingMode, ground_program,
};
use ruledec_core::learn::metrics::evaluate;
use ruledec_core::learn::mlp::{MlpModel, TrainConfig, train};
use ruledec_core::learn::model_io::{load_model, save_model};
use ruledec_core::learn::{
    Class, Dataset, LabelConfig, LabelError, label_rule, read_features_csv, require_all_classes,
};
use ruledec_core::parser::{ParseOptions, parse_program, parse_program_with};
use ruledec_core::rewrite::{RewriteConfig, SafetyRepair, decompose_rule_default, rewrite_program};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let detail = err
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error: input: {detail}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {}", err.category.name(), err.message);
            ExitCode::from(err.category.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rewrite(args) => cmd_rewrite(args),
        Command::Features(args) => cmd_features(args),
        Command::Label(args) => cmd_label(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Ground(args) => cmd_ground(args),
    }
}

// ---------------------------------------------------------------------------
// Error plumbing.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Input,
    Model,
    Oracle,
}

impl Category {
    fn name(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Model => "model",
            Category::Oracle => "oracle",
        }
    }

    fn code(self) -> u8 {
        match self {
            Category::Input => 1,
            Category::Model => 2,
            Category::Oracle => 3,
        }
    }
}

#[derive(Debug)]
struct CliError {
    category: Category,
    message: String,
}

fn input_error(message: impl ToString) -> CliError {
    CliError {
        category: Category::Input,
        message: message.to_string(),
    }
}

fn model_error(message: impl ToString) -> CliError {
    CliError {
        category: Category::Model,
        message: message.to_string(),
    }
}

fn oracle_error(message: impl ToString) -> CliError {
    CliError {
        category: Category::Oracle,
        message: message.to_string(),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path, allow_reserved: bool) -> Result<Program, CliError> {
    let text = read_file(path)?;
    let parsed = if allow_reserved {
        parse_program_with(
            &text,
            &ParseOptions {
                allow_reserved_predicates: true,
            },
        )
    } else {
        parse_program(&text)
    };
    parsed.map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_model_file(path: &Path) -> Result<MlpModel, CliError> {
    load_model(path).map_err(|e| model_error(format!("{}: {e}", path.display())))
}

fn echo_config(pairs: &[(&str, String)]) {
    let joined: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("config: {}", joined.join(" "));
}

// ---------------------------------------------------------------------------
// Argument surface.

#[derive(Parser)]
#[command(
    name = "ruledec",
    version,
    about = "Decompose long ASP rules, and learn when doing so pays off"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a program under a decomposition policy.
    Rewrite(RewriteArgs),
    /// Print the feature vectors of a program's rules as CSV.
    Features(FeaturesArgs),
    /// Measure and label corpus rules, producing a training CSV.
    Label(LabelArgs),
    /// Train a classifier on a labeled CSV.
    Train(TrainArgs),
    /// Score a model against a labeled CSV.
    Eval(EvalArgs),
    /// Predict classes for feature vectors.
    Predict(PredictArgs),
    /// Ground a program and print the derived atoms.
    Ground(GroundArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Keep every rule as written.
    Never,
    /// Decompose every rule that has a usable decomposition.
    Always,
    /// Ask a trained model per rule (requires --model).
    Model,
    /// Follow a per-rule decision file (requires --list).
    List,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SafetyArg {
    /// Repair unsafe split rules through an auxiliary predicate.
    Aux,
    /// Repair by appending the binding literals inline.
    Inline,
}

impl SafetyArg {
    fn repair(self) -> SafetyRepair {
        match self {
            SafetyArg::Aux => SafetyRepair::Auxiliary,
            SafetyArg::Inline => SafetyRepair::Inline,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SafetyArg::Aux => "aux",
            SafetyArg::Inline => "inline",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimingArg {
    /// Median wall-clock time over repetitions.
    Wall,
    /// Deterministic work counter of the internal grounder.
    Work,
}

impl TimingArg {
    fn mode(self) -> TimingMode {
        match self {
            TimingArg::Wall => TimingMode::Wall,
            TimingArg::Work => TimingMode::Work,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TimingArg::Wall => "wall",
            TimingArg::Work => "work",
        }
    }
}

// ---------------------------------------------------------------------------
// rewrite

#[derive(Args)]
struct RewriteArgs {
    /// Program file to rewrite.
    input: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Trained model file (with --policy model).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Per-rule decision file (with --policy list): lines like `rule 3: decompose`.
    #[arg(long)]
    list: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SafetyArg::Aux)]
    safety: SafetyArg,
    /// Print one decision line per rule instead of the rewritten program.
    #[arg(long)]
    annotate_only: bool,
    /// Count the candidate decomposition's heads as intensional when
    /// computing model features.
    #[arg(long)]
    idb_after_rewrite: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_rewrite(args: RewriteArgs) -> Result<(), CliError> {
    let policy_name = match args.policy {
        PolicyArg::Never => "never",
        PolicyArg::Always => "always",
        PolicyArg::Model => "model",
        PolicyArg::List => "list",
    };
    echo_config(&[
        ("command", "rewrite".into()),
        ("input", args.input.display().to_string()),
        ("policy", policy_name.into()),
        ("safety", args.safety.name().into()),
        ("annotate_only", args.annotate_only.to_string()),
        ("idb_after_rewrite", args.idb_after_rewrite.to_string()),
        ("seed", args.seed.to_string()),
    ]);

    let program = load_program(&args.input, false)?;
    let selection = SelectionConfig {
        seed: args.seed,
        ..SelectionConfig::default()
    };
    let n_rules = program.rules().count();

    let decisions: Vec<bool> = match args.policy {
        PolicyArg::Never => vec![false; n_rules],
        PolicyArg::Always => vec![true; n_rules],
        PolicyArg::Model => {
            let path = args
                .model
                .as_deref()
                .ok_or_else(|| input_error("--policy model requires --model <file>"))?;
            let model = load_model_file(path)?;
            let scope = if args.idb_after_rewrite {
                IdbScope::AfterRewrite
            } else {
                IdbScope::Original
            };
            model_decisions(&program, &model, args.safety.repair(), &selection, scope)?
        }
        PolicyArg::List => {
            let path = args
                .list
                .as_deref()
                .ok_or_else(|| input_error("--policy list requires --list <file>"))?;
            parse_decision_list(&read_file(path)?, n_rules)?
        }
    };

    if args.annotate_only {
        let mut out = String::new();
        for (i, decompose) in decisions.iter().enumerate() {
            let verdict = if *decompose { "decompose" } else { "keep" };
            let _ = writeln!(out, "rule {}: {verdict}", i + 1);
        }
        print!("{out}");
        return Ok(());
    }

    let cfg = RewriteConfig {
        safety: args.safety.repair(),
        selection,
    };
    let mut next = decisions.into_iter();
    let outcome = rewrite_program(&program, |_| next.next().unwrap_or(false), &cfg)
        .map_err(input_error)?;
    print!("{}", outcome.program);
    Ok(())
}

/// Per-rule model verdicts, in `Program::rules` order. Rules without a
/// usable decomposition or without feature context are kept.
fn model_decisions(
    program: &Program,
    model: &MlpModel,
    safety: SafetyRepair,
    selection: &SelectionConfig,
    scope: IdbScope,
) -> Result<Vec<bool>, CliError> {
    let mut decisions = Vec::new();
    for rule in program.rules() {
        let rd = decompose_rule_default(rule, safety, selection).map_err(input_error)?;
        let decision = match rd {
            Some(rd) if rd.rules.len() >= 2 => {
                match extract_features_with(rule, program, &rd, scope) {
                    Ok(features) => {
                        let (class, _) = model.predict(&features.as_array());
                        class == Class::Decomp
                    }
                    Err(_) => false,
                }
            }
            _ => false,
        };
        decisions.push(decision);
    }
    Ok(decisions)
}

/// Parses `rule N: decompose|keep` lines. Rules not mentioned default to
/// keep; indexes are 1-based and must stay within the program.
fn parse_decision_list(text: &str, n_rules: usize) -> Result<Vec<bool>, CliError> {
    let mut decisions = vec![false; n_rules];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || input_error(format!("decision line {}: expected `rule N: decompose|keep`, found {line:?}", i + 1));
        let rest = line.strip_prefix("rule ").ok_or_else(bad)?;
        let (num, verdict) = rest.split_once(':').ok_or_else(bad)?;
        let index: usize = num.trim().parse().map_err(|_| bad())?;
        if index == 0 || index > n_rules {
            return Err(input_error(format!(
                "decision line {}: rule {index} out of range 1..={n_rules}",
                i + 1
            )));
        }
        decisions[index - 1] = match verdict.trim() {
            "decompose" => true,
            "keep" => false,
            _ => return Err(bad()),
        };
    }
    Ok(decisions)
}

// ---------------------------------------------------------------------------
// features

#[derive(Args)]
struct FeaturesArgs {
    /// Program file to featurize.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SafetyArg::Aux)]
    safety: SafetyArg,
    /// Count the candidate decomposition's heads as intensional.
    #[arg(long)]
    idb_after_rewrite: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_features(args: FeaturesArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "features".into()),
        ("input", args.input.display().to_string()),
        ("safety", args.safety.name().into()),
        ("idb_after_rewrite", args.idb_after_rewrite.to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let program = load_program(&args.input, false)?;
    let selection = SelectionConfig {
        seed: args.seed,
        ..SelectionConfig::default()
    };
    let scope = if args.idb_after_rewrite {
        IdbScope::AfterRewrite
    } else {
        IdbScope::Original
    };
    let mut rows = Vec::new();
    for (i, rule) in program.rules().enumerate() {
        let rd = decompose_rule_default(rule, args.safety.repair(), &selection)
            .map_err(input_error)?;
        match rd {
            Some(rd) if rd.rules.len() >= 2 => {
                match extract_features_with(rule, &program, &rd, scope) {
                    Ok(features) => rows.push(features),
                    Err(e) => eprintln!("skip rule {}: {e}", i + 1),
                }
            }
            _ => eprintln!("skip rule {}: no decomposition with more than one rule", i + 1),
        }
    }
    print!("{}", features_csv(&rows));
    Ok(())
}

// ---------------------------------------------------------------------------
// label

#[derive(Args)]
struct LabelArgs {
    /// Corpus: program files or directories of .lp files.
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    /// Output CSV path; a metadata sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// `internal` or `exec:<command>` where `{file}` is replaced with the
    /// program path.
    #[arg(long, default_value = "internal")]
    oracle: String,
    #[arg(long, value_enum, default_value_t = TimingArg::Wall)]
    timing: TimingArg,
    /// Per-measurement budget in seconds; 0 disables the budget.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    /// Repetitions per measurement (wall timing).
    #[arg(long, default_value_t = 3)]
    reps: u32,
    /// Work-unit budget per measurement (work timing).
    #[arg(long)]
    work_limit: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = SafetyArg::Aux)]
    safety: SafetyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum LabelOracle {
    Internal(InternalCost),
    External(ExternalCost),
}

impl CostOracle for LabelOracle {
    fn measure(&self, program: &Program) -> Result<Timing, OracleError> {
        match self {
            LabelOracle::Internal(oracle) => oracle.measure(program),
            LabelOracle::External(oracle) => oracle.measure(program),
        }
    }
}

#[derive(serde::Serialize)]
struct SkippedRule {
    file: String,
    rule: usize,
    reason: String,
}

#[derive(serde::Serialize)]
struct LabelMeta {
    command: String,
    seed: u64,
    oracle: String,
    timing: String,
    timeout_secs: u64,
    reps: u32,
    work_limit: Option<u64>,
    safety: String,
    jobs: usize,
    files: Vec<String>,
    rules_labeled: usize,
    rules_skipped: Vec<SkippedRule>,
    class_counts: [usize; 3],
    class_percentages: [f64; 3],
}

fn cmd_label(args: LabelArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "label".into()),
        ("out", args.out.display().to_string()),
        ("oracle", args.oracle.clone()),
        ("timing", args.timing.name().into()),
        ("timeout", args.timeout.to_string()),
        ("reps", args.reps.to_string()),
        (
            "work_limit",
            args.work_limit.map_or("none".into(), |w| w.to_string()),
        ),
        ("jobs", args.jobs.to_string()),
        ("safety", args.safety.name().into()),
        ("seed", args.seed.to_string()),
    ]);

    let timeout = (args.timeout > 0).then(|| Duration::from_secs(args.timeout));
    let oracle = if args.oracle == "internal" {
        LabelOracle::Internal(InternalCost {
            config: TimingConfig {
                mode: args.timing.mode(),
                reps: args.reps,
                timeout,
                work_limit: args.work_limit,
            },
        })
    } else if let Some(template) = args.oracle.strip_prefix("exec:") {
        if template.trim().is_empty() {
            return Err(input_error("empty command in --oracle exec:<command>"));
        }
        if args.timing == TimingArg::Work {
            return Err(input_error(
                "an external oracle measures wall-clock time only; drop --timing work",
            ));
        }
        LabelOracle::External(ExternalCost {
            command_template: template.to_string(),
            timeout,
            reps: args.reps,
        })
    } else {
        return Err(input_error(format!(
            "unknown oracle {:?}; use `internal` or `exec:<command>`",
            args.oracle
        )));
    };

    // Collect corpus files: directories contribute their .lp files sorted.
    let mut files: Vec<PathBuf> = Vec::new();
    for path in &args.corpus {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "lp"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    if files.is_empty() {
        return Err(input_error("no corpus files found"));
    }

    // One task per non-fact rule per file.
    struct Task<'a> {
        file: usize,
        rule_index: usize,
        rule: &'a Rule,
        facts: &'a [Rule],
    }
    let mut programs = Vec::new();
    for path in &files {
        let program = load_program(path, false)?;
        let facts: Vec<Rule> = program.facts().cloned().collect();
        programs.push((program, facts));
    }
    let mut tasks = Vec::new();
    for (file, (program, facts)) in programs.iter().enumerate() {
        for (rule_index, rule) in program.rules().enumerate() {
            tasks.push(Task {
                file,
                rule_index,
                rule,
                facts,
            });
        }
    }

    let label_cfg = LabelConfig {
        safety: args.safety.repair(),
        selection: SelectionConfig {
            seed: args.seed,
            ..SelectionConfig::default()
        },
    };

    // Worker pool over the task list; results land in task order, so the
    // output does not depend on scheduling.
    type LabelOutcome = Result<Option<ruledec_core::learn::LabeledExample>, LabelError>;
    let results: Mutex<Vec<Option<LabelOutcome>>> =
        Mutex::new((0..tasks.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let workers = args.jobs.max(1).min(tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let index = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(task) = tasks.get(index) else { break };
                    let outcome = label_rule(task.rule, task.facts, &label_cfg, &oracle);
                    results.lock().expect("no panics hold the lock")[index] = Some(outcome);
                }
            });
        }
    });
    let results = results.into_inner().expect("workers finished");

    let mut rows: Vec<(FeatureVector, String)> = Vec::new();
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (task, outcome) in tasks.iter().zip(results) {
        let outcome = outcome.expect("every task ran");
        let file = files[task.file].display().to_string();
        let rule = task.rule_index + 1;
        match outcome {
            Ok(Some(example)) => {
                rows.push((example.features.clone(), example.label.to_string()));
                examples.push(example);
            }
            Ok(None) => skipped.push(SkippedRule {
                file,
                rule,
                reason: "both measurements timed out".into(),
            }),
            Err(LabelError::NotDecomposable { .. }) => skipped.push(SkippedRule {
                file,
                rule,
                reason: "no decomposition with more than one rule".into(),
            }),
            Err(LabelError::NoIdb(e)) => skipped.push(SkippedRule {
                file,
                rule,
                reason: e.to_string(),
            }),
            Err(e @ LabelError::Rewrite(_)) => {
                return Err(input_error(format!("{file} rule {rule}: {e}")));
            }
            Err(LabelError::Oracle(e)) => {
                return Err(oracle_error(format!("{file} rule {rule}: {e}")));
            }
        }
    }

    let dataset = Dataset {
        examples: examples
            .iter()
            .map(|e| ruledec_core::learn::Example {
                features: e.features.as_array(),
                label: e.label,
            })
            .collect(),
    };

    fs::write(&args.out, labeled_features_csv(&rows))
        .map_err(|e| input_error(format!("{}: {e}", args.out.display())))?;
    let meta = LabelMeta {
        command: "label".into(),
        seed: args.seed,
        oracle: args.oracle.clone(),
        timing: args.timing.name().into(),
        timeout_secs: args.timeout,
        reps: args.reps,
        work_limit: args.work_limit,
        safety: args.safety.name().into(),
        jobs: args.jobs,
        files: files.iter().map(|p| p.display().to_string()).collect(),
        rules_labeled: rows.len(),
        rules_skipped: skipped,
        class_counts: dataset.class_counts(),
        class_percentages: dataset.class_percentages(),
    };
    let meta_path = sidecar_path(&args.out);
    let meta_json =
        serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, meta_json + "\n")
        .map_err(|e| input_error(format!("{}: {e}", meta_path.display())))?;

    println!("{}", dataset.distribution_summary());
    if !meta.rules_skipped.is_empty() {
        println!(
            "skipped {} rules (see {})",
            meta.rules_skipped.len(),
            meta_path.display()
        );
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta");
    out.with_file_name(name)
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
struct TrainArgs {
    /// Labeled CSV produced by `label`.
    dataset: PathBuf,
    /// Where to store the trained model.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Focal-loss focusing parameter.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = vec![32, 32])]
    hidden: Vec<usize>,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "train".into()),
        ("dataset", args.dataset.display().to_string()),
        ("out", args.out.display().to_string()),
        ("epochs", args.epochs.to_string()),
        ("batch_size", args.batch_size.to_string()),
        ("learning_rate", args.learning_rate.to_string()),
        ("gamma", args.gamma.to_string()),
        (
            "hidden",
            args.hidden
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("split", args.split.to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let dataset = Dataset::from_csv(&read_file(&args.dataset)?)
        .map_err(|e| input_error(format!("{}: {e}", args.dataset.display())))?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        hidden: args.hidden.clone(),
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        split_ratio: args.split,
        gamma: args.gamma,
        alpha: None,
        seed: args.seed,
    };
    let (model, report) = train(&dataset, &cfg).map_err(input_error)?;
    save_model(&model, &args.out).map_err(model_error)?;
    println!("{}", dataset.distribution_summary());
    print!("{}", report.to_table());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    /// Trained model file.
    model: PathBuf,
    /// Labeled CSV to score against.
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "eval".into()),
        ("model", args.model.display().to_string()),
        ("dataset", args.dataset.display().to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let model = load_model_file(&args.model)?;
    let dataset = Dataset::from_csv(&read_file(&args.dataset)?)
        .map_err(|e| input_error(format!("{}: {e}", args.dataset.display())))?;
    require_all_classes(&dataset).map_err(input_error)?;
    let report = evaluate(&model, &dataset);
    print!("{}", report.to_table());
    Ok(())
}

// ---------------------------------------------------------------------------
// predict

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    model: PathBuf,
    /// Unlabeled feature CSV (header f1..f6).
    features: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "predict".into()),
        ("model", args.model.display().to_string()),
        ("features", args.features.display().to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let model = load_model_file(&args.model)?;
    let rows = read_features_csv(&read_file(&args.features)?)
        .map_err(|e| input_error(format!("{}: {e}", args.features.display())))?;
    let mut out = String::new();
    for row in rows {
        let (class, probs) = model.predict(&row);
        let _ = writeln!(
            out,
            "{class} {:.6} {:.6} {:.6}",
            probs[0], probs[1], probs[2]
        );
    }
    print!("{out}");
    Ok(())
}

// ---------------------------------------------------------------------------
// ground

#[derive(Args)]
struct GroundArgs {
    /// Program file to ground.
    input: PathBuf,
    /// Accept reserved fresh_pred_ names (programs this tool produced).
    #[arg(long)]
    allow_reserved: bool,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    /// Work-unit budget.
    #[arg(long)]
    work_limit: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_ground(args: GroundArgs) -> Result<(), CliError> {
    echo_config(&[
        ("command", "ground".into()),
        ("input", args.input.display().to_string()),
        ("allow_reserved", args.allow_reserved.to_string()),
        (
            "timeout",
            args.timeout.map_or("none".into(), |t| t.to_string()),
        ),
        (
            "work_limit",
            args.work_limit.map_or("none".into(), |w| w.to_string()),
        ),
        ("seed", args.seed.to_string()),
    ]);
    let program = load_program(&args.input, args.allow_reserved)?;
    let cfg = GroundConfig {
        work_limit: args.work_limit,
        timeout: args.timeout.map(Duration::from_secs),
        collect_ground_rules: false,
    };
    let result = match ground_program(&program, &cfg) {
        Ok(result) => result,
        Err(GroundError::Timeout) => {
            return Err(oracle_error("grounding exceeded its time or work budget"));
        }
        Err(e) => return Err(input_error(format!("{}: {e}", args.input.display()))),
    };
    let mut out = String::new();
    let mut visible = 0usize;
    for atom in result.visible_atoms() {
        let _ = writeln!(out, "{atom}.");
        visible += 1;
    }
    print!("{out}");
    eprintln!(
        "stats: atoms={} visible={visible} violated_constraints={} work={}",
        result.atoms.len(),
        result.violated_constraints,
        result.work
    );
    Ok(())
}
