//! The `coevolve` binary: co-evolution toolkit for textual DSLs.
//!
//! Subcommands: `diff` two grammar versions, `check` an instance against a
//! grammar, `migrate` an instance (chat backend, recorded replay, or the
//! rule-based editor), `eval` a candidate against the evolved grammar, and
//! `run-experiment` over a case manifest.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coevolve_core::migrate::llm::HttpProviderConfig;
use coevolve_core::runner::report;
use coevolve_core::{
    apply_edits, check_conformance, diff_grammars, lex_instance, lex_instance_lenient, metrics,
    parse_grammar, plan_edits, run_experiment, run_repetitions, Backend, CaseManifest,
    ChatProvider, CommentMatchMode, ExperimentOptions, GrammarAst, HttpChatProvider,
    LosslessInstance, PromptConfig, RecordingProvider, ReplayProvider,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "coevolve",
    version,
    about = "Co-evolve textual DSL instances with their grammar"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classified change list between two grammar versions
    Diff {
        /// Old grammar file
        old: PathBuf,
        /// New grammar file
        new: PathBuf,
        #[arg(long, value_enum, default_value_t = DiffFormat::Table)]
        format: DiffFormat,
    },
    /// Check an instance against a grammar (exit 0 iff it conforms)
    Check {
        grammar: PathBuf,
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = CheckFormat::Text)]
        format: CheckFormat,
    },
    /// Migrate an instance to the evolved grammar
    Migrate(MigrateArgs),
    /// Evaluate a candidate evolved instance
    Eval(EvalArgs),
    /// Run migrate + evaluate + aggregate over a case manifest
    RunExperiment(RunExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DiffFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFormat {
    Csv,
    Json,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Replay,
    Rules,
}

impl From<BackendArg> for Backend {
    fn from(value: BackendArg) -> Backend {
        match value {
            BackendArg::Http => Backend::Http,
            BackendArg::Replay => Backend::Replay,
            BackendArg::Rules => Backend::Rules,
        }
    }
}

#[derive(Args)]
struct MigrateArgs {
    #[arg(long)]
    grammar_old: PathBuf,
    #[arg(long)]
    grammar_new: PathBuf,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    /// Independent repetitions (chat backends; the rule-based backend is
    /// deterministic and runs once)
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
    /// Provider/prompt configuration file (JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transcript store (recorded by http, read by replay)
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Original instance (conforming to the old grammar)
    #[arg(long)]
    original: PathBuf,
    /// Candidate evolved instance
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long)]
    grammar_new: PathBuf,
    /// Old grammar; improves tokenization of the original when given
    #[arg(long)]
    grammar_old: Option<PathBuf>,
    /// Reference evolved instance (recorded in the JSON output only; the
    /// reference may contain unrelated human edits, so it is never scored)
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalFormat::Json)]
    format: EvalFormat,
    /// Require comments to survive on their aligned line, not just anywhere
    #[arg(long)]
    strict_comment_position: bool,
}

#[derive(Args)]
struct RunExperimentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the manifest's repetition count
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Recompute cases whose artifacts already exist
    #[arg(long)]
    force: bool,
    #[arg(long)]
    strict_comment_position: bool,
}

/// Tool configuration file: provider endpoint/credentials and prompt
/// overrides. Credentials themselves come from the environment variable
/// named by `api_key_env`.
#[derive(Debug, Default, Deserialize)]
struct ToolConfig {
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    /// Identity used for transcript keys; defaults to the model name.
    provider_id: Option<String>,
    max_output_tokens: Option<u32>,
    final_prompt: Option<String>,
    hint_grammar_old: Option<String>,
    hint_grammar_new: Option<String>,
    hint_instance: Option<String>,
}

impl ToolConfig {
    fn load(path: Option<&Path>) -> Result<ToolConfig> {
        match path {
            None => Ok(ToolConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))
            }
        }
    }

    fn prompt_config(&self) -> PromptConfig {
        let mut config = PromptConfig::default();
        if let Some(v) = &self.final_prompt {
            config.final_prompt = v.clone();
        }
        if let Some(v) = &self.hint_grammar_old {
            config.hint_grammar_old = v.clone();
        }
        if let Some(v) = &self.hint_grammar_new {
            config.hint_grammar_new = v.clone();
        }
        if let Some(v) = &self.hint_instance {
            config.hint_instance = v.clone();
        }
        if let Some(v) = self.max_output_tokens {
            config.max_output_tokens = v;
        }
        config
    }

    fn provider_id(&self) -> String {
        self.provider_id
            .clone()
            .or_else(|| self.model.clone())
            .unwrap_or_else(|| "default".to_string())
    }

    fn http_provider(&self) -> Result<HttpChatProvider> {
        let endpoint = self
            .endpoint
            .clone()
            .context("http backend requires `endpoint` in the config file")?;
        let model = self
            .model
            .clone()
            .context("http backend requires `model` in the config file")?;
        Ok(HttpChatProvider::new(HttpProviderConfig {
            endpoint,
            model,
            api_key_env: self
                .api_key_env
                .clone()
                .unwrap_or_else(|| "COEVOLVE_API_KEY".to_string()),
        }))
    }
}

fn build_provider(
    backend: Backend,
    config: &ToolConfig,
    transcripts: Option<&Path>,
) -> Result<Option<Box<dyn ChatProvider>>> {
    match backend {
        Backend::Rules => Ok(None),
        Backend::Http => {
            let http = config.http_provider()?;
            match transcripts {
                Some(path) => {
                    let recording = RecordingProvider::create(http, path)
                        .with_context(|| format!("cannot open {}", path.display()))?;
                    Ok(Some(Box::new(recording)))
                }
                None => Ok(Some(Box::new(http))),
            }
        }
        Backend::Replay => {
            let path = transcripts.context("replay backend requires --transcripts FILE")?;
            let replay = ReplayProvider::from_file(config.provider_id(), path)
                .with_context(|| format!("cannot load transcripts from {}", path.display()))?;
            Ok(Some(Box::new(replay)))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_grammar(path: &Path) -> Result<GrammarAst> {
    parse_grammar(&read(path)?).with_context(|| format!("cannot parse {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Diff { old, new, format } => cmd_diff(&old, &new, format),
        Command::Check {
            grammar,
            instance,
            format,
        } => cmd_check(&grammar, &instance, format),
        Command::Migrate(args) => cmd_migrate(args),
        Command::Eval(args) => cmd_eval(args),
        Command::RunExperiment(args) => cmd_run_experiment(args),
    }
}

fn cmd_diff(old: &Path, new: &Path, format: DiffFormat) -> Result<ExitCode> {
    let old_ast = load_grammar(old)?;
    let new_ast = load_grammar(new)?;
    let delta = diff_grammars(&old_ast, &new_ast);
    let summary = coevolve_core::summarize_delta(&delta);
    match format {
        DiffFormat::Json => {
            let value = serde_json::json!({ "summary": summary, "delta": delta });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        DiffFormat::Table => {
            let types: Vec<String> = summary
                .primary_operation_types
                .iter()
                .map(|t| t.to_string())
                .collect();
            println!(
                "{:<16} {:>14} {:>10} {:>14}  Primary Operation Types",
                "Grammar Pair", "Total Changes", "Breaking", "Non-breaking"
            );
            println!(
                "{:<16} {:>14} {:>10} {:>14}  {}",
                "old -> new",
                summary.total,
                summary.breaking,
                summary.non_breaking,
                types.join(", ")
            );
            if !delta.changes.is_empty() {
                println!();
                println!(
                    "{:<8} {:<10} {:<22} {:<13} detail",
                    "op", "subject", "rule", "impact"
                );
                for change in &delta.changes {
                    println!(
                        "{:<8} {:<10} {:<22} {:<13} {}",
                        change.operation.to_string(),
                        change.subject.to_string(),
                        change.rule_name,
                        format!("{:?}", change.impact),
                        change.detail
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(grammar: &Path, instance: &Path, format: CheckFormat) -> Result<ExitCode> {
    let grammar_ast = load_grammar(grammar)?;
    let text = read(instance)?;
    let lexed = lex_instance_lenient(&text, &grammar_ast);
    let report = check_conformance(&lexed, &grammar_ast);
    match format {
        CheckFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        CheckFormat::Text => {
            if report.conforms {
                println!("{} conforms to {}", instance.display(), grammar.display());
            } else {
                println!(
                    "{} does not conform to {} ({} error{})",
                    instance.display(),
                    grammar.display(),
                    report.errors.len(),
                    if report.errors.len() == 1 { "" } else { "s" }
                );
                for error in &report.errors {
                    println!(
                        "  {}:{}: {} (expected {})",
                        error.line,
                        error.col,
                        error.message,
                        error.expected.join(", ")
                    );
                }
                let lines: Vec<String> = report.error_lines.iter().map(|l| l.to_string()).collect();
                println!("  error lines: {}", lines.join(", "));
            }
        }
    }
    Ok(if report.conforms {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_migrate(args: MigrateArgs) -> Result<ExitCode> {
    let config = ToolConfig::load(args.config.as_deref())?;
    let grammar_old_text = read(&args.grammar_old)?;
    let grammar_new_text = read(&args.grammar_new)?;
    let instance_text = read(&args.instance)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;

    let backend: Backend = args.backend.into();
    match backend {
        Backend::Rules => {
            let grammar_old = parse_grammar(&grammar_old_text).context("old grammar")?;
            let grammar_new = parse_grammar(&grammar_new_text).context("new grammar")?;
            let instance = lex_instance(&instance_text, &grammar_old)
                .context("instance does not lex under the old grammar")?;
            let delta = diff_grammars(&grammar_old, &grammar_new);
            let script = plan_edits(&instance, &delta, &grammar_old, &grammar_new)?;
            let candidate = apply_edits(&instance, &script)?;
            let candidate_path = args.out.join("candidate.txt");
            std::fs::write(&candidate_path, &candidate)?;
            std::fs::write(
                args.out.join("editscript.json"),
                format!("{}\n", serde_json::to_string_pretty(&script)?),
            )?;
            println!("wrote {}", candidate_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Backend::Http | Backend::Replay => {
            let provider = build_provider(backend, &config, args.transcripts.as_deref())?
                .expect("chat backends have a provider");
            let prompt_config = config.prompt_config();
            let mut failures = 0usize;
            run_repetitions(
                &grammar_old_text,
                &grammar_new_text,
                &instance_text,
                &prompt_config,
                provider.as_ref(),
                args.reps.max(1),
                |run, result| {
                    let run_dir = args.out.join(format!("run_{:02}", run + 1));
                    let _ = std::fs::create_dir_all(&run_dir);
                    match result {
                        Ok(session) => {
                            let _ = std::fs::write(
                                run_dir.join("session.json"),
                                serde_json::to_string_pretty(session).unwrap_or_default(),
                            );
                            let _ = std::fs::write(run_dir.join("candidate.txt"), &session.output);
                            println!("run {:02}: ok ({:.2}s)", run + 1, session.wall_clock_s);
                        }
                        Err(error) => {
                            let _ = std::fs::write(run_dir.join("error.txt"), format!("{error}\n"));
                            eprintln!("run {:02}: {error}", run + 1);
                            failures += 1;
                        }
                    }
                },
            );
            Ok(if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let grammar_new = load_grammar(&args.grammar_new)?;
    let original_text = read(&args.original)?;
    let candidate = read(&args.candidate)?;
    let original: LosslessInstance = match &args.grammar_old {
        Some(path) => {
            let grammar_old = load_grammar(path)?;
            lex_instance(&original_text, &grammar_old)
                .context("original does not lex under the old grammar")?
        }
        None => lex_instance_lenient(&original_text, &grammar_new),
    };
    let mode = if args.strict_comment_position {
        CommentMatchMode::Aligned
    } else {
        CommentMatchMode::Anywhere
    };
    let run = metrics::evaluate_candidate(&original, &candidate, &grammar_new, mode, 0.0);
    match args.format {
        EvalFormat::Json => {
            let mut value = serde_json::to_value(run)?;
            if let Some(reference) = &args.reference {
                let text = read(reference)?;
                value["reference"] = serde_json::json!({
                    "path": reference.display().to_string(),
                    "lines": text.lines().count(),
                });
            }
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        EvalFormat::Csv => print!("{}", report::render_run_csv(&run)),
        EvalFormat::Md => print!("{}", report::render_run_md(&run)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run_experiment(args: RunExperimentArgs) -> Result<ExitCode> {
    let config = ToolConfig::load(args.config.as_deref())?;
    let manifest = CaseManifest::load(&args.manifest)?;
    let backend: Backend = args.backend.into();
    let provider = build_provider(backend, &config, args.transcripts.as_deref())?;
    let mut options = ExperimentOptions::new(&args.out, backend);
    options.repetitions = args.reps;
    options.force = args.force;
    if args.strict_comment_position {
        options.comment_match_mode = CommentMatchMode::Aligned;
    }
    let report = run_experiment(&manifest, provider.as_deref(), &options)?;
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    if report.all_cases_succeeded() {
        Ok(ExitCode::SUCCESS)
    } else {
        for failure in &report.failures {
            eprintln!("case {} failed: {}", failure.case, failure.message);
        }
        bail!("{} case(s) aborted", report.failures.len());
    }
}
