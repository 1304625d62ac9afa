//! Co-evolution toolkit for textual DSLs.
//!
//! When the grammar of a textual DSL evolves, instance files that conformed to
//! the old grammar may stop conforming to the new one. This crate provides the
//! pieces needed to migrate instances and to judge how well a migration went:
//!
//! 1. [`grammar`]: parse a practical subset of the Xtext grammar language
//!    into an AST and serialize it back.
//! 2. [`diff`]: compute a classified change list between two grammar
//!    versions (add/delete/rename/modify, breaking/non-breaking).
//! 3. [`instance`]: lossless lexing of instance text (comments and layout
//!    kept as trivia), chart-based conformance checking with line-level error
//!    localization, and extraction of the human-oriented information profile.
//! 4. [`migrate`]: two migration backends: a chat-completion session
//!    protocol with deterministic record/replay, and a rule-based in-situ
//!    editor for a defined subset of grammar changes.
//! 5. [`metrics`]: evolution precision/recall, grammar error rate, and
//!    comment/format retention rates, per run and aggregated.
//! 6. [`runner`]: manifest-driven orchestration (migrate, evaluate,
//!    aggregate) with CSV/Markdown report emission.

pub mod diff;
pub mod grammar;
pub mod instance;
pub mod metrics;
pub mod migrate;
pub mod runner;

pub use diff::{
    classify_impact, diff_grammars, summarize_delta, ChangeOperation, ChangeSubject, DeltaSummary,
    GrammarChange, GrammarDelta, Impact,
};
pub use grammar::{
    parse_grammar, serialize_grammar, AssignmentOperator, BodyNode, Cardinality, GrammarAst,
    GrammarError, NodePath, RuleDef, RuleKind,
};
pub use instance::{
    check_conformance, extract_human_info, lex_instance, lex_instance_lenient, ConformanceError,
    ConformanceReport, HumanInfoProfile, LexError, LosslessInstance, Token, TokenKind, TriviaPiece,
};
pub use metrics::{
    aggregate, compute_correctness, compute_line_req, compute_preservation, AggregateMetrics,
    CommentMatchMode, CorrectnessCounts, PreservationCounts, RatioSet, RunMetrics,
};
pub use migrate::llm::{
    run_migration, run_repetitions, ChatProvider, ChatResponse, HttpChatProvider, Message,
    MigrateError, MigrationSession, PromptConfig, ProviderError, RecordingProvider, ReplayProvider,
    Role, ScriptedProvider, SessionOutcome, Transcript, TranscriptStore,
};
pub use migrate::rules::{apply_edits, plan_edits, Edit, EditKind, EditScript, RulesError};
pub use runner::{
    render_report, run_experiment, Backend, CaseManifest, CaseSpec, ExperimentOptions,
    ExperimentReport, RunnerError,
};
