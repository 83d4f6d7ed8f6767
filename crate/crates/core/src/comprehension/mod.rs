//! Natural-language intents to intermediate representation and rules.

mod backend;
mod comprehend;
pub mod fuzzy;
mod ir;
mod mock;
mod prompt;

pub use backend::{reply_content, BackendError, ChatBackend, LiveBackend, Message, Role};
pub use comprehend::{comprehend, refine, ComprehendError, Comprehension, Exchange, FeedbackRecord};
pub use ir::{
    distinct_rules, generate_rules, parse_ir_lenient, validate_ir, AppPair, ApplicationField, Diagnostic, DiagnosticKind, Endpoint,
    Field, GeneratedRule, Ir, IrAction, RuleGenError, ANY,
};
pub use mock::{parse_slice, MockBackend};
pub use prompt::{
    assemble_system_prompt, estimate_tokens, feedback_message, intent_message, render_entry, slice_snmt, system_prompts, BackendConfig,
    PromptBundle, PromptError, SectionKind, PROMPT_VERSION,
};
