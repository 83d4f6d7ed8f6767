use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, ChatBackend, Message};
use super::ir::{parse_ir_lenient, validate_ir, Diagnostic, Ir};
use super::prompt::{feedback_message, intent_message, system_prompts, BackendConfig, PromptError};
use crate::net::Snmt;

const REPAIR_REQUEST: &str = "Your reply did not contain a valid IR object. Reply with the IR JSON object only.";
const TRANSPORT_RETRIES: usize = 2;

#[derive(Debug, Error)]
pub enum ComprehendError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend output is not a valid IR: {raw}")]
    Malformed { raw: String },
    #[error("{rounds} feedback rounds used up; enter the IR manually")]
    RoundsExhausted { rounds: u32 },
}

/// One request and reply of a comprehension session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub slice: usize,
    pub request: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comprehension {
    pub ir: Ir,
    pub diagnostics: Vec<Diagnostic>,
    /// 0 for the first answer, then one more per feedback round.
    pub round: u32,
    pub slices_used: usize,
    pub transcript: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub prior: Ir,
    pub feedback: String,
    pub intent: String,
    pub round: u32,
}

fn call(backend: &dyn ChatBackend, messages: &[Message]) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(messages) {
            Err(e) if e.is_retryable() && attempt < TRANSPORT_RETRIES => attempt += 1,
            other => return other,
        }
    }
}

/// Asks once, then once more with a repair request if the reply holds no IR.
fn ask_ir(backend: &dyn ChatBackend, mut messages: Vec<Message>, slice: usize, log: &mut Vec<Exchange>) -> Result<Ir, ComprehendError> {
    let request = messages.last().map(|m| m.content.clone()).unwrap_or_default();
    let reply = call(backend, &messages)?;
    log.push(Exchange { slice, request, reply: reply.clone() });
    if let Some(ir) = parse_ir_lenient(&reply) {
        return Ok(ir);
    }
    messages.push(Message { role: super::backend::Role::Assistant, content: reply });
    messages.push(Message::user(REPAIR_REQUEST));
    let again = call(backend, &messages)?;
    log.push(Exchange { slice, request: REPAIR_REQUEST.into(), reply: again.clone() });
    parse_ir_lenient(&again).ok_or(ComprehendError::Malformed { raw: again })
}

/// Keeps endpoints already resolved by an earlier slice.
fn carry(partial: Option<&Ir>, mut ir: Ir) -> Ir {
    if let Some(p) = partial {
        if p.source.is_resolved() && !ir.source.is_resolved() {
            ir.source = p.source.clone();
        }
        if p.destination.is_resolved() && !ir.destination.is_resolved() {
            ir.destination = p.destination.clone();
        }
    }
    ir
}

fn over_slices(
    snmt: &Snmt,
    cfg: &BackendConfig,
    backend: &dyn ChatBackend,
    user: impl Fn(Option<&Ir>) -> String,
    round: u32,
) -> Result<Comprehension, ComprehendError> {
    let bundles = system_prompts(snmt, cfg)?;
    let mut log = Vec::new();
    let mut partial: Option<Ir> = None;
    let mut used = 0;
    for (k, b) in bundles.iter().enumerate() {
        used = k + 1;
        let messages = vec![Message::system(b.text()), Message::user(user(partial.as_ref()))];
        let ir = carry(partial.as_ref(), ask_ir(backend, messages, k, &mut log)?);
        let done = ir.is_resolved();
        partial = Some(ir);
        if done {
            break;
        }
    }
    let ir = partial.expect("at least one slice");
    Ok(Comprehension { diagnostics: validate_ir(&ir, snmt), ir, round, slices_used: used, transcript: log })
}

/// Translates an intent slice by slice until both endpoints resolve or the
/// slices run out. Unresolved endpoints stay marked and show up in the
/// diagnostics.
pub fn comprehend(intent: &str, backend: &dyn ChatBackend, snmt: &Snmt, cfg: &BackendConfig) -> Result<Comprehension, ComprehendError> {
    over_slices(snmt, cfg, backend, |partial| intent_message(intent, partial), 0)
}

/// Regenerates an IR from operator feedback.
pub fn refine(record: &FeedbackRecord, backend: &dyn ChatBackend, snmt: &Snmt, cfg: &BackendConfig) -> Result<Comprehension, ComprehendError> {
    if record.round >= cfg.max_rounds {
        return Err(ComprehendError::RoundsExhausted { rounds: cfg.max_rounds });
    }
    let round = record.round + 1;
    over_slices(snmt, cfg, backend, |_| feedback_message(&record.intent, &record.prior, &record.feedback, round), round)
}
