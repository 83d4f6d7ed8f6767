use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ir::Ir;
use crate::net::{Snmt, SnmtEntry};

pub const PROMPT_VERSION: &str = "v1";
const OVERVIEW: &str = include_str!("../../prompts/overview.v1.txt");
const STEPS: &str = include_str!("../../prompts/steps.v1.txt");
const EXAMPLES: &str = include_str!("../../prompts/examples.v1.txt");
const FEEDBACK: &str = include_str!("../../prompts/feedback.v1.txt");
pub const SNMT_HEADER: &str = "### SNMT\n";

/// Share of the context budget the system prompt may fill.
const BUDGET_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Chat-completions URL; `ACLW_LLM_ENDPOINT` when unset.
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding the API key.
    pub key_env: String,
    /// Context budget in tokens.
    pub context_budget: usize,
    pub max_rounds: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { endpoint: None, model: "gpt-4o".into(), key_env: "ACLW_LLM_KEY".into(), context_budget: 16_000, max_rounds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("the SNMT is empty")]
    EmptySnmt,
    #[error("fixed prompt sections need {fixed} tokens, over the usable budget of {usable}")]
    BudgetTooSmall { fixed: usize, usable: usize },
    #[error("SNMT entry {name:?} needs {tokens} tokens but a slice holds {available}")]
    EntryTooLarge { name: String, tokens: usize, available: usize },
}

/// Rough token count: one token per four characters.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionKind {
    Overview,
    Snmt,
    Steps,
    Examples,
}

/// System prompt for one SNMT slice, as ordered sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sections: Vec<(SectionKind, String)>,
    pub entities: Vec<String>,
}

impl PromptBundle {
    pub fn text(&self) -> String {
        self.sections.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.text())
    }
}

/// `- name: gateway prefix; gateway prefix`
pub fn render_entry(e: &SnmtEntry) -> String {
    let pairs: Vec<String> = e.pairs.iter().map(|p| format!("{} {}", p.gateway, p.prefix)).collect();
    format!("- {}: {}\n", e.name, pairs.join("; "))
}

fn fixed_tokens() -> usize {
    // One separator per join between the four sections.
    estimate_tokens(OVERVIEW) + estimate_tokens(SNMT_HEADER) + estimate_tokens(STEPS) + estimate_tokens(EXAMPLES) + 3
}

fn slice_capacity(cfg: &BackendConfig) -> Result<usize, PromptError> {
    let usable = (cfg.context_budget as f64 * BUDGET_SHARE).floor() as usize;
    let fixed = fixed_tokens();
    if fixed >= usable {
        return Err(PromptError::BudgetTooSmall { fixed, usable });
    }
    Ok(usable - fixed)
}

/// Splits the SNMT into consecutive slices that each fit the budget next to
/// the fixed sections.
pub fn slice_snmt(snmt: &Snmt, cfg: &BackendConfig) -> Result<Vec<Vec<SnmtEntry>>, PromptError> {
    if snmt.is_empty() {
        return Err(PromptError::EmptySnmt);
    }
    let available = slice_capacity(cfg)?;
    let mut slices: Vec<Vec<SnmtEntry>> = Vec::new();
    let mut current: Vec<SnmtEntry> = Vec::new();
    let mut used = 0;
    for e in snmt.entries() {
        let t = estimate_tokens(&render_entry(e));
        if t > available {
            return Err(PromptError::EntryTooLarge { name: e.name.clone(), tokens: t, available });
        }
        if used + t > available {
            slices.push(std::mem::take(&mut current));
            used = 0;
        }
        used += t;
        current.push(e.clone());
    }
    slices.push(current);
    Ok(slices)
}

pub fn assemble_system_prompt(slice: &[SnmtEntry], cfg: &BackendConfig) -> Result<PromptBundle, PromptError> {
    if slice.is_empty() {
        return Err(PromptError::EmptySnmt);
    }
    let available = slice_capacity(cfg)?;
    let body: String = slice.iter().map(render_entry).collect();
    let tokens = estimate_tokens(&body);
    if tokens > available {
        let name = slice.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(", ");
        return Err(PromptError::EntryTooLarge { name, tokens, available });
    }
    Ok(PromptBundle {
        sections: vec![
            (SectionKind::Overview, OVERVIEW.to_string()),
            (SectionKind::Snmt, format!("{SNMT_HEADER}{body}")),
            (SectionKind::Steps, STEPS.to_string()),
            (SectionKind::Examples, EXAMPLES.to_string()),
        ],
        entities: slice.iter().map(|e| e.name.clone()).collect(),
    })
}

/// One bundle per slice of `snmt`.
pub fn system_prompts(snmt: &Snmt, cfg: &BackendConfig) -> Result<Vec<PromptBundle>, PromptError> {
    slice_snmt(snmt, cfg)?.iter().map(|s| assemble_system_prompt(s, cfg)).collect()
}

pub const INTENT_LABEL: &str = "Intent: ";
pub const PARTIAL_LABEL: &str = "Partial IR from earlier SNMT slices:";
pub const PRIOR_LABEL: &str = "Previous IR:";
pub const FEEDBACK_LABEL: &str = "Operator feedback:";

/// User message for an intent, carrying the IR built from earlier slices.
pub fn intent_message(intent: &str, partial: Option<&Ir>) -> String {
    let mut out = format!("{INTENT_LABEL}{intent}\n");
    if let Some(ir) = partial {
        out.push_str(&format!("{PARTIAL_LABEL}\n{}\n", ir.to_json()));
    }
    out
}

/// User message asking for a corrected IR.
pub fn feedback_message(intent: &str, prior: &Ir, feedback: &str, round: u32) -> String {
    format!("{FEEDBACK}Round: {round}\n{INTENT_LABEL}{intent}\n{PRIOR_LABEL}\n{}\n{FEEDBACK_LABEL} {feedback}\n", prior.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::GatewayPrefix;

    fn entry(i: usize) -> SnmtEntry {
        let i = i + 10;
        SnmtEntry {
            name: format!("Site {i}"),
            pairs: vec![GatewayPrefix { gateway: format!("R{i}@1").parse().unwrap(), prefix: format!("10.{i}.0.0/16").parse().unwrap() }],
        }
    }

    fn snmt(n: usize) -> Snmt {
        let entries: Vec<SnmtEntry> = (0..n).map(entry).collect();
        let finest = entries.iter().map(|e| e.pairs[0].prefix).collect();
        Snmt::new(entries, finest)
    }

    #[test]
    fn sections_in_order() {
        let b = assemble_system_prompt(&[entry(1)], &BackendConfig::default()).unwrap();
        let kinds: Vec<SectionKind> = b.sections.iter().map(|(k, _)| *k).collect();
        assert_eq!(kinds, [SectionKind::Overview, SectionKind::Snmt, SectionKind::Steps, SectionKind::Examples]);
        let text = b.text();
        assert!(text.contains("non-existent elements") && text.contains("incorrect element dependency"));
        assert!(text.find("Step 1").unwrap() < text.find("Step 5").unwrap());
        assert!(b.tokens() <= BackendConfig::default().context_budget);
    }

    #[test]
    fn three_slices_partition_the_table() {
        let s = snmt(30);
        let per_entry = estimate_tokens(&render_entry(&entry(10)));
        let budget = ((fixed_tokens() + 10 * per_entry) as f64 / BUDGET_SHARE).ceil() as usize + 1;
        let cfg = BackendConfig { context_budget: budget, ..Default::default() };
        let slices = slice_snmt(&s, &cfg).unwrap();
        assert_eq!(slices.len(), 3);
        let joined: Vec<SnmtEntry> = slices.concat();
        assert_eq!(joined, s.entries());
        for sl in &slices {
            assert!(assemble_system_prompt(sl, &cfg).unwrap().tokens() <= budget);
        }
    }

    #[test]
    fn empty_and_oversized() {
        assert_eq!(slice_snmt(&snmt(0), &BackendConfig::default()), Err(PromptError::EmptySnmt));
        let tiny = BackendConfig { context_budget: 10, ..Default::default() };
        assert!(matches!(slice_snmt(&snmt(1), &tiny), Err(PromptError::BudgetTooSmall { .. })));
        let budget = ((fixed_tokens() + 2) as f64 / BUDGET_SHARE).ceil() as usize + 1;
        let cramped = BackendConfig { context_budget: budget, ..Default::default() };
        assert!(matches!(slice_snmt(&snmt(1), &cramped), Err(PromptError::EntryTooLarge { .. })));
    }
}
