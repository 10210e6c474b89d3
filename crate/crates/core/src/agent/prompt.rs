//! Four-element prompt templates and the prompting techniques wrapped around
//! them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::rag::RetrievalHit;

/// Appended to the instruction for chain-of-thought variants.
pub const COT_CUE: &str = "Let's think step by step.";

const SECTION_SEP: &str = "\n\n";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_indicator: Option<String>,
}

impl PromptTemplate {
    pub fn new(instruction: impl Into<String>) -> Self {
        PromptTemplate {
            instruction: instruction.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.instruction.trim().is_empty() {
            return Err(AgentError::Config("prompt instruction is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Technique {
    ZeroShot,
    FewShot,
    Cot,
    CotSelfConsistency,
}

impl Technique {
    pub fn is_cot(self) -> bool {
        matches!(self, Technique::Cot | Technique::CotSelfConsistency)
    }
}

/// `n_examples` is the few-shot count. Chain-of-thought variants may also
/// carry examples; zero-shot never does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechniqueConfig {
    pub technique: Technique,
    pub n_examples: usize,
    pub n_paths: usize,
}

impl Default for TechniqueConfig {
    fn default() -> Self {
        TechniqueConfig::zero_shot()
    }
}

impl TechniqueConfig {
    pub fn zero_shot() -> Self {
        TechniqueConfig {
            technique: Technique::ZeroShot,
            n_examples: 0,
            n_paths: 1,
        }
    }

    pub fn few_shot(n_examples: usize) -> Self {
        TechniqueConfig {
            technique: Technique::FewShot,
            n_examples,
            n_paths: 1,
        }
    }

    pub fn cot(n_examples: usize) -> Self {
        TechniqueConfig {
            technique: Technique::Cot,
            n_examples,
            n_paths: 1,
        }
    }

    pub fn self_consistency(n_examples: usize, n_paths: usize) -> Self {
        TechniqueConfig {
            technique: Technique::CotSelfConsistency,
            n_examples,
            n_paths,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self.technique {
            Technique::ZeroShot if self.n_examples > 0 => {
                Err(AgentError::Config("zero-shot prompts take no examples".into()))
            }
            Technique::FewShot if self.n_examples == 0 => {
                Err(AgentError::Config("few-shot needs n_examples >= 1".into()))
            }
            Technique::CotSelfConsistency if self.n_paths < 3 || self.n_paths % 2 == 0 => Err(AgentError::Config(
                format!("self-consistency needs an odd n_paths >= 3, got {}", self.n_paths),
            )),
            _ => Ok(()),
        }
    }

    /// Number of backend samples per prompt.
    pub fn paths(&self) -> usize {
        if self.technique == Technique::CotSelfConsistency {
            self.n_paths
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub output: String,
}

/// Few-shot examples keyed by subtask kind.
pub type ExampleBank = BTreeMap<String, Vec<Example>>;

/// Assembles the prompt in a fixed order: instruction (plus the CoT cue),
/// context with retrieved chunks, examples, input data, output indicator.
/// Absent elements leave no trace.
pub fn render_prompt(
    template: &PromptTemplate,
    technique: &TechniqueConfig,
    retrieved: &[RetrievalHit],
    examples: &[Example],
) -> Result<String, AgentError> {
    template.validate()?;
    technique.validate()?;
    let mut sections = Vec::new();

    let mut instruction = template.instruction.trim_end().to_string();
    if technique.technique.is_cot() {
        instruction.push('\n');
        instruction.push_str(COT_CUE);
    }
    sections.push(instruction);

    let mut context = Vec::new();
    if let Some(c) = template.context.as_deref().filter(|c| !c.trim().is_empty()) {
        context.push(c.trim_end().to_string());
    }
    for h in retrieved {
        context.push(format!("[{}] {}", h.chunk_ref(), h.text));
    }
    if !context.is_empty() {
        sections.push(context.join("\n"));
    }

    if technique.technique != Technique::ZeroShot && technique.n_examples > 0 {
        if examples.is_empty() {
            return Err(AgentError::Config("few-shot prompting requested without examples".into()));
        }
        let shown: Vec<String> = examples
            .iter()
            .take(technique.n_examples)
            .enumerate()
            .map(|(i, e)| format!("Example {}:\nInput: {}\nOutput: {}", i + 1, e.input, e.output))
            .collect();
        sections.push(shown.join("\n"));
    }

    for part in [&template.input_data, &template.output_indicator] {
        if let Some(p) = part.as_deref().filter(|p| !p.trim().is_empty()) {
            sections.push(p.trim_end().to_string());
        }
    }
    Ok(sections.join(SECTION_SEP))
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Majority vote over normalised answers; returns the earliest original
/// member of the winning class. Ties go to the class seen first.
pub fn self_consistency_vote(answers: &[String]) -> Option<&str> {
    let mut classes: Vec<(String, usize, usize)> = Vec::new();
    for (i, a) in answers.iter().enumerate() {
        let n = normalize(a);
        match classes.iter_mut().find(|c| c.0 == n) {
            Some(c) => c.1 += 1,
            None => classes.push((n, 1, i)),
        }
    }
    let best = classes.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))?;
    Some(&answers[best.2])
}
