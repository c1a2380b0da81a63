//! Mixture-of-Agents: every proposer answers the same transcript, then a
//! synthesizer sees all candidates and gives the final reply.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentReply, ChatMessage, DialogAgent, ModelError, ModelErrorKind, TokenUsage};
use crate::players::llm::{ChatClient, LlmEndpointConfig};

pub const SYNTHESIZER_PROMPT: &str = include_str!("../../prompts/moa_synthesizer.txt");
pub const NO_RESPONSE: &str = "[no response]";

fn default_label() -> String {
    "Model {i}:".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoaConfig {
    pub proposers: Vec<LlmEndpointConfig>,
    pub synthesizer: LlmEndpointConfig,
    #[serde(default)]
    pub system_prompt: Option<String>,
    /// Heading of each candidate block; `{i}` is the 1-based proposer index.
    #[serde(default = "default_label")]
    pub label_template: String,
}

pub struct MoaPlayer {
    proposers: Vec<Box<dyn DialogAgent>>,
    synthesizer: Box<dyn DialogAgent>,
    system_prompt: String,
    label_template: String,
}

impl MoaPlayer {
    pub fn new(
        proposers: Vec<Box<dyn DialogAgent>>,
        synthesizer: Box<dyn DialogAgent>,
        system_prompt: Option<String>,
        label_template: Option<String>,
    ) -> Result<Self, ModelError> {
        if proposers.is_empty() {
            return Err(ModelError::new(ModelErrorKind::Config, "mixture of agents needs at least one proposer"));
        }
        Ok(MoaPlayer {
            proposers,
            synthesizer,
            system_prompt: system_prompt.unwrap_or_else(|| SYNTHESIZER_PROMPT.to_string()),
            label_template: label_template.unwrap_or_else(default_label),
        })
    }

    pub fn from_config(cfg: &MoaConfig) -> Result<Self, ModelError> {
        let proposers = cfg
            .proposers
            .iter()
            .map(|p| ChatClient::new(p.clone()).map(|c| Box::new(c) as Box<dyn DialogAgent>))
            .collect::<Result<Vec<_>, _>>()?;
        let synthesizer = Box::new(ChatClient::new(cfg.synthesizer.clone())?);
        Self::new(proposers, synthesizer, cfg.system_prompt.clone(), Some(cfg.label_template.clone()))
    }
}

/// The synthesizer's input: system prompt, the original context, then one
/// user message holding the labeled candidates in proposer order.
pub fn synthesis_messages(
    original: &[ChatMessage],
    candidates: &[Option<String>],
    system_prompt: &str,
    label_template: &str,
) -> Vec<ChatMessage> {
    let blocks: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let label = label_template.replace("{i}", &(i + 1).to_string());
            format!("{label}\n{}", c.as_deref().unwrap_or(NO_RESPONSE))
        })
        .collect();
    let mut msgs = Vec::with_capacity(original.len() + 2);
    msgs.push(ChatMessage::system(system_prompt));
    msgs.extend_from_slice(original);
    msgs.push(ChatMessage::user(blocks.join("\n\n")));
    msgs
}

fn add_usage(total: &mut Option<TokenUsage>, u: Option<TokenUsage>) {
    let Some(u) = u else { return };
    let t = total.get_or_insert_with(TokenUsage::default);
    for (acc, v) in [
        (&mut t.prompt_tokens, u.prompt_tokens),
        (&mut t.completion_tokens, u.completion_tokens),
        (&mut t.reasoning_tokens, u.reasoning_tokens),
    ] {
        if let Some(v) = v {
            *acc = Some(acc.unwrap_or(0) + v);
        }
    }
}

impl DialogAgent for MoaPlayer {
    fn reply(&mut self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        let results: Vec<Result<AgentReply, ModelError>> = thread::scope(|s| {
            let handles: Vec<_> = self.proposers.iter_mut().map(|p| s.spawn(move || p.reply(messages))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(ModelError::new(ModelErrorKind::Transport, "proposer panicked"))))
                .collect()
        });
        let mut usage = None;
        let candidates: Vec<Option<String>> = results
            .into_iter()
            .map(|r| {
                r.ok().map(|r| {
                    add_usage(&mut usage, r.usage);
                    r.content
                })
            })
            .collect();
        let synth_input = synthesis_messages(messages, &candidates, &self.system_prompt, &self.label_template);
        let mut reply = self.synthesizer.reply(&synth_input)?;
        add_usage(&mut usage, reply.usage);
        reply.usage = usage;
        Ok(reply)
    }

    fn label(&self) -> String {
        format!("moa({}x, {})", self.proposers.len(), self.synthesizer.label())
    }
}
