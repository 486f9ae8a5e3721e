//! Judges answer yes/no or categorical questions about documents and
//! responses, either through a remote model or with local heuristics.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::remote::{ChatMessage, RemoteClient, RemoteError};

pub const DEFAULT_ERROR_PHRASES: &[&str] = &["not found", "invalid", "unauthorized", "error occurred"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(#[from] RemoteError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicJudge {
    /// Case-insensitive phrases that mark a response body as an error.
    pub error_phrases: Vec<String>,
}

impl Default for HeuristicJudge {
    fn default() -> Self {
        HeuristicJudge {
            error_phrases: DEFAULT_ERROR_PHRASES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl HeuristicJudge {
    pub fn with_extra_phrases<I, S>(mut self, phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.error_phrases.extend(phrases.into_iter().map(Into::into));
        self
    }

    pub fn matches_error_phrase(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.error_phrases
            .iter()
            .find(|p| lower.contains(&p.to_lowercase()))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub enum JudgeBackend {
    Heuristic(HeuristicJudge),
    /// The heuristic is used when the remote call fails.
    Remote { client: RemoteClient, fallback: HeuristicJudge },
}

impl Default for JudgeBackend {
    fn default() -> Self {
        JudgeBackend::Heuristic(HeuristicJudge::default())
    }
}

impl JudgeBackend {
    pub fn heuristic() -> Self {
        Self::default()
    }

    pub fn remote(client: RemoteClient) -> Self {
        JudgeBackend::Remote { client, fallback: HeuristicJudge::default() }
    }

    pub fn heuristic_judge(&self) -> &HeuristicJudge {
        match self {
            JudgeBackend::Heuristic(h) => h,
            JudgeBackend::Remote { fallback, .. } => fallback,
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, JudgeBackend::Remote { .. })
    }

    /// Sends a single user prompt and returns the reply text. Heuristic
    /// backends have no model to ask.
    pub(crate) fn ask(&self, prompt: String, response_format: Option<&Value>) -> Option<Result<String, JudgeError>> {
        match self {
            JudgeBackend::Heuristic(_) => None,
            JudgeBackend::Remote { client, .. } => Some(
                client
                    .chat(&[ChatMessage::user(prompt)], response_format)
                    .map(|r| r.content)
                    .map_err(JudgeError::from),
            ),
        }
    }
}
