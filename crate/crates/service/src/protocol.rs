//! Wire messages exchanged with operator clients. Every frame carries one
//! UTF-8 JSON object whose `type` field names the message.

use serde::{Deserialize, Serialize};
use somnav_core::{ActionId, AgentMode, HelpReason, NodeId, Pose};

/// Operator to service. `seq` is optional and echoed back in the ack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetGoal {
        snapshot_id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    Command {
        action: ActionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    Resume {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    Pause {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    SaveSnapshot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    Freeze {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
}

impl ClientMessage {
    pub fn seq(&self) -> Option<u64> {
        match self {
            ClientMessage::SetGoal { seq, .. }
            | ClientMessage::Command { seq, .. }
            | ClientMessage::Resume { seq }
            | ClientMessage::Pause { seq }
            | ClientMessage::SaveSnapshot { seq }
            | ClientMessage::Freeze { seq } => *seq,
        }
    }
}

/// Per-cycle telemetry. `pose` and `observation` describe the robot after
/// the cycle's action; `current_node` is the node that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMessage {
    pub seq: u64,
    pub tick: u64,
    pub pose: Pose,
    pub mode: AgentMode,
    pub current_node: Option<NodeId>,
    pub goal_node: Option<NodeId>,
    pub plan_nodes: Vec<NodeId>,
    pub plan_actions: Vec<ActionId>,
    pub steps_taken: u32,
    pub initial_estimate: Option<u32>,
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMessage,
    UnknownSnapshot,
    MemoryPlastic,
    Internal,
}

/// Service to operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    State(StateMessage),
    HelpRequest {
        reason: HelpReason,
        at_node: NodeId,
        detail: String,
    },
    SnapshotSaved {
        snapshot_id: u64,
    },
    Ack {
        of_seq: Option<u64>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }
}

impl From<&somnav_core::HelpRequest> for ServerMessage {
    fn from(h: &somnav_core::HelpRequest) -> Self {
        ServerMessage::HelpRequest {
            reason: h.reason,
            at_node: h.at_node,
            detail: h.detail.clone(),
        }
    }
}

/// Parses one client frame. Failures carry a message fit for an
/// `error{malformed_message}` reply.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}
