use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six review perspectives. Declaration order is the canonical order
/// used for result ordering and tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Security,
    CodeCommunication,
    PerformanceOptimization,
    CodeMaintainability,
    Error,
    BusinessLogicValidation,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Security,
        AgentKind::CodeCommunication,
        AgentKind::PerformanceOptimization,
        AgentKind::CodeMaintainability,
        AgentKind::Error,
        AgentKind::BusinessLogicValidation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Security => "security",
            AgentKind::CodeCommunication => "code-communication",
            AgentKind::PerformanceOptimization => "performance-optimization",
            AgentKind::CodeMaintainability => "code-maintainability",
            AgentKind::Error => "error",
            AgentKind::BusinessLogicValidation => "business-logic-validation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            AgentKind::Security => "Security",
            AgentKind::CodeCommunication => "Code Communication",
            AgentKind::PerformanceOptimization => "Performance Optimization",
            AgentKind::CodeMaintainability => "Code Maintainability",
            AgentKind::Error => "Error",
            AgentKind::BusinessLogicValidation => "Business Logic Validation",
        }
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            AgentKind::Security | AgentKind::Error => 0.7,
            _ => 0.6,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown agent {0:?}")]
pub struct UnknownAgent(pub String);

impl FromStr for AgentKind {
    type Err = UnknownAgent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| UnknownAgent(s.to_string()))
    }
}

/// Per-agent tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub kind: AgentKind,
    /// In (0, 1].
    pub weightage: f64,
    /// In [0, 1].
    pub confidence_threshold: f64,
}

impl AgentProfile {
    pub fn default_for(kind: AgentKind) -> Self {
        Self {
            kind,
            weightage: 1.0,
            confidence_threshold: kind.default_threshold(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.as_str().parse::<AgentKind>().unwrap(), k);
        }
        assert_eq!(
            "Business_Logic_Validation".parse::<AgentKind>().unwrap(),
            AgentKind::BusinessLogicValidation
        );
        assert!("style".parse::<AgentKind>().is_err());
    }

    #[test]
    fn default_thresholds() {
        assert_eq!(AgentKind::Security.default_threshold(), 0.7);
        assert_eq!(AgentKind::Error.default_threshold(), 0.7);
        assert_eq!(AgentKind::CodeMaintainability.default_threshold(), 0.6);
    }
}
