//! Prompt text for the review agents.
//!
//! Every user prompt starts with a `task: <agent>.<step>` line so scripted
//! providers can key responses on the step.

use super::kind::AgentKind;
use super::xml::REVIEW_SKELETON;

pub fn focus(agent: AgentKind) -> &'static str {
    match agent {
        AgentKind::Security => {
            "security weaknesses: injection, missing or weak input validation, hardcoded secrets, \
             unsafe deserialization, vulnerable dependencies and broken access checks"
        }
        AgentKind::CodeCommunication => {
            "how the code explains itself: missing or stale docstrings and comments, unclear naming \
             in public interfaces, and missing or inconsistent logging"
        }
        AgentKind::PerformanceOptimization => {
            "performance: algorithmic complexity, redundant work in loops, inefficient data access \
             and database queries, and avoidable memory use"
        }
        AgentKind::CodeMaintainability => {
            "maintainability: readability, duplication, cohesion, reuse of existing helpers and \
             overall code quality"
        }
        AgentKind::Error => {
            "defects: logic mistakes, runtime failures, unhandled edge cases and errors that callers \
             of the changed code may now hit"
        }
        AgentKind::BusinessLogicValidation => {
            "whether the change does what the linked story and design notes ask for, and whether any \
             stated requirement is missed or contradicted"
        }
    }
}

pub fn system_prompt(agent: AgentKind) -> String {
    format!(
        "You are the {} reviewer of a pull request. Look only at {}. \
         Refer to code by repository-relative file path and by line number in the new version of the file.",
        agent.title(),
        focus(agent)
    )
}

pub fn single_pass_prompt(agent: AgentKind, context: &str) -> String {
    format!(
        "task: {agent}.review\n\n{context}\n\
         Review the diff above. Think it through in plain prose. For each finding give the file path, \
         the new-file line number, what is wrong, a suggested fix if you have one, a category, and how \
         confident you are between 0 and 1."
    )
}

pub fn reflection_prompt(agent: AgentKind, context: &str) -> String {
    format!(
        "task: {agent}.reflect\n\n{context}\n\
         The initial review above is your own first attempt. Check each finding against the diff: drop \
         the ones that are wrong or out of scope, correct paths and line numbers, and add anything that \
         was missed. Then answer with only this XML document, one <comment> per finding, and an empty \
         <comments> element if nothing remains:\n\n{REVIEW_SKELETON}\n"
    )
}

pub const FORMAT_SYSTEM_PROMPT: &str = "You convert code review notes into an XML document. Do not add, remove or change findings.";

pub fn reformat_prompt(agent: AgentKind, previous: &str, problem: &str) -> String {
    format!(
        "task: {agent}.reformat\n\nThe review below could not be read ({problem}). Rewrite it as exactly \
         this XML document and nothing else:\n\n{REVIEW_SKELETON}\n\nReview:\n{previous}\n"
    )
}
