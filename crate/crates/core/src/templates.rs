//! Prompt template assets with `{{ placeholder }}` substitution.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::Role;

pub const WORKER_FILE: &str = "worker.txt";
pub const MATH_ANSWER_FILE: &str = "math_answer.txt";
pub const SERIALIZATION_FILE: &str = "serialization.txt";
pub const BB_WRITE_FILE: &str = "bb_write.txt";
pub const EXTRACTION_USER_FILE: &str = "extraction_user.txt";

pub const NOTES_SLOT: &str = "selected_blackboard_notes_or_empty";
pub const WORKER_SLOT: &str = "cpt_worker_prompt";
pub const PROBLEM_SLOT: &str = "original_problem";
pub const CONTINUATION_SLOT: &str = "branch_reasoning_continuation";
pub const HISTORY_NOTES_SLOT: &str = "history_notes_or_empty";
pub const PRIOR_TRANSCRIPT_SLOT: &str = "prior_transcript";
pub const NEW_SEGMENT_SLOT: &str = "new_segment";

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template `{template}` has no `{{{{ {name} }}}}` placeholder")]
    MissingPlaceholder { template: String, name: String },
    #[error("template `{template}` uses unknown placeholder `{name}`")]
    UnknownPlaceholder { template: String, name: String },
    #[error("template `{template}` has an unterminated placeholder")]
    Unterminated { template: String },
    #[error("serialization template must contain [system], [user], [user], [assistant] sections in order")]
    BadSerialization,
    #[error("failed to read template {path}: {message}")]
    Io { path: String, message: String },
}

/// One role-tagged section of the worker serialization template.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSection {
    pub role: Role,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub worker: String,
    pub math_answer: String,
    pub serialization: String,
    pub bb_write: String,
    pub extraction_user: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            worker: include_str!("../templates/worker.txt").to_string(),
            math_answer: include_str!("../templates/math_answer.txt").to_string(),
            serialization: include_str!("../templates/serialization.txt").to_string(),
            bb_write: include_str!("../templates/bb_write.txt").to_string(),
            extraction_user: include_str!("../templates/extraction_user.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Load all five assets from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        let t = Self {
            worker: read(WORKER_FILE)?,
            math_answer: read(MATH_ANSWER_FILE)?,
            serialization: read(SERIALIZATION_FILE)?,
            bb_write: read(BB_WRITE_FILE)?,
            extraction_user: read(EXTRACTION_USER_FILE)?,
        };
        t.check()?;
        Ok(t)
    }

    /// Verify every template carries the placeholders the prompt builders fill.
    pub fn check(&self) -> Result<(), TemplateError> {
        let sections = self.serialization_sections()?;
        let required = [NOTES_SLOT, WORKER_SLOT, PROBLEM_SLOT, CONTINUATION_SLOT];
        for (section, name) in sections.iter().zip(required) {
            require(SERIALIZATION_FILE, &section.body, name)?;
        }
        for name in [HISTORY_NOTES_SLOT, PROBLEM_SLOT, PRIOR_TRANSCRIPT_SLOT, NEW_SEGMENT_SLOT] {
            require(EXTRACTION_USER_FILE, &self.extraction_user, name)?;
        }
        Ok(())
    }

    /// The worker instruction: worker prompt followed by the answer-format prompt.
    pub fn worker_instruction(&self) -> String {
        format!(
            "{}\n\n{}",
            self.worker.trim_end(),
            self.math_answer.trim_end()
        )
    }

    /// Split the serialization template into its four role sections.
    pub fn serialization_sections(&self) -> Result<Vec<TemplateSection>, TemplateError> {
        let mut sections: Vec<TemplateSection> = Vec::new();
        for line in self.serialization.lines() {
            let role = match line.trim_end() {
                "[system]" => Some(Role::System),
                "[user]" => Some(Role::User),
                "[assistant]" => Some(Role::Assistant),
                _ => None,
            };
            match (role, sections.last_mut()) {
                (Some(role), _) => sections.push(TemplateSection {
                    role,
                    body: String::new(),
                }),
                (None, Some(section)) => {
                    if !section.body.is_empty() {
                        section.body.push('\n');
                    }
                    section.body.push_str(line);
                }
                (None, None) if line.trim().is_empty() => {}
                (None, None) => return Err(TemplateError::BadSerialization),
            }
        }
        for s in &mut sections {
            let trimmed = s.body.trim_end_matches(['\n', ' ']).len();
            s.body.truncate(trimmed);
        }
        let roles: Vec<Role> = sections.iter().map(|s| s.role).collect();
        if roles != [Role::System, Role::User, Role::User, Role::Assistant] {
            return Err(TemplateError::BadSerialization);
        }
        Ok(sections)
    }

    /// SHA-256 of each asset, for run manifests.
    pub fn hashes(&self) -> BTreeMap<&'static str, String> {
        let h = |s: &str| hex::encode(Sha256::digest(s.as_bytes()));
        BTreeMap::from([
            (WORKER_FILE, h(&self.worker)),
            (MATH_ANSWER_FILE, h(&self.math_answer)),
            (SERIALIZATION_FILE, h(&self.serialization)),
            (BB_WRITE_FILE, h(&self.bb_write)),
            (EXTRACTION_USER_FILE, h(&self.extraction_user)),
        ])
    }
}

fn require(template: &str, body: &str, name: &str) -> Result<(), TemplateError> {
    if placeholders(template, body)?.iter().any(|p| p == name) {
        Ok(())
    } else {
        Err(TemplateError::MissingPlaceholder {
            template: template.to_string(),
            name: name.to_string(),
        })
    }
}

fn placeholders(template: &str, body: &str) -> Result<Vec<String>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
            template: template.to_string(),
        })?;
        out.push(after[..end].trim().to_string());
        rest = &after[end + 2..];
    }
    Ok(out)
}

/// Replace every `{{ name }}` in `body`. Each supplied name must occur at least
/// once, and every placeholder in the body must be supplied.
pub fn substitute(template: &str, body: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    for (name, _) in values {
        require(template, body, name)?;
    }
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
            template: template.to_string(),
        })?;
        let name = after[..end].trim();
        let value = values
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| TemplateError::UnknownPlaceholder {
                template: template.to_string(),
                name: name.to_string(),
            })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_assets_are_complete() {
        let t = PromptTemplates::default();
        t.check().unwrap();
        let sections = t.serialization_sections().unwrap();
        assert_eq!(
            sections[0].body,
            "[BLACKBOARD BROADCAST]\n{{ selected_blackboard_notes_or_empty }}\n[/BLACKBOARD BROADCAST]"
        );
        assert_eq!(sections[3].body, "{{ branch_reasoning_continuation }}");
        assert!(t.worker_instruction().ends_with("put your final answer within \\boxed{}."));
        assert!(t.bb_write.contains("- (type=insight|pitfall)"));
    }

    #[test]
    fn substitution() {
        let out = substitute("t", "a {{x}} b {{ y }} {{x}}", &[("x", "1"), ("y", "2")]).unwrap();
        assert_eq!(out, "a 1 b 2 1");
        assert!(matches!(
            substitute("t", "a", &[("x", "1")]),
            Err(TemplateError::MissingPlaceholder { .. })
        ));
        assert!(matches!(
            substitute("t", "{{ z }}", &[]),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            substitute("t", "{{ z", &[]),
            Err(TemplateError::Unterminated { .. })
        ));
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = substitute("t", "{{x}}", &[("x", "{{y}}")]).unwrap();
        assert_eq!(out, "{{y}}");
    }

    #[test]
    fn broken_serialization_is_a_configuration_error() {
        let mut t = PromptTemplates::default();
        t.serialization = t.serialization.replace("{{ original_problem }}", "PROBLEM");
        assert!(matches!(
            t.check(),
            Err(TemplateError::MissingPlaceholder { .. })
        ));
        let t = PromptTemplates {
            serialization: "[user]\nx\n".into(),
            ..Default::default()
        };
        assert_eq!(t.check(), Err(TemplateError::BadSerialization));
    }

    #[test]
    fn load_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = PromptTemplates::default();
        for (name, body) in [
            (WORKER_FILE, &t.worker),
            (MATH_ANSWER_FILE, &t.math_answer),
            (SERIALIZATION_FILE, &t.serialization),
            (BB_WRITE_FILE, &t.bb_write),
            (EXTRACTION_USER_FILE, &t.extraction_user),
        ] {
            std::fs::write(dir.path().join(name), body).unwrap();
        }
        assert_eq!(PromptTemplates::load_dir(dir.path()).unwrap(), t);
        std::fs::remove_file(dir.path().join(BB_WRITE_FILE)).unwrap();
        assert!(matches!(
            PromptTemplates::load_dir(dir.path()),
            Err(TemplateError::Io { .. })
        ));
    }
}
