//! Prompt templates with placeholder substitution.
//!
//! Three templates ship embedded in the binary: summarization, question
//! answering, and source reconstruction. Placeholders are `{q}` (query or
//! questions), `{s}` (source document or summary, depending on template),
//! and `{d}` (the document a question is asked about). The question-answer
//! template doubles as the answer-reconstruction scoring prompt by binding
//! `{d}` to a candidate summary instead of the source.
//!
//! Each template has a system part and a user part. Role-aware backends
//! receive the parts separately; role-less backends get them flattened as
//! system text, a blank line, then user text.
//!
//! `--prompt-dir` overrides the built-ins with files named
//! `<stem>.system.txt` / `<stem>.user.txt`.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateName {
    Summarize,
    QuestionAnswer,
    SourceReconstruct,
}

impl TemplateName {
    pub const ALL: [TemplateName; 3] = [
        TemplateName::Summarize,
        TemplateName::QuestionAnswer,
        TemplateName::SourceReconstruct,
    ];

    pub fn stem(self) -> &'static str {
        match self {
            TemplateName::Summarize => "summarize",
            TemplateName::QuestionAnswer => "question_answer",
            TemplateName::SourceReconstruct => "source_reconstruct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub system: String,
    pub user: String,
}

/// A template with all placeholders bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    /// Chat-flattening rule for role-less backends.
    pub fn flat(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        let (system, user) = match name {
            TemplateName::Summarize => (
                include_str!("../assets/prompts/summarize.system.txt"),
                include_str!("../assets/prompts/summarize.user.txt"),
            ),
            TemplateName::QuestionAnswer => (
                include_str!("../assets/prompts/question_answer.system.txt"),
                include_str!("../assets/prompts/question_answer.user.txt"),
            ),
            TemplateName::SourceReconstruct => (
                include_str!("../assets/prompts/source_reconstruct.system.txt"),
                include_str!("../assets/prompts/source_reconstruct.user.txt"),
            ),
        };
        Self {
            name,
            system: strip_one_newline(system),
            user: strip_one_newline(user),
        }
    }

    /// Load `<stem>.system.txt` / `<stem>.user.txt` from a directory.
    pub fn load(dir: &Path, name: TemplateName) -> Result<Self> {
        let read = |part: &str| -> Result<String> {
            let path = dir.join(format!("{}.{part}.txt", name.stem()));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok(strip_one_newline(&text))
        };
        Ok(Self {
            name,
            system: read("system")?,
            user: read("user")?,
        })
    }

    /// Built-in template, or the override from `dir` when given.
    pub fn resolve(dir: Option<&Path>, name: TemplateName) -> Result<Self> {
        match dir {
            Some(d) => Self::load(d, name),
            None => Ok(Self::builtin(name)),
        }
    }

    /// Substitute `{name}` placeholders in both parts. Inserted values are
    /// copied verbatim and never rescanned, so rendering is injective in
    /// each binding.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<RenderedPrompt> {
        Ok(RenderedPrompt {
            system: substitute(&self.system, bindings)?,
            user: substitute(&self.user, bindings)?,
        })
    }
}

/// Trim exactly one trailing newline, so templates stored as text files
/// render byte-identically to their in-memory form.
fn strip_one_newline(s: &str) -> String {
    let s = s.strip_suffix('\n').unwrap_or(s);
    let s = s.strip_suffix('\r').unwrap_or(s);
    s.to_string()
}

fn substitute(text: &str, bindings: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = placeholder_end(bytes, i) {
                let name = &text[i + 1..end];
                match bindings.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => return Err(Error::MissingPlaceholder(name.to_string())),
                }
                i = end + 1;
                continue;
            }
        }
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&text[i..i + ch_len]);
        i += ch_len;
    }
    Ok(out)
}

/// A placeholder is `{` + one or more ASCII lowercase letters or
/// underscores + `}`. Other brace uses pass through untouched.
fn placeholder_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut j = open + 1;
    while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
        j += 1;
    }
    if j > open + 1 && j < bytes.len() && bytes[j] == b'}' {
        Some(j)
    } else {
        None
    }
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b < 0xE0 => 2,
        b if b < 0xF0 => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_match_committed_text() {
        let summarize = PromptTemplate::builtin(TemplateName::Summarize);
        assert_eq!(
            summarize.system,
            "You are a helpful, respectful and honest assistant specializing in query-focused summarization."
        );
        assert_eq!(
            summarize.user,
            "Read the following document and related questions. Provide a summary which both summarizes the document as well as answers the questions. That is, the summary should summarize the main points of the document while providing answers to the given questions. Do not generate anything else other than the summary. Questions: {q} Document: {s} Summary:"
        );

        let qa = PromptTemplate::builtin(TemplateName::QuestionAnswer);
        assert_eq!(
            qa.system,
            "You are a helpful, respectful and honest assistant specializing in question answering."
        );
        assert_eq!(
            qa.user,
            "Read the following document and then answer the question about it. Your answer should be clear, concise and accurate. Do not provide anything else other than the answer to the question. Document: {d} Question: {q} Answer:"
        );

        let rec = PromptTemplate::builtin(TemplateName::SourceReconstruct);
        assert_eq!(
            rec.system,
            "You are a helpful, respectful and honest assistant specializing in the reconstruction of source documents given their summary."
        );
        assert_eq!(
            rec.user,
            "Read the following summary and then regenerate the source document that it was about. Your regeneration should be as close to the original source document as possible. Do not provide anything else other than the reconstructed source document. Summary: {s} Source:"
        );
    }

    #[test]
    fn render_substitutes_all_placeholders() {
        let t = PromptTemplate::builtin(TemplateName::Summarize);
        let r = t.render(&[("q", "Q?"), ("s", "DOC")]).unwrap();
        assert!(r.user.contains("Questions: Q? Document: DOC Summary:"));
        assert!(!r.user.contains('{'));
    }

    #[test]
    fn qa_template_rebinds_document_for_answer_scoring() {
        let t = PromptTemplate::builtin(TemplateName::QuestionAnswer);
        let r = t
            .render(&[("d", "a candidate summary"), ("q", "Q?")])
            .unwrap();
        assert!(r
            .user
            .contains("Document: a candidate summary Question: Q? Answer:"));
    }

    #[test]
    fn missing_binding_is_an_error() {
        let t = PromptTemplate::builtin(TemplateName::Summarize);
        match t.render(&[("q", "Q?")]) {
            Err(Error::MissingPlaceholder(name)) => assert_eq!(name, "s"),
            other => panic!("expected MissingPlaceholder, got {other:?}"),
        }
    }

    #[test]
    fn flat_uses_blank_line_between_parts() {
        let r = RenderedPrompt {
            system: "sys".into(),
            user: "usr".into(),
        };
        assert_eq!(r.flat(), "sys\n\nusr");
    }

    #[test]
    fn non_placeholder_braces_pass_through() {
        let t = PromptTemplate {
            name: TemplateName::Summarize,
            system: String::new(),
            user: "literal {X} and {1} stay; {q} binds".into(),
        };
        let r = t.render(&[("q", "ok")]).unwrap();
        assert_eq!(r.user, "literal {X} and {1} stay; ok binds");
    }

    #[test]
    fn render_is_injective_in_each_binding() {
        let t = PromptTemplate::builtin(TemplateName::QuestionAnswer);
        let a = t.render(&[("d", "doc-one"), ("q", "Q")]).unwrap();
        let b = t.render(&[("d", "doc-two"), ("q", "Q")]).unwrap();
        assert_ne!(a.user, b.user);
    }
}
