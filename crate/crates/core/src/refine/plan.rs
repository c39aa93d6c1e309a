use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::latex::normalize_seed;
use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::hashing::{hash_str, mix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Edit,
    QaStratified,
    Dialogue,
    StyleRewrite,
    TextbookModule,
    Persona,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Edit,
        TaskKind::QaStratified,
        TaskKind::Dialogue,
        TaskKind::StyleRewrite,
        TaskKind::TextbookModule,
        TaskKind::Persona,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Edit => "edit",
            TaskKind::QaStratified => "qa_stratified",
            TaskKind::Dialogue => "dialogue",
            TaskKind::StyleRewrite => "style_rewrite",
            TaskKind::TextbookModule => "textbook_module",
            TaskKind::Persona => "persona",
        }
    }

    pub fn is_synthesis(self) -> bool {
        self != TaskKind::Edit
    }

    fn template_source(self) -> &'static str {
        match self {
            TaskKind::Edit => include_str!("../../assets/templates/edit.txt"),
            TaskKind::QaStratified => include_str!("../../assets/templates/qa_stratified.txt"),
            TaskKind::Dialogue => include_str!("../../assets/templates/dialogue.txt"),
            TaskKind::StyleRewrite => include_str!("../../assets/templates/style_rewrite.txt"),
            TaskKind::TextbookModule => include_str!("../../assets/templates/textbook_module.txt"),
            TaskKind::Persona => include_str!("../../assets/templates/persona.txt"),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        match s.as_str() {
            "qa" => Ok(TaskKind::QaStratified),
            "style" => Ok(TaskKind::StyleRewrite),
            "textbook" => Ok(TaskKind::TextbookModule),
            _ => TaskKind::ALL
                .into_iter()
                .find(|k| k.as_str() == s)
                .ok_or_else(|| Error::Config(format!("unknown task kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Wikipedia,
    Blog,
    Academic,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Wikipedia, Style::Blog, Style::Academic];

    fn phrase(self) -> &'static str {
        match self {
            Style::Wikipedia => "an encyclopedia article",
            Style::Blog => "an informal blog post",
            Style::Academic => "an academic paper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Primary,
    Middle,
    High,
    Undergraduate,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Primary, Level::Middle, Level::High, Level::Undergraduate];

    fn phrase(self) -> &'static str {
        match self {
            Level::Primary => "primary school",
            Level::Middle => "middle school",
            Level::High => "high school",
            Level::Undergraduate => "undergraduate",
        }
    }
}

pub const PERSONA_PAIRS: [(&str, &str); 7] = [
    ("a student", "a teacher"),
    ("a beginner", "an expert"),
    ("a child", "a parent"),
    ("an engineer", "a mathematician"),
    ("a journalist", "a researcher"),
    ("two classmates", "their tutor"),
    ("a skeptic", "an enthusiast"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<Style>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persona_pair: Option<u8>,
    pub max_output_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRequest {
    pub seed_id: String,
    pub kind: TaskKind,
    pub prompt: String,
    pub params: RequestParams,
    pub template_version: String,
}

pub const SEED_OPEN: &str = "<<<SEED\n";
pub const SEED_CLOSE: &str = "\nSEED>>>";

/// Template header `# udt-template <kind> <version>` and body.
pub fn template(kind: TaskKind) -> (&'static str, &'static str) {
    let src = kind.template_source();
    let (header, body) = src.split_once('\n').expect("template has a header line");
    let version = header.rsplit(' ').next().unwrap_or("v0");
    (version, body)
}

/// Recovers the seed excerpt embedded in a prompt.
pub fn seed_excerpt(prompt: &str) -> Option<&str> {
    let start = prompt.find(SEED_OPEN)? + SEED_OPEN.len();
    let end = prompt.rfind(SEED_CLOSE)?;
    (end >= start).then(|| &prompt[start..end])
}

pub fn plan_refinement(seed: &Record, kind: TaskKind, rng_seed: u64, max_output_chars: usize) -> RefinementRequest {
    let h = hash_str(&seed.id, 0x5eed);
    let draw = mix64(rng_seed ^ h);
    let mut params = RequestParams {
        style: None,
        level: None,
        persona_pair: None,
        max_output_chars,
    };
    match kind {
        // consecutive rng seeds step through the levels
        TaskKind::QaStratified => params.level = Some(Level::ALL[(rng_seed.wrapping_add(h) % 4) as usize]),
        TaskKind::StyleRewrite => params.style = Some(Style::ALL[(draw % 3) as usize]),
        TaskKind::Dialogue | TaskKind::Persona => params.persona_pair = Some((draw % 7) as u8),
        TaskKind::Edit | TaskKind::TextbookModule => {}
    }
    let (version, body) = template(kind);
    let mut prompt = body.to_string();
    if let Some(l) = params.level {
        prompt = prompt.replace("{level}", l.phrase());
    }
    if let Some(s) = params.style {
        prompt = prompt.replace("{style}", s.phrase());
    }
    if let Some(p) = params.persona_pair {
        let (a, b) = PERSONA_PAIRS[p as usize];
        prompt = prompt.replace("{persona}", &format!("{a} and {b}"));
    }
    let prompt = prompt.replace("{seed}", &normalize_seed(&seed.text));
    RefinementRequest {
        seed_id: seed.id.clone(),
        kind,
        prompt,
        params,
        template_version: version.to_string(),
    }
}
