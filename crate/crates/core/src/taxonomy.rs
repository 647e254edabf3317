//! The seven-dimension label taxonomy and the rules that turn raw annotator
//! output into the released label space.
//!
//! Raw annotations use the field names and spellings of the annotation
//! prompt (`broken`, `broken_reason`, `Routine activities`, ...). The
//! canonical label space renames `broken` to Validity and `broken_reason` to
//! Invalidity Reason, folds `context_sufficient = No` into the invalidity
//! taxonomy, merges `followup = No` into `Maybe` and flags facts annotated
//! with both durations as excluded.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn as_str(self) -> &'static str {
                Self::NAMES[self as usize]
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }

            /// Exact, case-sensitive match against the canonical spelling
            /// after trimming surrounding whitespace.
            pub fn parse(text: &str) -> Option<Self> {
                let text = text.trim();
                Self::ALL.iter().copied().find(|v| v.as_str() == text)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

label_enum!(
    /// Thematic category of a fact; `None` is reserved for invalid facts.
    MainCategory {
        Preferences => "Preferences",
        Characteristics => "Characteristics",
        RoutineActivities => "Routine Activities",
        Experience => "Experience",
        GoalsAndPlans => "Goals and Plans",
        Relationships => "Relationships",
        Demographics => "Demographics",
        Possessions => "Possessions",
        None => "None",
    }
);

label_enum!(Time {
    Past => "Past",
    Present => "Present",
    Future => "Future",
    None => "None",
});

label_enum!(
    /// Whom the fact is about. `SelfRef` is the speaker (including a "we"
    /// that contains the speaker).
    Referent {
        SelfRef => "Self",
        Other => "Other",
        None => "None",
    }
);

label_enum!(Duration {
    ShortTerm => "Short-term",
    LongTerm => "Long-term",
    None => "None",
});

label_enum!(Validity {
    Valid => "Valid",
    Invalid => "Invalid",
});

label_enum!(InvalidityReason {
    NoFact => "No Fact",
    Opinion => "Opinion",
    ContextInsufficient => "Context Insufficient",
    Unattributable => "Unattributable",
    MultipleFacts => "Multiple Facts",
    None => "None",
});

label_enum!(Followup {
    Yes => "Yes",
    Maybe => "Maybe",
    None => "None",
});

/// One of the seven classification dimensions. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    MainCategory,
    Time,
    Referent,
    Duration,
    Validity,
    InvalidityReason,
    Followup,
}

impl Dimension {
    pub const ALL: [Dimension; 7] = [
        Dimension::MainCategory,
        Dimension::Time,
        Dimension::Referent,
        Dimension::Duration,
        Dimension::Validity,
        Dimension::InvalidityReason,
        Dimension::Followup,
    ];

    pub const COUNT: usize = 7;

    /// Human-readable name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Dimension::MainCategory => "Main Category",
            Dimension::Time => "Time",
            Dimension::Referent => "Referent",
            Dimension::Duration => "Duration",
            Dimension::Validity => "Validity",
            Dimension::InvalidityReason => "Invalidity Reason",
            Dimension::Followup => "Followup",
        }
    }

    /// Field key used in fact files.
    pub fn key(self) -> &'static str {
        match self {
            Dimension::MainCategory => "main_category",
            Dimension::Time => "time",
            Dimension::Referent => "referent",
            Dimension::Duration => "duration",
            Dimension::Validity => "validity",
            Dimension::InvalidityReason => "invalidity_reason",
            Dimension::Followup => "followup",
        }
    }

    /// Short column header (MC, Tm, ...).
    pub fn abbrev(self) -> &'static str {
        match self {
            Dimension::MainCategory => "MC",
            Dimension::Time => "Tm",
            Dimension::Referent => "Ref",
            Dimension::Duration => "Dur",
            Dimension::Validity => "Val",
            Dimension::InvalidityReason => "IR",
            Dimension::Followup => "FU",
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Dimension::MainCategory => MainCategory::NAMES,
            Dimension::Time => Time::NAMES,
            Dimension::Referent => Referent::NAMES,
            Dimension::Duration => Duration::NAMES,
            Dimension::Validity => Validity::NAMES,
            Dimension::InvalidityReason => InvalidityReason::NAMES,
            Dimension::Followup => Followup::NAMES,
        }
    }

    pub fn label_count(self) -> usize {
        self.labels().len()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_key(key: &str) -> Option<Dimension> {
        Dimension::ALL.into_iter().find(|d| d.key() == key)
    }

    pub fn from_name(name: &str) -> Option<Dimension> {
        Dimension::ALL.into_iter().find(|d| d.name() == name)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete assignment over the seven dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSet {
    pub main_category: MainCategory,
    pub time: Time,
    pub referent: Referent,
    pub duration: Duration,
    pub validity: Validity,
    pub invalidity_reason: InvalidityReason,
    pub followup: Followup,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {dimension} label {value:?}")]
pub struct UnknownLabel {
    pub dimension: Dimension,
    pub value: String,
}

impl LabelSet {
    /// An invalid fact: every content dimension is `None`.
    pub fn invalid(reason: InvalidityReason) -> Self {
        LabelSet {
            main_category: MainCategory::None,
            time: Time::None,
            referent: Referent::None,
            duration: Duration::None,
            validity: Validity::Invalid,
            invalidity_reason: reason,
            followup: Followup::None,
        }
    }

    /// Label index of `dimension` within `dimension.labels()`.
    pub fn index(&self, dimension: Dimension) -> usize {
        match dimension {
            Dimension::MainCategory => self.main_category.index(),
            Dimension::Time => self.time.index(),
            Dimension::Referent => self.referent.index(),
            Dimension::Duration => self.duration.index(),
            Dimension::Validity => self.validity.index(),
            Dimension::InvalidityReason => self.invalidity_reason.index(),
            Dimension::Followup => self.followup.index(),
        }
    }

    pub fn label(&self, dimension: Dimension) -> &'static str {
        dimension.labels()[self.index(dimension)]
    }

    /// Indices in `Dimension::ALL` order.
    pub fn indices(&self) -> [usize; Dimension::COUNT] {
        Dimension::ALL.map(|d| self.index(d))
    }

    /// Builds a label set from per-dimension indices; `None` if any index is
    /// out of range.
    pub fn from_indices(indices: &[usize]) -> Option<LabelSet> {
        if indices.len() != Dimension::COUNT {
            return None;
        }
        Some(LabelSet {
            main_category: MainCategory::from_index(indices[0])?,
            time: Time::from_index(indices[1])?,
            referent: Referent::from_index(indices[2])?,
            duration: Duration::from_index(indices[3])?,
            validity: Validity::from_index(indices[4])?,
            invalidity_reason: InvalidityReason::from_index(indices[5])?,
            followup: Followup::from_index(indices[6])?,
        })
    }

    /// Sets one dimension from its canonical label string.
    pub fn set(&mut self, dimension: Dimension, value: &str) -> Result<(), UnknownLabel> {
        let unknown = || UnknownLabel {
            dimension,
            value: value.to_string(),
        };
        match dimension {
            Dimension::MainCategory => self.main_category = MainCategory::parse(value).ok_or_else(unknown)?,
            Dimension::Time => self.time = Time::parse(value).ok_or_else(unknown)?,
            Dimension::Referent => self.referent = Referent::parse(value).ok_or_else(unknown)?,
            Dimension::Duration => self.duration = Duration::parse(value).ok_or_else(unknown)?,
            Dimension::Validity => self.validity = Validity::parse(value).ok_or_else(unknown)?,
            Dimension::InvalidityReason => {
                self.invalidity_reason = InvalidityReason::parse(value).ok_or_else(unknown)?
            }
            Dimension::Followup => self.followup = Followup::parse(value).ok_or_else(unknown)?,
        }
        Ok(())
    }
}

pub const VIOLATION_VALID_WITH_REASON: &str = "valid fact carries invalidity reason";
pub const VIOLATION_FOLLOWUP_NOT_FUTURE: &str = "followup requires Future time";

/// Lists every taxonomy invariant `labels` breaks; empty when consistent.
pub fn validate_labelset(labels: &LabelSet) -> Vec<String> {
    let mut violations = Vec::new();
    match labels.validity {
        Validity::Valid => {
            if labels.invalidity_reason != InvalidityReason::None {
                violations.push(VIOLATION_VALID_WITH_REASON.to_string());
            }
        }
        Validity::Invalid => {
            for dimension in [
                Dimension::MainCategory,
                Dimension::Time,
                Dimension::Referent,
                Dimension::Duration,
                Dimension::Followup,
            ] {
                if labels.label(dimension) != "None" {
                    violations.push(alloc::format!("invalid fact carries {} label", dimension.name()));
                }
            }
        }
    }
    if labels.followup != Followup::None && labels.time != Time::Future {
        violations.push(VIOLATION_FOLLOWUP_NOT_FUTURE.to_string());
    }
    violations
}

/// Where a fact came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Source {
    #[default]
    Msc,
    PersonaChat,
    Other,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Msc => "MSC",
            Source::PersonaChat => "PersonaChat",
            Source::Other => "Other",
        }
    }

    pub fn parse(text: &str) -> Option<Source> {
        match text.trim() {
            "MSC" => Some(Source::Msc),
            "PersonaChat" => Some(Source::PersonaChat),
            "Other" => Some(Source::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactError {
    #[error("fact {0:?} has empty text")]
    EmptyText(String),
}

/// One personal fact, optionally with its dialogue context and labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactRecord {
    pub id: String,
    pub text: String,
    pub context: Option<String>,
    pub source: Source,
    pub labels: Option<LabelSet>,
    /// Set by canonicalization for ambiguous annotations; excluded facts are
    /// kept on disk but skipped by training and evaluation.
    pub excluded: bool,
}

impl FactRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, FactError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(FactError::EmptyText(id));
        }
        Ok(FactRecord {
            id,
            text,
            context: None,
            source: Source::default(),
            labels: None,
            excluded: false,
        })
    }

    pub fn with_labels(mut self, labels: LabelSet) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }
}

/// Annotator output in the prompt's own vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAnnotation {
    pub categories: Vec<String>,
    pub main_category: String,
    pub time: String,
    pub referent: String,
    pub specificity: String,
    pub duration: Vec<String>,
    pub context_sufficient: String,
    pub broken: String,
    pub broken_reason: String,
    pub followup: String,
}

impl Default for RawAnnotation {
    fn default() -> Self {
        let none = || String::from("None");
        RawAnnotation {
            categories: Vec::new(),
            main_category: none(),
            time: none(),
            referent: none(),
            specificity: none(),
            duration: Vec::new(),
            context_sufficient: none(),
            broken: String::from("No"),
            broken_reason: none(),
            followup: none(),
        }
    }
}

const PROMPT_CATEGORIES: [(&str, MainCategory); 8] = [
    ("Demographics", MainCategory::Demographics),
    ("Routine activities", MainCategory::RoutineActivities),
    ("Preferences", MainCategory::Preferences),
    ("Characteristics", MainCategory::Characteristics),
    ("Relationships", MainCategory::Relationships),
    ("Goals and plans", MainCategory::GoalsAndPlans),
    ("Possessions", MainCategory::Possessions),
    ("Experience", MainCategory::Experience),
];

const PROMPT_BROKEN_REASONS: [(&str, InvalidityReason); 4] = [
    ("Multiple facts", InvalidityReason::MultipleFacts),
    ("Opinion", InvalidityReason::Opinion),
    ("Not about self/known people", InvalidityReason::Unattributable),
    ("No fact", InvalidityReason::NoFact),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("field {field}: unknown value {value:?}")]
    UnknownEnumValue { field: &'static str, value: String },
    #[error("field {field}: {detail}")]
    Inconsistent { field: &'static str, detail: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonResult {
    pub labels: LabelSet,
    pub excluded: bool,
    pub exclusion_reason: Option<&'static str>,
}

pub const EXCLUSION_DUAL_DURATION: &str = "dual-duration";

fn lookup<T: Copy>(field: &'static str, value: &str, table: &[(&str, T)]) -> Result<T, CanonError> {
    let trimmed = value.trim();
    table
        .iter()
        .find(|(text, _)| *text == trimmed)
        .map(|(_, v)| *v)
        .ok_or_else(|| CanonError::UnknownEnumValue {
            field,
            value: value.to_string(),
        })
}

fn main_category_from_prompt(field: &'static str, value: &str) -> Result<MainCategory, CanonError> {
    if value.trim() == "None" {
        return Ok(MainCategory::None);
    }
    lookup(field, value, &PROMPT_CATEGORIES)
}

/// Maps a prompt-style annotation onto the canonical label space.
///
/// Every field is checked against the prompt enumerations even when the
/// value is later discarded (`categories`, `specificity`).
pub fn canonicalize(raw: &RawAnnotation) -> Result<CanonResult, CanonError> {
    for category in &raw.categories {
        lookup("categories", category, &PROMPT_CATEGORIES)?;
    }
    let main_category = main_category_from_prompt("main_category", &raw.main_category)?;
    let time = lookup(
        "time",
        &raw.time,
        &[("Past", Time::Past), ("Present", Time::Present), ("Future", Time::Future), ("None", Time::None)],
    )?;
    let referent = lookup(
        "referent",
        &raw.referent,
        &[("Self", Referent::SelfRef), ("Other", Referent::Other), ("None", Referent::None)],
    )?;
    lookup("specificity", &raw.specificity, &[("Specific", ()), ("General", ()), ("None", ())])?;
    let mut short = false;
    let mut long = false;
    for value in &raw.duration {
        match lookup(
            "duration",
            value,
            &[("Short-term", Duration::ShortTerm), ("Long-term", Duration::LongTerm), ("None", Duration::None)],
        )? {
            Duration::ShortTerm => short = true,
            Duration::LongTerm => long = true,
            Duration::None => {}
        }
    }
    let context_sufficient = lookup(
        "context_sufficient",
        &raw.context_sufficient,
        &[("Yes", Some(true)), ("No", Some(false)), ("None", None)],
    )?;
    let broken = lookup("broken", &raw.broken, &[("Yes", true), ("No", false)])?;
    let broken_reason = if raw.broken_reason.trim() == "None" {
        None
    } else {
        Some(lookup("broken_reason", &raw.broken_reason, &PROMPT_BROKEN_REASONS)?)
    };
    // "No" is rare and folded into Maybe.
    let followup = lookup(
        "followup",
        &raw.followup,
        &[("Yes", Followup::Yes), ("No", Followup::Maybe), ("Maybe", Followup::Maybe), ("None", Followup::None)],
    )?;

    if broken {
        let reason = broken_reason.ok_or(CanonError::Inconsistent {
            field: "broken_reason",
            detail: "broken fact without a reason",
        })?;
        return Ok(CanonResult {
            labels: LabelSet::invalid(reason),
            excluded: false,
            exclusion_reason: None,
        });
    }
    if broken_reason.is_some() {
        return Err(CanonError::Inconsistent {
            field: "broken_reason",
            detail: "reason given for a fact that is not broken",
        });
    }
    if context_sufficient == Some(false) {
        return Ok(CanonResult {
            labels: LabelSet::invalid(InvalidityReason::ContextInsufficient),
            excluded: false,
            exclusion_reason: None,
        });
    }

    let (duration, excluded) = match (short, long) {
        (true, true) => (Duration::None, true),
        (true, false) => (Duration::ShortTerm, false),
        (false, true) => (Duration::LongTerm, false),
        (false, false) => (Duration::None, false),
    };
    // Followup is only defined for future facts.
    let followup = if time == Time::Future { followup } else { Followup::None };

    Ok(CanonResult {
        labels: LabelSet {
            main_category,
            time,
            referent,
            duration,
            validity: Validity::Valid,
            invalidity_reason: InvalidityReason::None,
            followup,
        },
        excluded,
        exclusion_reason: excluded.then_some(EXCLUSION_DUAL_DURATION),
    })
}

/// Re-expresses canonical labels in the prompt vocabulary, such that
/// `canonicalize(&to_raw(l))` returns `l` for any canonicalized `l`.
pub fn to_raw(labels: &LabelSet) -> RawAnnotation {
    let mut raw = RawAnnotation::default();
    match (labels.validity, labels.invalidity_reason) {
        (Validity::Invalid, InvalidityReason::ContextInsufficient) => {
            raw.context_sufficient = String::from("No");
            return raw;
        }
        (Validity::Invalid, reason) => {
            raw.broken = String::from("Yes");
            raw.broken_reason = PROMPT_BROKEN_REASONS
                .iter()
                .find(|(_, r)| *r == reason)
                .map_or("None", |(text, _)| text)
                .to_string();
            return raw;
        }
        (Validity::Valid, _) => {}
    }
    raw.main_category = PROMPT_CATEGORIES
        .iter()
        .find(|(_, c)| *c == labels.main_category)
        .map_or("None", |(text, _)| text)
        .to_string();
    if labels.main_category != MainCategory::None {
        raw.categories.push(raw.main_category.clone());
    }
    raw.time = labels.time.as_str().to_string();
    raw.referent = labels.referent.as_str().to_string();
    raw.context_sufficient = String::from("Yes");
    if labels.duration != Duration::None {
        raw.duration.push(labels.duration.as_str().to_string());
    }
    raw.followup = labels.followup.as_str().to_string();
    raw
}
