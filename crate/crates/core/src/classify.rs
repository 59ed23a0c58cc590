//! Seven-way resume sentence classification and privacy redaction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use futures::stream::{self, StreamExt, TryStreamExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ResumeRecord;
use crate::llm::{ChatRequest, GenerationParams, LlmBackend, RequestTag};
use crate::prompt::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SentenceLabel {
    PersonalInformation,
    Experience,
    Summary,
    Education,
    QualificationCertification,
    Skill,
    Objective,
}

impl SentenceLabel {
    pub const ALL: [SentenceLabel; 7] = [
        SentenceLabel::PersonalInformation,
        SentenceLabel::Experience,
        SentenceLabel::Summary,
        SentenceLabel::Education,
        SentenceLabel::QualificationCertification,
        SentenceLabel::Skill,
        SentenceLabel::Objective,
    ];

    pub fn canonical(self) -> &'static str {
        match self {
            SentenceLabel::PersonalInformation => "personal information",
            SentenceLabel::Experience => "experience",
            SentenceLabel::Summary => "summary",
            SentenceLabel::Education => "education",
            SentenceLabel::QualificationCertification => "qualification certification",
            SentenceLabel::Skill => "skill",
            SentenceLabel::Objective => "objective",
        }
    }
}

impl fmt::Display for SentenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

fn normalize_label_text(s: &str) -> String {
    s.to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl FromStr for SentenceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = normalize_label_text(s);
        let norm = match norm.as_str() {
            "personalinformation" => "personal information",
            "qualificationcertification" => "qualification certification",
            "objectives" => "objective",
            "skills" => "skill",
            other => other,
        };
        SentenceLabel::ALL
            .into_iter()
            .find(|l| l.canonical() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sentence label `{s}`")))
    }
}

impl Serialize for SentenceLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.canonical())
    }
}

impl<'de> Deserialize<'de> for SentenceLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Llm,
    Heuristic,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedSentence {
    pub resume_id: String,
    pub segment_index: usize,
    pub text: String,
    pub label: SentenceLabel,
    pub source: LabelSource,
    #[serde(default)]
    pub raw_answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactedResume {
    pub resume_id: String,
    pub retained: Vec<ClassifiedSentence>,
    pub redacted_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RedactedResume {
    pub fn is_fully_redacted(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.redacted_count + self.retained.len()
    }
}

/// Gold label line: `{"id", "segment_index", "label"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub id: String,
    pub segment_index: usize,
    pub label: SentenceLabel,
}

/// The model output could not be mapped onto a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub raw: String,
}

pub const ANSWER_MARKER: &str = "Answer:";

pub fn default_classification_template() -> PromptTemplate {
    PromptTemplate::new(
        "classify-v1",
        "",
        "{{sentence}}\n\
         Question: Which category does the resume sentence above belong to? \
         Choose exactly one of: {{labels}}.\n\
         Answer:",
    )
}

pub fn label_list() -> String {
    SentenceLabel::ALL
        .iter()
        .map(|l| l.canonical())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the instruction-format prompt: the sentence, the question listing
/// all seven labels, and a trailing `Answer:` line.
pub fn build_classification_prompt(sentence: &str, template: &PromptTemplate) -> Result<String> {
    if sentence.trim().is_empty() {
        return Err(Error::InvalidInput(
            "cannot classify an empty sentence".into(),
        ));
    }
    template.require_slots(&["sentence", "labels"])?;
    if !template.task_body.trim_end().ends_with(ANSWER_MARKER) {
        return Err(Error::Config(format!(
            "classification template `{}` must end with the literal `{ANSWER_MARKER}`",
            template.template_id
        )));
    }
    let mut values = BTreeMap::new();
    values.insert("sentence", sentence.to_string());
    values.insert("labels", label_list());
    let rendered = template.render(&values)?;
    Ok(if rendered.system.is_empty() {
        rendered.user
    } else {
        format!("{}\n{}", rendered.system, rendered.user)
    })
}

/// Maps free model text onto a label. Looks after the last `Answer:` marker
/// (case-insensitive) when present; the earliest label occurrence wins and,
/// at a given position, the longest label.
pub fn parse_label_response(raw: &str) -> std::result::Result<SentenceLabel, ParseFailure> {
    let norm = normalize_label_text(raw);
    let marker = ANSWER_MARKER.to_lowercase();
    let region = match norm.rfind(&marker) {
        Some(pos) => &norm[pos + marker.len()..],
        None => norm.as_str(),
    };

    let mut by_length = SentenceLabel::ALL;
    by_length.sort_by_key(|l| std::cmp::Reverse(l.canonical().len()));

    for (pos, _) in region.char_indices() {
        let boundary = region[..pos]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        if !boundary {
            continue;
        }
        if let Some(label) = by_length
            .iter()
            .find(|l| region[pos..].starts_with(l.canonical()))
        {
            return Ok(*label);
        }
    }
    Err(ParseFailure {
        raw: raw.to_string(),
    })
}

macro_rules! re {
    ($name:ident, $pat:expr) => {
        static $name: LazyLock<Regex> = LazyLock::new(|| Regex::new($pat).expect("valid regex"));
    };
}

re!(EMAIL, r"[\w.+-]+@[\w-]+(\.[\w-]+)+");
re!(
    PHONE,
    r"(\+\d{1,3}[\s.-]?)?\(?\b\d{3}\)?[\s.-]?\d{3}[\s.-]?\d{4}\b|\b\d{3}-\d{4}\b"
);
re!(URL, r"(?i)https?://|www\.|linkedin\.com|github\.com/");
re!(
    POSTAL,
    r"(?i)\b\d+\s+(\w+\s+){1,3}(street|st\.|avenue|ave\.?|road|rd\.|blvd|lane|drive|dr\.)(\s|,|$)|\b[A-Z]{2}\s+\d{5}(-\d{4})?\b"
);
re!(
    PERSONAL_FIELD,
    r"(?i)^(full\s+)?(name|address|phone|mobile|cell|e-?mail|contact|date of birth|dob|birthday|nationality|gender|marital status|citizenship|visa status)\s*[:\-]"
);
re!(
    DEGREE,
    r"(?i)\b(bachelor'?s?|masters?'?s?\s+(of|in|degree)|master'?s|university|college|degree|diploma|gpa|high school|graduated|ph\.?\s?d|mba|b\.?\s?tech|m\.?\s?tech|b\.?\s?sc|m\.?\s?sc|associate of)\b|\b(B\.S\.|M\.S\.|B\.A\.|M\.A\.|B\.E\.|M\.E\.|BS|MS|BA|MA)(\s|,|$)"
);
re!(
    CERT,
    r"(?i)\b(certified|certificate|certification|certifications|license|licensed|licence|accredited)\b"
);
re!(
    DATE_RANGE,
    r"(?i)\b(19|20)\d{2}\s*(-|–|—|to|until)\s*((19|20)\d{2}|present|current|now|date|till date)\b|\b(since|from)\s+(jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec)[a-z]*\.?\s+(19|20)\d{2}"
);
re!(
    ROLE_AT,
    r"(?i)\b(engineer|developer|manager|analyst|consultant|intern|architect|lead|administrator|designer|specialist|programmer|tester|director|officer|scientist|associate)\b.*(\bat\b|@|\binc\b|\bltd\b|\bllc\b|\bcorp|\btechnologies\b|\bsolutions\b|\bcompany\b)"
);
re!(
    ACTION_LEAD,
    r"(?i)^(developed|led|managed|built|implemented|designed|worked|responsible|created|maintained|collaborated|migrated|automated|delivered|supported|coordinated|configured|deployed|wrote|optimized|involved|participated|handled|performed|prepared|analyzed|tested|mentored|reduced|increased|improved)\b"
);
re!(
    OBJECTIVE,
    r"(?i)^(career\s+)?(objective|goal)s?\b|\bseeking\b|^(to obtain|to secure|to work|to join|looking for|aspiring|intend to|wish to)\b"
);
re!(
    SKILL_PREFIX,
    r"(?i)^(technical\s+)?(skills?|technologies|languages|tools|frameworks|databases|platforms|operating systems|software|environment|expertise|proficient in|familiar with|knowledge of)\s*[:\-]"
);
re!(
    TECH,
    r"(?i)\b(java|python|c\+\+|c#|javascript|typescript|sql|mysql|oracle|postgresql|mongodb|html|css|react|angular|node\.?js|spring|hibernate|linux|unix|windows|aws|azure|docker|kubernetes|git|jenkins|php|ruby|go|rust|scala|kotlin|swift|hadoop|spark|excel|tableau|selenium|jira|rest|json|xml|\.net|asp\.net|jquery|bootstrap|django|flask|tensorflow|sap|salesforce|shell|bash|perl|matlab)\b"
);

const HEADINGS: &[(&str, SentenceLabel)] = &[
    ("personal details", SentenceLabel::PersonalInformation),
    ("personal information", SentenceLabel::PersonalInformation),
    ("contact", SentenceLabel::PersonalInformation),
    ("contact information", SentenceLabel::PersonalInformation),
    ("experience", SentenceLabel::Experience),
    ("work experience", SentenceLabel::Experience),
    ("professional experience", SentenceLabel::Experience),
    ("employment history", SentenceLabel::Experience),
    ("work history", SentenceLabel::Experience),
    ("projects", SentenceLabel::Experience),
    ("education", SentenceLabel::Education),
    ("academic background", SentenceLabel::Education),
    ("qualifications", SentenceLabel::QualificationCertification),
    ("certifications", SentenceLabel::QualificationCertification),
    ("skills", SentenceLabel::Skill),
    ("technical skills", SentenceLabel::Skill),
    ("summary", SentenceLabel::Summary),
    ("professional summary", SentenceLabel::Summary),
    ("profile", SentenceLabel::Summary),
    ("objective", SentenceLabel::Objective),
    ("career objective", SentenceLabel::Objective),
];

/// Words that make a short capitalized line a title or heading, not a name.
const NOT_NAME_WORDS: &[&str] = &[
    "engineer",
    "developer",
    "manager",
    "analyst",
    "consultant",
    "architect",
    "lead",
    "senior",
    "junior",
    "software",
    "data",
    "web",
    "java",
    "python",
    "summary",
    "profile",
    "experience",
    "education",
    "skills",
    "objective",
    "projects",
    "technical",
    "professional",
    "administrator",
    "designer",
    "specialist",
    "programmer",
    "tester",
    "intern",
    "team",
    "university",
    "college",
    "school",
    "institute",
    "certified",
    "full",
    "stack",
    "qa",
];

fn looks_like_name(sentence: &str) -> bool {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    (2..=3).contains(&words.len())
        && words.iter().all(|w| {
            let mut chars = w.chars();
            chars.next().is_some_and(char::is_uppercase)
                && w.chars()
                    .all(|c| c.is_alphabetic() || c == '.' || c == '\'')
                && !NOT_NAME_WORDS.contains(&w.to_lowercase().trim_end_matches('.'))
        })
}

fn looks_like_skill_list(sentence: &str) -> bool {
    if SKILL_PREFIX.is_match(sentence) {
        return true;
    }
    let items: Vec<&str> = sentence
        .split([',', '|', ';', '/'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.len() < 3 {
        return false;
    }
    let short = items
        .iter()
        .filter(|i| i.split_whitespace().count() <= 3)
        .count();
    short * 4 >= items.len() * 3 || TECH.find_iter(sentence).count() >= 2
}

/// Rule cascade used as the offline fallback and the mock backend's brain.
pub fn heuristic_classify(sentence: &str) -> SentenceLabel {
    let s = sentence.trim();
    let heading = normalize_label_text(s.trim_end_matches(':'));
    if let Some((_, label)) = HEADINGS.iter().find(|(h, _)| *h == heading) {
        return *label;
    }
    if EMAIL.is_match(s)
        || PHONE.is_match(s)
        || URL.is_match(s)
        || POSTAL.is_match(s)
        || PERSONAL_FIELD.is_match(s)
        || looks_like_name(s)
    {
        return SentenceLabel::PersonalInformation;
    }
    if DEGREE.is_match(s) {
        return SentenceLabel::Education;
    }
    if CERT.is_match(s) {
        return SentenceLabel::QualificationCertification;
    }
    if DATE_RANGE.is_match(s) || ROLE_AT.is_match(s) || ACTION_LEAD.is_match(s) {
        return SentenceLabel::Experience;
    }
    if OBJECTIVE.is_match(s) {
        return SentenceLabel::Objective;
    }
    if looks_like_skill_list(s) {
        return SentenceLabel::Skill;
    }
    SentenceLabel::Summary
}

/// Parse retries before falling back to the heuristic classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub parse_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { parse_retries: 1 }
    }
}

async fn classify_segment(
    resume_id: &str,
    index: usize,
    text: &str,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    params: &GenerationParams,
    policy: RetryPolicy,
) -> Result<ClassifiedSentence> {
    let prompt = build_classification_prompt(text, template)?;
    let request = ChatRequest::new(RequestTag::Classify, "", prompt).with_generation(params);
    let mut last_raw = String::new();
    for _ in 0..=policy.parse_retries {
        let response = backend.complete(&request).await.map_err(|e| {
            Error::stage(
                "classify",
                format!("resume `{resume_id}` segment {index}: {e}"),
            )
        })?;
        match parse_label_response(&response.text) {
            Ok(label) => {
                return Ok(ClassifiedSentence {
                    resume_id: resume_id.to_string(),
                    segment_index: index,
                    text: text.to_string(),
                    label,
                    source: LabelSource::Llm,
                    raw_answer: response.text,
                })
            }
            Err(failure) => last_raw = failure.raw,
        }
    }
    tracing::debug!(resume_id, index, raw = %last_raw, "label parse failed, using heuristic");
    Ok(ClassifiedSentence {
        resume_id: resume_id.to_string(),
        segment_index: index,
        text: text.to_string(),
        label: heuristic_classify(text),
        source: LabelSource::Heuristic,
        raw_answer: String::new(),
    })
}

/// Labels every segment of a resume. Calls run concurrently up to the
/// backend's in-flight limit; results come back in segment order.
pub async fn classify_resume(
    record: &ResumeRecord,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    params: &GenerationParams,
    policy: RetryPolicy,
) -> Result<Vec<ClassifiedSentence>> {
    let limit = backend.max_in_flight().max(1);
    // Owned indices keep the future `Send` for spawned callers.
    stream::iter(0..record.segments.len())
        .map(|index| {
            let text = record.segments[index].as_str();
            classify_segment(
                &record.resume_id,
                index,
                text,
                backend,
                template,
                params,
                policy,
            )
        })
        .buffered(limit)
        .try_collect()
        .await
}

/// Labels every segment with the heuristic classifier only.
pub fn classify_resume_offline(record: &ResumeRecord) -> Vec<ClassifiedSentence> {
    record
        .indexed_segments()
        .map(|(index, text)| ClassifiedSentence {
            resume_id: record.resume_id.clone(),
            segment_index: index,
            text: text.to_string(),
            label: heuristic_classify(text),
            source: LabelSource::Heuristic,
            raw_answer: String::new(),
        })
        .collect()
}

/// Drops personal-information sentences from one resume's classifications.
pub fn redact(classified: &[ClassifiedSentence]) -> Result<RedactedResume> {
    let first = classified
        .first()
        .ok_or_else(|| Error::Contract("redact needs at least one sentence".into()))?;
    if let Some(other) = classified.iter().find(|c| c.resume_id != first.resume_id) {
        return Err(Error::Contract(format!(
            "redact received sentences from `{}` and `{}`",
            first.resume_id, other.resume_id
        )));
    }
    let (personal, retained): (Vec<_>, Vec<_>) = classified
        .iter()
        .cloned()
        .partition(|c| c.label == SentenceLabel::PersonalInformation);
    let mut warnings = Vec::new();
    if retained.is_empty() {
        warnings.push("fully redacted".to_string());
    }
    Ok(RedactedResume {
        resume_id: first.resume_id.clone(),
        retained,
        redacted_count: personal.len(),
        warnings,
    })
}

/// Seeded shuffle followed by a `floor(r * N)` split; the test split takes
/// the remainder.
pub fn split_dataset<T>(
    mut items: Vec<T>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (train_r, valid_r, test_r) = ratios;
    if [train_r, valid_r, test_r]
        .iter()
        .any(|r| !(0.0..=1.0).contains(r))
    {
        return Err(Error::InvalidInput(
            "split ratios must lie in [0, 1]".into(),
        ));
    }
    if (train_r + valid_r + test_r - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split ratios must sum to 1, got {}",
            train_r + valid_r + test_r
        )));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} items three ways"
        )));
    }
    // guard against 0.7 * 1000 landing at 699.999...
    let n_train = (train_r * n as f64 + 1e-9).floor() as usize;
    let n_valid = (valid_r * n as f64 + 1e-9).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let test = items.split_off(n_train + n_valid);
    let valid = items.split_off(n_train);
    Ok((items, valid, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub micro: f64,
    pub macro_f1: f64,
    pub weighted: f64,
    pub per_class: BTreeMap<SentenceLabel, ClassScores>,
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Multi-class precision/recall/F1. Macro and weighted averages run over the
/// labels present in either `pred` or `gold`.
pub fn eval_classification(pred: &[SentenceLabel], gold: &[SentenceLabel]) -> Result<F1Report> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "prediction count {} does not match gold count {}",
            pred.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput(
            "cannot score an empty label set".into(),
        ));
    }
    let labels: HashSet<SentenceLabel> = pred.iter().chain(gold).copied().collect();
    let mut per_class = BTreeMap::new();
    for label in labels {
        let tp = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| **p == label && **g == label)
            .count();
        let predicted = pred.iter().filter(|p| **p == label).count();
        let support = gold.iter().filter(|g| **g == label).count();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        per_class.insert(
            label,
            ClassScores {
                precision,
                recall,
                f1: harmonic(precision, recall),
                support,
            },
        );
    }
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    let n = gold.len();
    let macro_f1 = per_class.values().map(|c| c.f1).sum::<f64>() / per_class.len() as f64;
    let weighted = per_class
        .values()
        .map(|c| c.f1 * c.support as f64)
        .sum::<f64>()
        / n as f64;
    Ok(F1Report {
        micro: ratio(correct, n),
        macro_f1,
        weighted,
        per_class,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms_round_trip() {
        for label in SentenceLabel::ALL {
            assert_eq!(label.canonical().parse::<SentenceLabel>().unwrap(), label);
            let json = serde_json::to_string(&label).unwrap();
            assert_eq!(serde_json::from_str::<SentenceLabel>(&json).unwrap(), label);
        }
        assert_eq!(
            "Objectives".parse::<SentenceLabel>().unwrap(),
            SentenceLabel::Objective
        );
        assert_eq!(
            "personal_information".parse::<SentenceLabel>().unwrap(),
            SentenceLabel::PersonalInformation
        );
    }

    #[test]
    fn prompt_has_all_labels_and_answer_marker() {
        let t = default_classification_template();
        let p = build_classification_prompt("Java, Python, SQL", &t).unwrap();
        assert!(p.starts_with("Java, Python, SQL\n"));
        assert!(p.ends_with("Answer:"));
        for l in SentenceLabel::ALL {
            assert!(p.contains(l.canonical()), "missing {l}");
        }
        assert_eq!(
            p,
            build_classification_prompt("Java, Python, SQL", &t).unwrap()
        );
    }

    #[test]
    fn prompt_template_errors() {
        let no_slot = PromptTemplate::new("bad", "", "Classify: {{labels}}\nAnswer:");
        assert!(matches!(
            build_classification_prompt("x", &no_slot),
            Err(Error::Config(_))
        ));
        let no_answer = PromptTemplate::new("bad", "", "{{sentence}} {{labels}}");
        assert!(matches!(
            build_classification_prompt("x", &no_answer),
            Err(Error::Config(_))
        ));
        assert!(build_classification_prompt(" ", &default_classification_template()).is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!(
            parse_label_response("Answer: Skill"),
            Ok(SentenceLabel::Skill)
        );
        assert_eq!(
            parse_label_response("Answer: qualification certification"),
            Ok(SentenceLabel::QualificationCertification)
        );
        assert!(parse_label_response("I think this is about work history").is_err());
        // only the text after the last marker counts
        assert_eq!(
            parse_label_response("Answer: education?\nAnswer: Experience."),
            Ok(SentenceLabel::Experience)
        );
        assert_eq!(
            parse_label_response("The label is **Personal Information**"),
            Ok(SentenceLabel::PersonalInformation)
        );
        // label inside another word does not count
        assert!(parse_label_response("Answer: inexperienced").is_err());
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(
            heuristic_classify("john.doe@mail.com | 555-0199"),
            SentenceLabel::PersonalInformation
        );
        assert_eq!(
            heuristic_classify("B.S. in Computer Science, MIT, 2015"),
            SentenceLabel::Education
        );
        assert_eq!(
            heuristic_classify("Oracle Certified Professional, Java SE 8"),
            SentenceLabel::QualificationCertification
        );
        assert_eq!(
            heuristic_classify("Software Engineer, Acme Corp, 2016 - 2019"),
            SentenceLabel::Experience
        );
        assert_eq!(
            heuristic_classify("Seeking a challenging position as a backend developer."),
            SentenceLabel::Objective
        );
        assert_eq!(
            heuristic_classify("Java, Python, SQL, Docker"),
            SentenceLabel::Skill
        );
        assert_eq!(
            heuristic_classify("Jane Smith"),
            SentenceLabel::PersonalInformation
        );
        assert_eq!(
            heuristic_classify("Senior Software Engineer"),
            SentenceLabel::Summary
        );
    }

    fn sentence(id: &str, i: usize, label: SentenceLabel) -> ClassifiedSentence {
        ClassifiedSentence {
            resume_id: id.into(),
            segment_index: i,
            text: format!("s{i}"),
            label,
            source: LabelSource::Gold,
            raw_answer: String::new(),
        }
    }

    #[test]
    fn redact_counts() {
        let mut all: Vec<_> = (0..10)
            .map(|i| sentence("r", i, SentenceLabel::Skill))
            .collect();
        for i in [0, 4, 9] {
            all[i].label = SentenceLabel::PersonalInformation;
        }
        let r = redact(&all).unwrap();
        assert_eq!(r.retained.len(), 7);
        assert_eq!(r.redacted_count, 3);
        assert_eq!(
            r.retained
                .iter()
                .map(|c| c.segment_index)
                .collect::<Vec<_>>(),
            vec![1, 2, 3, 5, 6, 7, 8]
        );

        let none: Vec<_> = (0..3)
            .map(|i| sentence("r", i, SentenceLabel::Education))
            .collect();
        assert_eq!(redact(&none).unwrap().retained, none);

        let personal: Vec<_> = (0..2)
            .map(|i| sentence("r", i, SentenceLabel::PersonalInformation))
            .collect();
        let r = redact(&personal).unwrap();
        assert!(r.is_fully_redacted());
        assert_eq!(r.warnings, vec!["fully redacted"]);
    }

    #[test]
    fn redact_rejects_mixed_ids() {
        let mixed = vec![
            sentence("a", 0, SentenceLabel::Skill),
            sentence("b", 0, SentenceLabel::Skill),
        ];
        assert!(matches!(redact(&mixed), Err(Error::Contract(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b, c) = split_dataset((0..1000).collect(), (0.7, 0.15, 0.15), 42).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (700, 150, 150));
        let (a2, b2, c2) = split_dataset((0..1000).collect(), (0.7, 0.15, 0.15), 42).unwrap();
        assert_eq!((a, b, c), (a2, b2, c2));

        let (a, b, c) =
            split_dataset((0..78_668).collect::<Vec<u32>>(), (0.7, 0.15, 0.15), 42).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (55_067, 11_800, 11_801));
        let mut all: Vec<u32> = a.into_iter().chain(b).chain(c).collect();
        all.sort_unstable();
        assert_eq!(all, (0..78_668).collect::<Vec<u32>>());

        assert!(split_dataset(vec![1, 2], (0.7, 0.15, 0.15), 42).is_err());
        assert!(split_dataset(vec![1, 2, 3], (0.7, 0.2, 0.15), 42).is_err());
    }

    #[test]
    fn f1_perfect_and_degenerate() {
        use SentenceLabel::*;
        let gold = SentenceLabel::ALL.to_vec();
        let r = eval_classification(&gold, &gold).unwrap();
        assert_eq!((r.micro, r.macro_f1, r.weighted), (1.0, 1.0, 1.0));

        // one predicted class against uniform gold: closed form 1/7
        let pred = vec![Skill; 7];
        let r = eval_classification(&pred, &gold).unwrap();
        assert!((r.micro - 1.0 / 7.0).abs() < 1e-12);

        assert!(eval_classification(&[Skill], &[]).is_err());
        assert!(eval_classification(&[], &[]).is_err());
    }

    #[test]
    fn f1_two_class_hand_oracle() {
        use SentenceLabel::{Education as A, Skill as B};
        // A: tp 1, fp 0, fn 1 -> p 1, r 1/2, f1 2/3
        // B: tp 1, fp 1, fn 0 -> p 1/2, r 1, f1 2/3
        let r = eval_classification(&[A, B, B], &[A, A, B]).unwrap();
        let third = 2.0 / 3.0;
        assert!((r.micro - third).abs() < 1e-12);
        assert!((r.per_class[&A].f1 - third).abs() < 1e-12);
        assert!((r.per_class[&B].f1 - third).abs() < 1e-12);
        assert!((r.per_class[&A].recall - 0.5).abs() < 1e-12);
        assert!((r.macro_f1 - third).abs() < 1e-12);
        assert!((r.weighted - third).abs() < 1e-12);
    }
}
