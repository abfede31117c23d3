//! Profile synthesis: unique, contradiction-free user profiles at scale.
//!
//! The primary construction path samples every attribute from predefined
//! catalogs (uniform, coarse-to-fine, or weighted, per attribute) and then
//! repairs any age-career, age-education, or career-education contradiction
//! by resampling only dynamic attributes. A secondary path derives a profile
//! from real-data context text via an LLM, backfilling whatever the model
//! leaves out.
//!
//! Everything is a pure function of (catalogs, rules, seed, language).

mod catalog;
mod rules;

pub use catalog::{
    ATTRIBUTES, AttributeCatalog, CatalogEntry, CatalogSet, Sampled, SamplingMode, load_catalogs,
};
pub use rules::{
    ContradictionRule, EducationLevel, EducationRequirement, Predicate, RuleKind, RuleSet,
    Violation,
};

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, LlmClient, llm_complete};
use crate::{Language, derive_seed};

/// Number of repair passes before giving up on a profile.
pub const MAX_REPAIR_ITERS: usize = 20;

/// Parse attempts for LLM-derived profiles.
pub const PROFILE_PARSE_RETRIES: usize = 3;

/// How each attribute value was obtained. Not serialized into profile files;
/// used by the batch summary and by tests of sampling soundness.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    /// Coarse category each sampled attribute came from.
    pub coarse: BTreeMap<String, String>,
    /// Attributes that were resampled by contradiction repair.
    pub repaired: Vec<String>,
    /// Attributes backfilled by sampling after an LLM left them out.
    pub backfilled: Vec<String>,
}

/// One simulated user: eight attributes split into static (age, gender,
/// personality) and dynamic (education, career, interest, location, wealth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub age: u32,
    pub gender: String,
    pub education: String,
    pub career: String,
    pub personality: String,
    pub interest: String,
    pub location: String,
    pub wealth: String,
    pub language_setting: Language,
    #[serde(skip)]
    pub provenance: Provenance,
}

impl UserProfile {
    /// Attributes inherent to the user, never touched by repair.
    pub fn static_attrs(&self) -> [(&'static str, String); 3] {
        [
            ("age", self.age.to_string()),
            ("gender", self.gender.clone()),
            ("personality", self.personality.clone()),
        ]
    }

    /// Attributes reflecting transient, external circumstances.
    pub fn dynamic_attrs(&self) -> [(&'static str, &str); 5] {
        [
            ("education", self.education.as_str()),
            ("career", self.career.as_str()),
            ("interest", self.interest.as_str()),
            ("location", self.location.as_str()),
            ("wealth", self.wealth.as_str()),
        ]
    }

    /// The eight attribute values, used for duplicate-tuple reporting.
    fn attribute_tuple(&self) -> String {
        format!(
            "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}",
            self.age,
            self.gender,
            self.education,
            self.career,
            self.personality,
            self.interest,
            self.location,
            self.wealth
        )
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("catalog directory not found: {0}")]
    CatalogDirMissing(String),
    #[error("missing catalog for attribute `{attribute}` (expected {path})")]
    MissingCatalog { attribute: String, path: String },
    #[error("{path}:{line}: malformed catalog: {detail}")]
    MalformedCatalog {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path}: invalid catalog: {detail}")]
    InvalidCatalog { path: String, detail: String },
    #[error("failed to load rules from {path}: {detail}")]
    RulesLoad { path: String, detail: String },
    #[error("no catalog value for `{attribute}` satisfies rule `{rule_id}` on this profile")]
    Unsatisfiable { attribute: String, rule_id: String },
    #[error("repair budget of {max_iters} passes exhausted; last violated rule: `{rule_id}`")]
    RepairBudgetExhausted { max_iters: usize, rule_id: String },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("profile {index} of batch failed: {source}")]
    BatchItem {
        index: usize,
        #[source]
        source: Box<ProfileError>,
    },
    #[error("context text must not be empty")]
    EmptyContext,
    #[error("LLM profile output unparseable after {attempts} attempts; last output: {raw:?}")]
    UnparseableProfile { attempts: usize, raw: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Samples one full profile for `seed`, repairing contradictions before
/// returning. Identical inputs produce an identical profile.
pub fn sample_profile(
    catalogs: &CatalogSet,
    rules: &RuleSet,
    seed: u64,
    language: Language,
) -> Result<UserProfile, ProfileError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut provenance = Provenance::default();

    let age = catalogs.get("age").sample_age(&mut rng);
    let mut draw = |attr: &str, rng: &mut ChaCha12Rng| {
        let s = catalogs.get(attr).sample(rng);
        provenance.coarse.insert(attr.to_string(), s.category);
        s.value
    };
    let gender = draw("gender", &mut rng);
    let education = draw("education", &mut rng);
    let career = draw("career", &mut rng);
    let personality = draw("personality", &mut rng);
    let interest = draw("interest", &mut rng);
    let location = draw("location", &mut rng);
    let wealth = draw("wealth", &mut rng);

    let profile = UserProfile {
        user_id: format!("u{seed:016x}"),
        age,
        gender,
        education,
        career,
        personality,
        interest,
        location,
        wealth,
        language_setting: language,
        provenance,
    };
    repair_contradictions(profile, rules, catalogs, &mut rng, MAX_REPAIR_ITERS)
}

/// Resamples dynamic attributes (career first, then education) until no
/// contradiction rule is violated. Age, gender, and personality are never
/// mutated. Fails after `max_iters` passes or when no catalog value can
/// satisfy the violated rule.
pub fn repair_contradictions<R: Rng + ?Sized>(
    mut profile: UserProfile,
    rules: &RuleSet,
    catalogs: &CatalogSet,
    rng: &mut R,
    max_iters: usize,
) -> Result<UserProfile, ProfileError> {
    for _ in 0..max_iters {
        let violations = rules.violations(&profile);
        let Some(first) = violations.first() else {
            return Ok(profile);
        };

        // Career-involving violations are fixed by resampling career; pure
        // age-education violations by resampling education. Both resamples
        // draw from the subset already compatible with the static attributes.
        let career_violation = violations
            .iter()
            .find(|v| matches!(v.kind, RuleKind::AgeCareer | RuleKind::CareerEducation));
        if let Some(v) = career_violation {
            let sampled = catalogs
                .get("career")
                .sample_filtered(rng, |_, value| {
                    rules.career_allowed(profile.age, &profile.education, value)
                })
                .ok_or_else(|| ProfileError::Unsatisfiable {
                    attribute: "career".to_string(),
                    rule_id: v.rule_id.clone(),
                })?;
            profile
                .provenance
                .coarse
                .insert("career".into(), sampled.category);
            profile.career = sampled.value;
            mark_repaired(&mut profile, "career");
        } else {
            let sampled = catalogs
                .get("education")
                .sample_filtered(rng, |_, value| rules.education_allowed(profile.age, value))
                .ok_or_else(|| ProfileError::Unsatisfiable {
                    attribute: "education".to_string(),
                    rule_id: first.rule_id.clone(),
                })?;
            profile
                .provenance
                .coarse
                .insert("education".into(), sampled.category);
            profile.education = sampled.value;
            mark_repaired(&mut profile, "education");
        }
    }

    match rules.violations(&profile).first() {
        None => Ok(profile),
        Some(v) => Err(ProfileError::RepairBudgetExhausted {
            max_iters,
            rule_id: v.rule_id.clone(),
        }),
    }
}

fn mark_repaired(profile: &mut UserProfile, attr: &str) {
    if !profile.provenance.repaired.iter().any(|a| a == attr) {
        profile.provenance.repaired.push(attr.to_string());
    }
}

/// Summary statistics for a generated batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_profiles: usize,
    /// Profiles that needed at least one repair pass.
    pub n_repaired: usize,
    /// Profiles whose full eight-attribute tuple also occurs earlier in the
    /// batch. Allowed, but reported.
    pub n_duplicate_tuples: usize,
}

#[derive(Debug, Clone)]
pub struct ProfileBatch {
    pub profiles: Vec<UserProfile>,
    pub summary: BatchSummary,
}

/// Generates `n` profiles with per-user seeds derived from `master_seed`.
/// Any single sampling failure aborts the batch, reporting the failing index.
pub fn generate_batch(
    catalogs: &CatalogSet,
    rules: &RuleSet,
    n: usize,
    master_seed: u64,
    language: Language,
) -> Result<ProfileBatch, ProfileError> {
    if n == 0 {
        return Err(ProfileError::EmptyBatch);
    }
    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let seed = derive_seed(master_seed, i as u64);
        let profile = sample_profile(catalogs, rules, seed, language).map_err(|e| {
            ProfileError::BatchItem {
                index: i,
                source: Box::new(e),
            }
        })?;
        profiles.push(profile);
    }

    let mut ids = std::collections::HashSet::with_capacity(n);
    for p in &profiles {
        // derive_seed is injective per index, so this only fires on misuse.
        assert!(
            ids.insert(p.user_id.as_str()),
            "duplicate user_id {}",
            p.user_id
        );
    }
    let mut tuples = std::collections::HashSet::with_capacity(n);
    let n_duplicate_tuples = profiles
        .iter()
        .filter(|p| !tuples.insert(p.attribute_tuple()))
        .count();
    let n_repaired = profiles
        .iter()
        .filter(|p| !p.provenance.repaired.is_empty())
        .count();

    Ok(ProfileBatch {
        summary: BatchSummary {
            n_profiles: profiles.len(),
            n_repaired,
            n_duplicate_tuples,
        },
        profiles,
    })
}

/// Value counts per attribute over a batch, for the generation summary.
pub fn attribute_marginals(profiles: &[UserProfile]) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut bump = |attr: &str, value: &str| {
        *out.entry(attr.to_string())
            .or_default()
            .entry(value.to_string())
            .or_insert(0) += 1;
    };
    for p in profiles {
        bump("gender", &p.gender);
        bump("education", &p.education);
        bump("career", &p.career);
        bump("personality", &p.personality);
        bump("interest", &p.interest);
        bump("location", &p.location);
        bump("wealth", &p.wealth);
    }
    out
}

const FROM_CONTEXT_PROMPT_EN: &str = "You are analyzing a web search user. Based on the context below, infer the user's profile.

Output exactly eight lines inside a fenced code block, one `key: value` per line, using exactly these keys: age, gender, education, career, personality, interest, location, wealth. Age must be an integer between 6 and 90. Keep values concise.

** Context **
{context}

** Profile **
";

const FROM_CONTEXT_PROMPT_ZH: &str = "您正在分析一位搜索引擎用户。请根据下面的上下文推断该用户的档案。

请在代码块中输出恰好八行，每行一个“键: 值”，键依次为：age、gender、education、career、personality、interest、location、wealth。age 必须是 6 到 90 之间的整数。值保持简洁。

** 上下文 **
{context}

** 档案 **
";

/// Derives a profile from real user data context (a task description or a
/// behavior log) via the LLM, backfilling missing attributes by sampling and
/// repairing contradictions afterwards.
pub fn profile_from_context(
    llm: &dyn LlmClient,
    context: &str,
    catalogs: &CatalogSet,
    rules: &RuleSet,
    seed: u64,
    language: Language,
) -> Result<UserProfile, ProfileError> {
    if context.trim().is_empty() {
        return Err(ProfileError::EmptyContext);
    }
    let template = match language {
        Language::English => FROM_CONTEXT_PROMPT_EN,
        Language::Chinese => FROM_CONTEXT_PROMPT_ZH,
    };
    let prompt = template.replace("{context}", context.trim());

    let mut last_raw = String::new();
    let mut fields = None;
    for _ in 0..PROFILE_PARSE_RETRIES {
        let raw = llm_complete(llm, &prompt)?;
        match parse_profile_fields(&raw) {
            Some(parsed) => {
                fields = Some(parsed);
                break;
            }
            None => last_raw = raw,
        }
    }
    let fields = fields.ok_or(ProfileError::UnparseableProfile {
        attempts: PROFILE_PARSE_RETRIES,
        raw: last_raw,
    })?;

    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    context.hash(&mut hasher);
    let user_id = format!("ctx{:016x}", derive_seed(seed, hasher.finish()));

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut provenance = Provenance::default();

    let age = match fields.get("age").and_then(|v| extract_integer(v)) {
        Some(a) => a.clamp(6, 90),
        None => {
            provenance.backfilled.push("age".to_string());
            catalogs.get("age").sample_age(&mut rng)
        }
    };
    let mut take_or_sample = |attr: &str, rng: &mut ChaCha12Rng| match fields.get(attr) {
        Some(v) => v.clone(),
        None => {
            let s = catalogs.get(attr).sample(rng);
            provenance.coarse.insert(attr.to_string(), s.category);
            provenance.backfilled.push(attr.to_string());
            s.value
        }
    };
    let gender = take_or_sample("gender", &mut rng);
    let education = take_or_sample("education", &mut rng);
    let career = take_or_sample("career", &mut rng);
    let personality = take_or_sample("personality", &mut rng);
    let interest = take_or_sample("interest", &mut rng);
    let location = take_or_sample("location", &mut rng);
    let wealth = take_or_sample("wealth", &mut rng);

    let profile = UserProfile {
        user_id,
        age,
        gender,
        education,
        career,
        personality,
        interest,
        location,
        wealth,
        language_setting: language,
        provenance,
    };
    repair_contradictions(profile, rules, catalogs, &mut rng, MAX_REPAIR_ITERS)
}

/// Pulls `key: value` lines out of the LLM output, preferring the first
/// fenced block when one exists. Returns `None` when no known key is found.
fn parse_profile_fields(raw: &str) -> Option<BTreeMap<String, String>> {
    let body = match raw.split("```").nth(1) {
        Some(fenced) => fenced,
        None => raw,
    };
    let mut fields = BTreeMap::new();
    for line in body.lines() {
        let line = line.trim_start_matches(['-', '*', ' ', '\t']);
        let Some((key, value)) = line.split_once([':', '：']) else {
            continue;
        };
        let key = canonical_attribute(key.trim());
        let value = value.trim();
        if let Some(key) = key
            && !value.is_empty()
        {
            fields
                .entry(key.to_string())
                .or_insert_with(|| value.to_string());
        }
    }
    (!fields.is_empty()).then_some(fields)
}

fn canonical_attribute(key: &str) -> Option<&'static str> {
    let k = key.to_lowercase();
    match k.as_str() {
        "age" | "年龄" => Some("age"),
        "gender" | "性别" => Some("gender"),
        "education" | "教育" | "教育水平" | "学历" => Some("education"),
        "career" | "职业" => Some("career"),
        "personality" | "性格" => Some("personality"),
        "interest" | "interests" | "兴趣" | "兴趣爱好" => Some("interest"),
        "location" | "地点" | "所在地" | "位置" => Some("location"),
        "wealth" | "财富" | "收入水平" | "财富水平" => Some("wealth"),
        _ => None,
    }
}

fn extract_integer(value: &str) -> Option<u32> {
    let digits: String = value
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}
