//! Contradiction rules: decidable constraints between pairs of profile
//! attributes, enforced during synthesis and repair.
//!
//! Three kinds exist: age-career, age-education, and career-education. The
//! default thresholds ship as a data file and can be overridden; predicates
//! match catalog values by case-insensitive keyword containment so the same
//! rule file covers both language settings.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{ProfileError, UserProfile};

const DEFAULT_RULES: &str = include_str!("../../../../data/rules/contradiction_rules.json");

/// An education level with its minimum plausible age and the keywords that
/// detect it inside a catalog value. Higher `rank` means more advanced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EducationLevel {
    pub level: String,
    pub rank: u32,
    pub min_age: u32,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    #[serde(rename = "age-career")]
    AgeCareer,
    #[serde(rename = "age-education")]
    AgeEducation,
    #[serde(rename = "career-education")]
    CareerEducation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EducationRequirement {
    pub career_keywords: Vec<String>,
    pub min_level: String,
}

/// Declarative predicate over two attributes of a single profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predicate {
    /// Education level implies a minimum age (thresholds in the level table).
    EducationMinAge {},
    /// Careers require a minimum age unless matched by an exemption keyword.
    CareerMinAge {
        min_age: u32,
        exempt_keywords: Vec<String>,
    },
    /// Student careers carry a maximum age.
    StudentMaxAge {
        max_age: u32,
        student_keywords: Vec<String>,
    },
    /// Certain careers require a minimum education level.
    CareerRequiresEducation {
        requirements: Vec<EducationRequirement>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContradictionRule {
    pub rule_id: String,
    pub kind: RuleKind,
    pub predicate: Predicate,
}

/// A rule violation found in a profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule_id: String,
    pub kind: RuleKind,
    pub message: String,
}

/// The full rule table plus the education-level ladder it refers to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSet {
    pub education_levels: Vec<EducationLevel>,
    pub rules: Vec<ContradictionRule>,
}

fn matches_any(value: &str, keywords: &[String]) -> bool {
    let v = value.to_lowercase();
    keywords.iter().any(|k| v.contains(&k.to_lowercase()))
}

impl RuleSet {
    /// The bundled default rules.
    pub fn default_rules() -> Self {
        serde_json::from_str(DEFAULT_RULES).expect("bundled contradiction rules are valid JSON")
    }

    pub fn from_file(path: &Path) -> Result<Self, ProfileError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ProfileError::RulesLoad {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&raw).map_err(|e| ProfileError::RulesLoad {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    /// Detects the education level of a catalog value, most advanced first so
    /// e.g. "doctoral degree" is not claimed by a lower level's keywords.
    /// Unknown values carry no constraints.
    pub fn education_level_of(&self, education: &str) -> Option<&EducationLevel> {
        let mut levels: Vec<&EducationLevel> = self.education_levels.iter().collect();
        levels.sort_by_key(|l| std::cmp::Reverse(l.rank));
        levels
            .into_iter()
            .find(|l| matches_any(education, &l.keywords))
    }

    fn education_rank(&self, education: &str) -> u32 {
        self.education_level_of(education).map_or(0, |l| l.rank)
    }

    fn level_rank(&self, level_name: &str) -> u32 {
        self.education_levels
            .iter()
            .find(|l| l.level == level_name)
            .map_or(0, |l| l.rank)
    }

    /// Evaluates every rule against `profile` and returns all violations.
    pub fn violations(&self, profile: &UserProfile) -> Vec<Violation> {
        let mut found = Vec::new();
        for rule in &self.rules {
            let message = match &rule.predicate {
                Predicate::EducationMinAge {} => self
                    .education_level_of(&profile.education)
                    .and_then(|level| {
                        (profile.age < level.min_age).then(|| {
                            format!(
                                "education `{}` (level {}) requires age >= {}, profile age is {}",
                                profile.education, level.level, level.min_age, profile.age
                            )
                        })
                    }),
                Predicate::CareerMinAge {
                    min_age,
                    exempt_keywords,
                } => (!matches_any(&profile.career, exempt_keywords) && profile.age < *min_age)
                    .then(|| {
                        format!(
                            "career `{}` requires age >= {min_age}, profile age is {}",
                            profile.career, profile.age
                        )
                    }),
                Predicate::StudentMaxAge {
                    max_age,
                    student_keywords,
                } => (matches_any(&profile.career, student_keywords) && profile.age > *max_age)
                    .then(|| {
                        format!(
                            "student career `{}` requires age <= {max_age}, profile age is {}",
                            profile.career, profile.age
                        )
                    }),
                Predicate::CareerRequiresEducation { requirements } => requirements
                    .iter()
                    .find(|req| {
                        matches_any(&profile.career, &req.career_keywords)
                            && self.education_rank(&profile.education)
                                < self.level_rank(&req.min_level)
                    })
                    .map(|req| {
                        format!(
                            "career `{}` requires education >= {}, profile has `{}`",
                            profile.career, req.min_level, profile.education
                        )
                    }),
            };
            if let Some(message) = message {
                found.push(Violation {
                    rule_id: rule.rule_id.clone(),
                    kind: rule.kind,
                    message,
                });
            }
        }
        found
    }

    /// Whether a candidate career value is compatible with the given age and
    /// education under every career-involving rule.
    pub fn career_allowed(&self, age: u32, education: &str, career: &str) -> bool {
        self.rules.iter().all(|rule| match &rule.predicate {
            Predicate::CareerMinAge {
                min_age,
                exempt_keywords,
            } => matches_any(career, exempt_keywords) || age >= *min_age,
            Predicate::StudentMaxAge {
                max_age,
                student_keywords,
            } => !matches_any(career, student_keywords) || age <= *max_age,
            Predicate::CareerRequiresEducation { requirements } => requirements.iter().all(|req| {
                !matches_any(career, &req.career_keywords)
                    || self.education_rank(education) >= self.level_rank(&req.min_level)
            }),
            Predicate::EducationMinAge {} => true,
        })
    }

    /// Whether a candidate education value is compatible with the given age.
    pub fn education_allowed(&self, age: u32, education: &str) -> bool {
        self.rules.iter().all(|rule| match &rule.predicate {
            Predicate::EducationMinAge {} => self
                .education_level_of(education)
                .is_none_or(|level| age >= level.min_age),
            _ => true,
        })
    }
}
