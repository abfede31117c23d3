//! Attribute-value catalogs: the data files behind profile synthesis.
//!
//! A catalog is one JSON file per attribute holding coarse categories, their
//! fine-grained values, and sampling weights. Catalogs are data, not code;
//! users extend or replace them without touching the sampler.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::distr::Distribution;
use rand::distr::weighted::WeightedIndex;
use serde::{Deserialize, Serialize};

use super::ProfileError;
use crate::Language;

/// The eight profile attributes, in sampling (and serialization) order.
pub const ATTRIBUTES: [&str; 8] = [
    "age",
    "gender",
    "education",
    "career",
    "personality",
    "interest",
    "location",
    "wealth",
];

fn default_weight() -> f64 {
    1.0
}

/// How fine values are drawn from a catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform over all fine values across entries.
    Uniform,
    /// Uniform over coarse categories, then uniform within the category.
    CoarseToFine,
    /// Categories proportional to their weights, then uniform within.
    Weighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub category: String,
    pub values: Vec<String>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeCatalog {
    pub attribute: String,
    pub sampling_mode: SamplingMode,
    pub entries: Vec<CatalogEntry>,
}

/// A value drawn from a catalog, together with the coarse category it came
/// from (the sampling provenance).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampled {
    pub value: String,
    pub category: String,
}

impl AttributeCatalog {
    /// Structural validation shared by all catalogs, plus per-attribute shape
    /// constraints for the attributes whose category counts are fixed.
    pub fn validate(&self, file: &Path) -> Result<(), ProfileError> {
        let fail = |detail: String| ProfileError::InvalidCatalog {
            path: file.display().to_string(),
            detail,
        };
        if self.entries.is_empty() {
            return Err(fail("catalog has no entries".into()));
        }
        let mut weight_sum = 0.0;
        for (i, entry) in self.entries.iter().enumerate() {
            let at = |msg: &str| {
                fail(format!(
                    "entry {} (category `{}`): {msg}",
                    i + 1,
                    entry.category
                ))
            };
            if entry.values.is_empty() {
                return Err(at("no fine values"));
            }
            if !entry.weight.is_finite() {
                return Err(at("weight is not finite"));
            }
            if entry.weight < 0.0 {
                return Err(at("negative weight"));
            }
            weight_sum += entry.weight;
        }
        if weight_sum == 0.0 {
            return Err(fail("all entry weights are zero".into()));
        }

        match self.attribute.as_str() {
            "personality" => {
                if self.entries.len() != 5 {
                    return Err(fail(format!(
                        "personality requires exactly 5 coarse categories, found {}",
                        self.entries.len()
                    )));
                }
            }
            "interest" => {
                if self.entries.len() != 11 {
                    return Err(fail(format!(
                        "interest requires exactly 11 coarse categories, found {}",
                        self.entries.len()
                    )));
                }
            }
            "career" => {
                if self.entries.len() < 22 {
                    return Err(fail(format!(
                        "career requires at least 20 career categories plus student and \
                         non-working, found {} total",
                        self.entries.len()
                    )));
                }
                let has = |aliases: &[&str]| {
                    self.entries.iter().any(|e| {
                        let c = e.category.to_lowercase();
                        aliases.iter().any(|a| c.contains(a))
                    })
                };
                if !has(&["student", "学生"]) {
                    return Err(fail("career catalog is missing a student category".into()));
                }
                if !has(&["non-working", "无业"]) {
                    return Err(fail(
                        "career catalog is missing a non-working category".into(),
                    ));
                }
            }
            "age" => {
                for entry in &self.entries {
                    for v in &entry.values {
                        let (lo, hi) = parse_age_range(v).ok_or_else(|| {
                            fail(format!(
                                "age value `{v}` is not an integer range like `6-90`"
                            ))
                        })?;
                        if lo < 6 || hi > 90 {
                            return Err(fail(format!(
                                "age range `{v}` exceeds the supported span 6-90"
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Draws one value according to the catalog's sampling mode.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sampled {
        self.sample_filtered(rng, |_, _| true)
            .expect("validated catalog cannot have an empty value set")
    }

    /// Draws one value from the subset allowed by `allow(category, value)`.
    /// Returns `None` when nothing is allowed. Weighted and coarse-to-fine
    /// modes keep their category-level semantics over the restricted set.
    pub fn sample_filtered<R, F>(&self, rng: &mut R, allow: F) -> Option<Sampled>
    where
        R: Rng + ?Sized,
        F: Fn(&str, &str) -> bool,
    {
        let allowed: Vec<(usize, Vec<&String>)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let vals: Vec<&String> =
                    e.values.iter().filter(|v| allow(&e.category, v)).collect();
                (i, vals)
            })
            .filter(|(_, vals)| !vals.is_empty())
            .collect();
        if allowed.is_empty() {
            return None;
        }

        let (entry_idx, value) = match self.sampling_mode {
            SamplingMode::Uniform => {
                let total: usize = allowed.iter().map(|(_, v)| v.len()).sum();
                let mut pick = rng.random_range(0..total);
                let mut found = None;
                for (i, vals) in &allowed {
                    if pick < vals.len() {
                        found = Some((*i, vals[pick].clone()));
                        break;
                    }
                    pick -= vals.len();
                }
                found.expect("index within total")
            }
            SamplingMode::CoarseToFine => {
                let (i, vals) = &allowed[rng.random_range(0..allowed.len())];
                (*i, vals[rng.random_range(0..vals.len())].clone())
            }
            SamplingMode::Weighted => {
                let weights: Vec<f64> = allowed
                    .iter()
                    .map(|(i, _)| self.entries[*i].weight)
                    .collect();
                if weights.iter().sum::<f64>() == 0.0 {
                    return None;
                }
                let dist = WeightedIndex::new(&weights).ok()?;
                let (i, vals) = &allowed[dist.sample(rng)];
                (*i, vals[rng.random_range(0..vals.len())].clone())
            }
        };
        Some(Sampled {
            value,
            category: self.entries[entry_idx].category.clone(),
        })
    }

    /// Draws an integer age. Age catalogs hold `lo-hi` ranges as values;
    /// uniform mode is uniform over the union of integers, weighted mode
    /// picks a range by weight first.
    pub fn sample_age<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let ranges: Vec<(u32, u32, f64)> = self
            .entries
            .iter()
            .flat_map(|e| {
                e.values
                    .iter()
                    .filter_map(|v| parse_age_range(v))
                    .map(move |(lo, hi)| (lo, hi, e.weight))
            })
            .collect();
        match self.sampling_mode {
            SamplingMode::Weighted => {
                let weights: Vec<f64> = ranges.iter().map(|r| r.2).collect();
                let dist = WeightedIndex::new(&weights).expect("validated weights");
                let (lo, hi, _) = ranges[dist.sample(rng)];
                rng.random_range(lo..=hi)
            }
            // Uniform over the union of integers covered by all ranges.
            _ => {
                let total: u64 = ranges.iter().map(|(lo, hi, _)| (hi - lo + 1) as u64).sum();
                let mut pick = rng.random_range(0..total);
                for (lo, hi, _) in &ranges {
                    let span = (hi - lo + 1) as u64;
                    if pick < span {
                        return lo + pick as u32;
                    }
                    pick -= span;
                }
                unreachable!("index within total span")
            }
        }
    }
}

fn parse_age_range(v: &str) -> Option<(u32, u32)> {
    let (lo, hi) = v.split_once('-')?;
    let lo: u32 = lo.trim().parse().ok()?;
    let hi: u32 = hi.trim().parse().ok()?;
    (lo <= hi).then_some((lo, hi))
}

/// All eight catalogs for one language setting.
#[derive(Debug, Clone)]
pub struct CatalogSet {
    catalogs: BTreeMap<String, AttributeCatalog>,
}

impl CatalogSet {
    pub fn get(&self, attribute: &str) -> &AttributeCatalog {
        &self.catalogs[attribute]
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.catalogs.keys().map(String::as_str)
    }
}

/// Loads and validates the eight attribute catalogs for `language`.
///
/// `catalog_dir` may either contain the per-attribute JSON files directly or
/// hold them in a language subdirectory (`en/`, `zh/`).
pub fn load_catalogs(catalog_dir: &Path, language: Language) -> Result<CatalogSet, ProfileError> {
    let lang_dir = catalog_dir.join(language.code());
    let dir: PathBuf = if lang_dir.is_dir() {
        lang_dir
    } else {
        catalog_dir.to_path_buf()
    };
    if !dir.is_dir() {
        return Err(ProfileError::CatalogDirMissing(dir.display().to_string()));
    }

    let mut catalogs = BTreeMap::new();
    for attr in ATTRIBUTES {
        let path = dir.join(format!("{attr}.json"));
        let raw = std::fs::read_to_string(&path).map_err(|_| ProfileError::MissingCatalog {
            attribute: attr.to_string(),
            path: path.display().to_string(),
        })?;
        let catalog: AttributeCatalog =
            serde_json::from_str(&raw).map_err(|e| ProfileError::MalformedCatalog {
                path: path.display().to_string(),
                line: e.line(),
                detail: e.to_string(),
            })?;
        if catalog.attribute != attr {
            return Err(ProfileError::InvalidCatalog {
                path: path.display().to_string(),
                detail: format!(
                    "file declares attribute `{}`, expected `{attr}`",
                    catalog.attribute
                ),
            });
        }
        catalog.validate(&path)?;
        catalogs.insert(attr.to_string(), catalog);
    }
    Ok(CatalogSet { catalogs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::io::Write;

    fn shipped_catalog_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/catalogs")
    }

    #[test]
    fn shipped_catalogs_load_for_both_languages() {
        for lang in [Language::English, Language::Chinese] {
            let set = load_catalogs(&shipped_catalog_dir(), lang).unwrap();
            assert_eq!(set.attributes().count(), 8);
            assert_eq!(set.get("personality").entries.len(), 5);
            assert_eq!(set.get("interest").entries.len(), 11);
            assert!(set.get("career").entries.len() >= 22);
        }
    }

    #[test]
    fn missing_catalog_names_the_attribute() {
        let dir = tempfile::tempdir().unwrap();
        for attr in ATTRIBUTES {
            if attr == "career" {
                continue;
            }
            let src = shipped_catalog_dir()
                .join("en")
                .join(format!("{attr}.json"));
            std::fs::copy(src, dir.path().join(format!("{attr}.json"))).unwrap();
        }
        match load_catalogs(dir.path(), Language::English) {
            Err(ProfileError::MissingCatalog { attribute, .. }) => assert_eq!(attribute, "career"),
            other => panic!("expected MissingCatalog, got {other:?}"),
        }
    }

    #[test]
    fn negative_weight_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        for attr in ATTRIBUTES {
            let src = shipped_catalog_dir()
                .join("en")
                .join(format!("{attr}.json"));
            std::fs::copy(src, dir.path().join(format!("{attr}.json"))).unwrap();
        }
        let mut f = std::fs::File::create(dir.path().join("wealth.json")).unwrap();
        write!(
            f,
            r#"{{"attribute": "wealth", "sampling_mode": "weighted",
                "entries": [{{"category": "low income", "values": ["low income"], "weight": -1.0}}]}}"#
        )
        .unwrap();
        match load_catalogs(dir.path(), Language::English) {
            Err(ProfileError::InvalidCatalog { detail, .. }) => {
                assert!(detail.contains("negative weight"), "{detail}");
            }
            other => panic!("expected InvalidCatalog, got {other:?}"),
        }
    }

    #[test]
    fn all_zero_weights_fail_validation() {
        let catalog = AttributeCatalog {
            attribute: "wealth".into(),
            sampling_mode: SamplingMode::Weighted,
            entries: vec![
                CatalogEntry {
                    category: "a".into(),
                    values: vec!["x".into()],
                    weight: 0.0,
                },
                CatalogEntry {
                    category: "b".into(),
                    values: vec!["y".into()],
                    weight: 0.0,
                },
            ],
        };
        assert!(catalog.validate(Path::new("wealth.json")).is_err());
    }

    #[test]
    fn malformed_json_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        for attr in ATTRIBUTES {
            let src = shipped_catalog_dir()
                .join("en")
                .join(format!("{attr}.json"));
            std::fs::copy(src, dir.path().join(format!("{attr}.json"))).unwrap();
        }
        std::fs::write(
            dir.path().join("gender.json"),
            "{\n  \"attribute\": \"gender\",\n  oops\n}",
        )
        .unwrap();
        match load_catalogs(dir.path(), Language::English) {
            Err(ProfileError::MalformedCatalog { path, line, .. }) => {
                assert!(path.ends_with("gender.json"));
                assert_eq!(line, 3);
            }
            other => panic!("expected MalformedCatalog, got {other:?}"),
        }
    }

    #[test]
    fn coarse_to_fine_sample_stays_in_category() {
        let set = load_catalogs(&shipped_catalog_dir(), Language::English).unwrap();
        let interest = set.get("interest");
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..500 {
            let s = interest.sample(&mut rng);
            let entry = interest
                .entries
                .iter()
                .find(|e| e.category == s.category)
                .unwrap();
            assert!(entry.values.contains(&s.value));
        }
    }

    #[test]
    fn filtered_sample_respects_the_predicate() {
        let set = load_catalogs(&shipped_catalog_dir(), Language::English).unwrap();
        let career = set.get("career");
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = career
                .sample_filtered(&mut rng, |_, v| v.contains("student"))
                .unwrap();
            assert!(s.value.contains("student"), "{}", s.value);
        }
        assert!(career.sample_filtered(&mut rng, |_, _| false).is_none());
    }

    #[test]
    fn weighted_sampling_tracks_weights_within_three_sigma() {
        let set = load_catalogs(&shipped_catalog_dir(), Language::English).unwrap();
        let n = 10_000usize;
        for attr in ["education", "location", "wealth"] {
            let catalog = set.get(attr);
            let total_weight: f64 = catalog.entries.iter().map(|e| e.weight).sum();
            let mut rng = ChaCha12Rng::seed_from_u64(31);
            let mut counts: std::collections::HashMap<String, usize> =
                std::collections::HashMap::new();
            for _ in 0..n {
                *counts.entry(catalog.sample(&mut rng).category).or_insert(0) += 1;
            }
            for entry in &catalog.entries {
                let p = entry.weight / total_weight;
                let freq = *counts.get(&entry.category).unwrap_or(&0) as f64 / n as f64;
                let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() <= bound,
                    "{attr}/{}: freq {freq:.4} vs weight {p:.4} (3σ = {bound:.4})",
                    entry.category
                );
            }
        }
    }

    #[test]
    fn weighted_age_catalog_is_a_supported_option() {
        let catalog = AttributeCatalog {
            attribute: "age".into(),
            sampling_mode: SamplingMode::Weighted,
            entries: vec![
                CatalogEntry {
                    category: "young".into(),
                    values: vec!["6-17".into()],
                    weight: 0.2,
                },
                CatalogEntry {
                    category: "adult".into(),
                    values: vec!["18-64".into()],
                    weight: 0.7,
                },
                CatalogEntry {
                    category: "senior".into(),
                    values: vec!["65-90".into()],
                    weight: 0.1,
                },
            ],
        };
        catalog.validate(Path::new("age.json")).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 20_000usize;
        let mut adult = 0usize;
        for _ in 0..n {
            let a = catalog.sample_age(&mut rng);
            assert!((6..=90).contains(&a));
            if (18..=64).contains(&a) {
                adult += 1;
            }
        }
        let freq = adult as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.02, "adult bucket frequency {freq}");
    }

    #[test]
    fn age_sampling_covers_the_range() {
        let set = load_catalogs(&shipped_catalog_dir(), Language::English).unwrap();
        let age = set.get("age");
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..20_000 {
            let a = age.sample_age(&mut rng);
            assert!((6..=90).contains(&a));
            seen.insert(a);
        }
        assert_eq!(seen.len(), 85);
    }
}
