//! Admission pipeline: deduplicate, filter, categorize and tag, evaluate,
//! then admit or reject.

mod category;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evaluation::sandbox::Sandbox;
use crate::evaluation::{evaluate, Dimension, EvaluationError, EvaluationReport, Grade};
use crate::judge::JudgeProvider;
use crate::skill::{validate_package, Category, Fingerprint, SkillPackage, Tag, MAX_TAGS};
use crate::text;

pub use category::{categorize_fallback, CategoryTable, CATEGORY_TABLE_JSON, FALLBACK_TAG_COUNT};

pub const DUPLICATE_REASON: &str = "identical SKILL.md and directory structure";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_instruction_chars: usize,
    pub min_step_markers: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_instruction_chars: 200,
            min_step_markers: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FilterViolation {
    TooShort { chars: usize, min: usize },
    DescriptionDuplicatesName,
    TooFewSteps { found: usize, min: usize },
    PlaceholderContent { markers: Vec<String> },
    InvalidPackage { detail: String },
}

impl FilterViolation {
    pub fn reason(&self) -> &'static str {
        match self {
            FilterViolation::TooShort { .. } => "too short",
            FilterViolation::DescriptionDuplicatesName => "description duplicates name",
            FilterViolation::TooFewSteps { .. } => "too few steps",
            FilterViolation::PlaceholderContent { .. } => "placeholder content",
            FilterViolation::InvalidPackage { .. } => "invalid package",
        }
    }
}

impl std::fmt::Display for FilterViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterViolation::TooShort { chars, min } => {
                write!(f, "too short: {chars} characters of instructions, need {min}")
            }
            FilterViolation::DescriptionDuplicatesName => {
                f.write_str("description duplicates name: it only repeats the name")
            }
            FilterViolation::TooFewSteps { found, min } => {
                write!(f, "too few steps: {found} distinct step markers, need {min}")
            }
            FilterViolation::PlaceholderContent { markers } => {
                write!(f, "placeholder content: {}", markers.join(", "))
            }
            FilterViolation::InvalidPackage { detail } => write!(f, "invalid package: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateEntry {
    pub dropped_id: String,
    pub kept_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredEntry {
    pub skill_id: String,
    pub violations: Vec<FilterViolation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub skill_id: String,
    pub reasons: Vec<String>,
    pub report: EvaluationReport,
}

/// Outcome of a consolidation run. Every input lands in exactly one list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_count: usize,
    pub duplicates_removed: Vec<DuplicateEntry>,
    pub filtered_out: Vec<FilteredEntry>,
    pub admitted: Vec<String>,
    pub rejected: Vec<RejectedEntry>,
}

impl CurationReport {
    pub fn accounted(&self) -> usize {
        self.duplicates_removed.len() + self.filtered_out.len() + self.admitted.len() + self.rejected.len()
    }

    /// Why each non-admitted package was turned away: filter violations
    /// first, then failed admission gates.
    pub fn reasons(&self) -> Vec<String> {
        let mut reasons: Vec<String> = self
            .filtered_out
            .iter()
            .flat_map(|f| f.violations.iter().map(ToString::to_string))
            .collect();
        reasons.extend(self.rejected.iter().flat_map(|r| r.reasons.iter().cloned()));
        reasons
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// An admitted skill with the labels curation assigned to it.
#[derive(Debug, Clone)]
pub struct AdmittedSkill {
    pub package: SkillPackage,
    pub category: Category,
    pub tags: Vec<Tag>,
    pub evaluation: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct Consolidation {
    pub report: CurationReport,
    pub admitted: Vec<AdmittedSkill>,
}

/// Splits `packages` into survivors and dropped exact duplicates.
///
/// Two packages are duplicates when both fingerprint hashes agree. Each
/// group keeps its lexicographically smallest id (first occurrence on a
/// tie); survivors stay in input order.
pub fn deduplicate(packages: Vec<SkillPackage>) -> (Vec<SkillPackage>, Vec<DuplicateEntry>) {
    let mut keeper: BTreeMap<Fingerprint, usize> = BTreeMap::new();
    let fingerprints: Vec<Fingerprint> = packages.iter().map(SkillPackage::fingerprint).collect();
    for (i, fp) in fingerprints.iter().enumerate() {
        keeper
            .entry(fp.clone())
            .and_modify(|k| {
                if packages[i].id < packages[*k].id {
                    *k = i;
                }
            })
            .or_insert(i);
    }
    let mut survivors = Vec::new();
    let mut dropped = Vec::new();
    for (i, pkg) in packages.iter().enumerate() {
        let k = keeper[&fingerprints[i]];
        if k == i {
            survivors.push(pkg.clone());
        } else {
            dropped.push(DuplicateEntry {
                dropped_id: pkg.id.clone(),
                kept_id: packages[k].id.clone(),
                reason: DUPLICATE_REASON.to_string(),
            });
        }
    }
    (survivors, dropped)
}

fn words(text: &str) -> Vec<String> {
    text::tokenize(text)
}

/// True when the description's tokens are the name's tokens or a prefix of
/// them, i.e. the description adds nothing beyond the name.
pub fn description_duplicates_name(name: &str, description: &str) -> bool {
    let n = words(name);
    let d = words(description);
    d.len() <= n.len() && n.starts_with(&d)
}

/// Applies the quality rules. Returns every violated rule.
pub fn filter_skill(pkg: &SkillPackage, config: &FilterConfig) -> Result<(), Vec<FilterViolation>> {
    let mut violations = Vec::new();
    let body = &pkg.document.instructions;
    let chars = body.trim().chars().count();
    if chars < config.min_instruction_chars {
        violations.push(FilterViolation::TooShort {
            chars,
            min: config.min_instruction_chars,
        });
    }
    let meta = &pkg.document.metadata;
    if description_duplicates_name(&meta.name, &meta.description) {
        violations.push(FilterViolation::DescriptionDuplicatesName);
    }
    let steps = text::step_markers(body);
    if steps < config.min_step_markers {
        violations.push(FilterViolation::TooFewSteps {
            found: steps,
            min: config.min_step_markers,
        });
    }
    let markers = text::placeholder_markers(body);
    if !markers.is_empty() {
        violations.push(FilterViolation::PlaceholderContent { markers });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Category and tags for `pkg`.
///
/// The judge is asked first; if it fails the keyword table answers. A
/// category declared in the document (other than `Other`) is kept over the
/// inferred one. Declared tags come first, then inferred ones, deduplicated
/// and capped at the tag limit.
pub fn categorize_and_tag(pkg: &SkillPackage, judge: &dyn JudgeProvider) -> (Category, Vec<Tag>) {
    let (inferred, inferred_tags) = judge.categorize(pkg).unwrap_or_else(|e| {
        tracing::debug!(error = %e, skill = %pkg.id, "categorizing with keyword table");
        categorize_fallback(&CategoryTable::default(), pkg)
    });
    let declared = pkg.document.metadata.category;
    let category = if declared != Category::Other {
        declared
    } else {
        inferred
    };
    let mut tags: Vec<Tag> = Vec::new();
    for tag in pkg.document.metadata.tags.iter().chain(&inferred_tags) {
        if tags.len() == MAX_TAGS {
            break;
        }
        if !tags.contains(tag) {
            tags.push(tag.clone());
        }
    }
    (category, tags)
}

/// Admission policy: Safety and Executability must not be Poor, and at most
/// one dimension overall may be Poor. Returns the failed conditions.
pub fn admission_failures(report: &EvaluationReport) -> Vec<String> {
    let mut reasons = Vec::new();
    for dim in [Dimension::Safety, Dimension::Executability] {
        if report.grade(dim) == Grade::Poor {
            reasons.push(format!("{dim} is Poor"));
        }
    }
    let poor: Vec<String> = Dimension::ALL
        .iter()
        .filter(|d| report.grade(**d) == Grade::Poor)
        .map(|d| d.to_string())
        .collect();
    if poor.len() > 1 {
        reasons.push(format!("{} dimensions are Poor ({})", poor.len(), poor.join(", ")));
    }
    reasons
}

pub fn admits(report: &EvaluationReport) -> bool {
    admission_failures(report).is_empty()
}

#[derive(Debug, Clone)]
pub struct CurationConfig {
    pub filter: FilterConfig,
    /// Worker threads for the per-skill stages; 1 runs them inline.
    pub workers: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            filter: FilterConfig::default(),
            workers: 1,
        }
    }
}

enum Verdict {
    Filtered(Vec<FilterViolation>),
    Evaluated {
        category: Category,
        tags: Vec<Tag>,
        report: EvaluationReport,
    },
}

fn judge_one(
    pkg: &SkillPackage,
    judge: &dyn JudgeProvider,
    sandbox: Option<&Sandbox>,
    config: &CurationConfig,
) -> Result<Verdict, EvaluationError> {
    let validation = validate_package(pkg);
    if !validation.is_ok() {
        return Ok(Verdict::Filtered(
            validation
                .violations
                .iter()
                .map(|v| FilterViolation::InvalidPackage { detail: v.to_string() })
                .collect(),
        ));
    }
    if let Err(violations) = filter_skill(pkg, &config.filter) {
        return Ok(Verdict::Filtered(violations));
    }
    let (category, tags) = categorize_and_tag(pkg, judge);
    let report = evaluate(pkg, judge, sandbox)?;
    Ok(Verdict::Evaluated {
        category,
        tags,
        report,
    })
}

/// Runs the full pipeline over `packages`.
///
/// Duplicate removal happens first over the whole batch; the per-skill
/// stages then run independently (on `config.workers` threads) and are
/// merged back in input order. Fails only when evaluation itself fails.
pub fn consolidate(
    packages: Vec<SkillPackage>,
    judge: &dyn JudgeProvider,
    sandbox: Option<&Sandbox>,
    config: &CurationConfig,
) -> Result<Consolidation, EvaluationError> {
    let input_count = packages.len();
    let (survivors, duplicates_removed) = deduplicate(packages);

    let verdicts: Vec<Result<Verdict, EvaluationError>> = if config.workers <= 1 || survivors.len() <= 1 {
        survivors
            .iter()
            .map(|pkg| judge_one(pkg, judge, sandbox, config))
            .collect()
    } else {
        let chunk = survivors.len().div_ceil(config.workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = survivors
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|pkg| judge_one(pkg, judge, sandbox, config))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("curation worker panicked"))
                .collect()
        })
    };

    let mut report = CurationReport {
        input_count,
        duplicates_removed,
        ..CurationReport::default()
    };
    let mut admitted = Vec::new();
    for (pkg, verdict) in survivors.into_iter().zip(verdicts) {
        match verdict? {
            Verdict::Filtered(violations) => report.filtered_out.push(FilteredEntry {
                skill_id: pkg.id.clone(),
                violations,
            }),
            Verdict::Evaluated {
                category,
                tags,
                report: evaluation,
            } => {
                let reasons = admission_failures(&evaluation);
                if reasons.is_empty() {
                    report.admitted.push(pkg.id.clone());
                    admitted.push(AdmittedSkill {
                        package: pkg,
                        category,
                        tags,
                        evaluation,
                    });
                } else {
                    report.rejected.push(RejectedEntry {
                        skill_id: pkg.id.clone(),
                        reasons,
                        report: evaluation,
                    });
                }
            }
        }
    }
    debug_assert_eq!(report.accounted(), report.input_count);
    Ok(Consolidation { report, admitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::GradeEntry;
    use crate::judge::{GradeSheet, RuleJudge};
    use crate::provider::ProviderError;
    use crate::skill::{Resource, SkillDocument, SkillMetadata};

    const GOOD_BODY: &str = "## Prerequisites\nA shell with coreutils.\n\n\
        1. Open the input file and check that it is readable.\n\
        2. Parse each line into fields separated by commas.\n\
        3. Render the fields as a Markdown table with a header row.\n\
        4. Save the table next to the input with a .md extension.\n\
        5. Report the number of rows converted.\n\nExpected runtime: under a second.\n";

    fn skill(name: &str, description: &str, body: &str) -> SkillPackage {
        SkillPackage::new(
            SkillDocument::new(SkillMetadata::new(name, description, Category::Other), body),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn empty_dedup() {
        let (s, d) = deduplicate(vec![]);
        assert!(s.is_empty() && d.is_empty());
    }

    #[test]
    fn same_doc_different_listing_survives() {
        let doc = SkillDocument::new(SkillMetadata::new("x", "Does x things", Category::Other), GOOD_BODY);
        let a = SkillPackage::new(doc.clone(), vec![]).unwrap();
        let b = SkillPackage::new(doc, vec![Resource::new("notes.txt", "n")]).unwrap();
        let (survivors, dropped) = deduplicate(vec![a, b]);
        assert_eq!(survivors.len(), 2);
        assert!(dropped.is_empty());
    }

    #[test]
    fn exact_copy_is_dropped() {
        let a = skill("x", "Does x things", GOOD_BODY);
        let (survivors, dropped) = deduplicate(vec![a.clone(), a.clone()]);
        assert_eq!(survivors.len(), 1);
        assert_eq!(dropped[0].kept_id, a.id);
        assert_eq!(dropped[0].reason, DUPLICATE_REASON);
    }

    #[test]
    fn filter_rules() {
        let cfg = FilterConfig::default();
        assert!(filter_skill(&skill("csv-to-md", "Convert CSV files to Markdown tables", GOOD_BODY), &cfg).is_ok());

        let short = filter_skill(&skill("x", "Does x things", &"a".repeat(50)), &cfg).unwrap_err();
        assert_eq!(short[0].reason(), "too short");

        let todo_body = format!("{GOOD_BODY}\nTODO: fill in\n");
        let todo = filter_skill(&skill("x", "Does x things", &todo_body), &cfg).unwrap_err();
        assert_eq!(todo.iter().map(FilterViolation::reason).collect::<Vec<_>>(), vec!["placeholder content"]);

        let dup = filter_skill(&skill("csv-to-md", "CSV to md", GOOD_BODY), &cfg).unwrap_err();
        assert_eq!(dup, vec![FilterViolation::DescriptionDuplicatesName]);
    }

    #[test]
    fn prefix_duplicate_rule() {
        assert!(description_duplicates_name("pdf-extract-tables", "PDF extract"));
        assert!(description_duplicates_name("pdf-extract", "pdf extract"));
        assert!(!description_duplicates_name("pdf-extract", "pdf extract tables from scans"));
        assert!(!description_duplicates_name("pdf", "Extract tables from PDFs"));
    }

    #[test]
    fn declared_category_wins_and_tags_merge() {
        let mut meta = SkillMetadata::new("runner", "Write unit testing helpers", Category::Development);
        meta.tags = vec![Tag::new("helpers").unwrap()];
        let pkg = SkillPackage::new(SkillDocument::new(meta, GOOD_BODY), vec![]).unwrap();
        let (category, tags) = categorize_and_tag(&pkg, &RuleJudge::default());
        assert_eq!(category, Category::Development);
        assert_eq!(tags[0].as_str(), "helpers");
        assert_eq!(tags.iter().filter(|t| t.as_str() == "helpers").count(), 1);

        let other = skill("runner", "Write unit testing helpers", GOOD_BODY);
        assert_eq!(categorize_and_tag(&other, &RuleJudge::default()).0, Category::Testing);
    }

    struct UnsafeJudge;

    impl JudgeProvider for UnsafeJudge {
        fn identity(&self) -> String {
            "unsafe-for".into()
        }
        fn grade(
            &self,
            pkg: &SkillPackage,
            _sandbox: Option<&crate::evaluation::sandbox::SandboxResult>,
        ) -> Result<GradeSheet, ProviderError> {
            let safety = if pkg.name().starts_with("danger") { Grade::Poor } else { Grade::Good };
            let mut grades: crate::evaluation::Grades =
                Dimension::ALL.iter().map(|d| (*d, GradeEntry::new(Grade::Good, "ok"))).collect();
            grades.insert(Dimension::Safety, GradeEntry::new(safety, "by name"));
            Ok(GradeSheet { grades, judge_identity: self.identity() })
        }
    }

    #[test]
    fn unsafe_skill_is_rejected() {
        let pkgs = vec![
            skill("danger-zone", "Risky operations", GOOD_BODY),
            skill("calm-zone", "Quiet operations", GOOD_BODY),
        ];
        let out = consolidate(pkgs, &UnsafeJudge, None, &CurationConfig::default()).unwrap();
        assert_eq!(out.report.rejected.len(), 1);
        assert!(out.report.rejected[0].skill_id.starts_with("danger-zone--"));
        assert_eq!(out.report.rejected[0].reasons, vec!["Safety is Poor"]);
        assert_eq!(out.report.admitted.len(), 1);
        assert_eq!(out.report.accounted(), 2);
    }

    #[test]
    fn admission_policy_table() {
        let report = |levels: [Grade; 5]| EvaluationReport {
            skill_id: "s".into(),
            grades: Dimension::ALL
                .iter()
                .zip(levels)
                .map(|(d, g)| (*d, GradeEntry::new(g, "x")))
                .collect(),
            sandbox: None,
            judge_identity: "t".into(),
        };
        use Grade::*;
        // Order: Safety, Completeness, Executability, Maintainability, CostAwareness.
        assert!(admits(&report([Good, Good, Good, Good, Good])));
        assert!(admits(&report([Average, Poor, Average, Average, Average])));
        assert!(!admits(&report([Poor, Good, Good, Good, Good])));
        assert!(!admits(&report([Good, Good, Poor, Good, Good])));
        assert!(!admits(&report([Good, Poor, Good, Poor, Good])));
    }

    #[test]
    fn parallel_matches_sequential() {
        let pkgs: Vec<SkillPackage> = (0..9)
            .map(|i| skill(&format!("skill-{i}"), &format!("Handle case number {i}"), GOOD_BODY))
            .collect();
        let seq = consolidate(pkgs.clone(), &RuleJudge::default(), None, &CurationConfig::default()).unwrap();
        let par = consolidate(pkgs, &RuleJudge::default(), None, &CurationConfig { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(seq.report, par.report);
    }
}
