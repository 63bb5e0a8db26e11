//! Five-dimension, three-level skill evaluation.

pub mod agreement;
pub mod rubric;
pub mod sandbox;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::JudgeProvider;
use crate::provider::ProviderError;
use crate::skill::SkillPackage;
use sandbox::{Sandbox, SandboxError, SandboxOutcome, SandboxResult};

pub use agreement::{agreement_stats, mae, qwk, AgreementError, AgreementStats, DimensionAgreement};
pub use sandbox::{run_sandbox, SandboxConfig, SandboxLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Safety,
    Completeness,
    Executability,
    Maintainability,
    CostAwareness,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Safety,
        Dimension::Completeness,
        Dimension::Executability,
        Dimension::Maintainability,
        Dimension::CostAwareness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Safety => "Safety",
            Dimension::Completeness => "Completeness",
            Dimension::Executability => "Executability",
            Dimension::Maintainability => "Maintainability",
            Dimension::CostAwareness => "CostAwareness",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered `Poor < Average < Good`, ordinals 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    Poor,
    Average,
    Good,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Poor, Grade::Average, Grade::Good];

    pub fn ordinal(self) -> u8 {
        match self {
            Grade::Poor => 0,
            Grade::Average => 1,
            Grade::Good => 2,
        }
    }

    pub fn from_ordinal(value: u8) -> Option<Grade> {
        Grade::ALL.get(value as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Poor => "Poor",
            Grade::Average => "Average",
            Grade::Good => "Good",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeEntry {
    pub level: Grade,
    pub rationale: String,
}

impl GradeEntry {
    pub fn new(level: Grade, rationale: impl Into<String>) -> Self {
        GradeEntry {
            level,
            rationale: rationale.into(),
        }
    }
}

pub type Grades = BTreeMap<Dimension, GradeEntry>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub skill_id: String,
    pub grades: Grades,
    pub sandbox: Option<SandboxResult>,
    pub judge_identity: String,
}

impl EvaluationReport {
    /// Grade for `dim`. Reports built by this module always carry all five.
    pub fn grade(&self, dim: Dimension) -> Grade {
        self.grades.get(&dim).map_or(Grade::Poor, |g| g.level)
    }

    pub fn levels(&self) -> BTreeMap<Dimension, Grade> {
        self.grades.iter().map(|(d, g)| (*d, g.level)).collect()
    }
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("judge omitted dimension {0}")]
    IncompleteGrades(Dimension),
}

/// Grades `pkg` with `judge`, running the entry script first when a sandbox
/// is supplied. Sandbox outcomes cap Executability regardless of the judge:
/// Timeout or MemoryExceeded force Poor, NonzeroExit caps at Average.
pub fn evaluate(
    pkg: &SkillPackage,
    judge: &dyn JudgeProvider,
    sandbox: Option<&Sandbox>,
) -> Result<EvaluationReport, EvaluationError> {
    let run = match sandbox {
        Some(sandbox) => Some(sandbox.run(pkg, &[])?),
        None => None,
    };
    let sheet = judge.grade(pkg, run.as_ref())?;
    let mut grades = sheet.grades;
    for dim in Dimension::ALL {
        match grades.get_mut(&dim) {
            None => return Err(EvaluationError::IncompleteGrades(dim)),
            Some(entry) if entry.rationale.trim().is_empty() => {
                entry.rationale = format!("graded {} by {}", entry.level, sheet.judge_identity);
            }
            Some(_) => {}
        }
    }
    if let Some(result) = &run {
        apply_sandbox_cap(&mut grades, result.outcome);
    }
    Ok(EvaluationReport {
        skill_id: pkg.id.clone(),
        grades,
        sandbox: run,
        judge_identity: sheet.judge_identity,
    })
}

fn apply_sandbox_cap(grades: &mut Grades, outcome: SandboxOutcome) {
    let (cap, reason) = match outcome {
        SandboxOutcome::Timeout => (Grade::Poor, "sandbox run timed out"),
        SandboxOutcome::MemoryExceeded => (Grade::Poor, "sandbox run exceeded its memory limit"),
        SandboxOutcome::NonzeroExit => (Grade::Average, "sandbox run exited nonzero"),
        SandboxOutcome::Succeeded | SandboxOutcome::NoEntryPoint => return,
    };
    if let Some(entry) = grades.get_mut(&Dimension::Executability) {
        if entry.level > cap {
            entry.level = cap;
            entry.rationale = format!("{reason} (capped at {cap}; judge said: {})", entry.rationale);
        }
    }
}

pub type GradeDistribution = BTreeMap<Dimension, BTreeMap<Grade, usize>>;

pub fn empty_distribution() -> GradeDistribution {
    Dimension::ALL
        .iter()
        .map(|d| (*d, Grade::ALL.iter().map(|g| (*g, 0)).collect()))
        .collect()
}

/// Per-dimension grade counts. Every dimension and level is present.
pub fn aggregate_distribution<'a, I>(reports: I) -> GradeDistribution
where
    I: IntoIterator<Item = &'a EvaluationReport>,
{
    let mut dist = empty_distribution();
    for report in reports {
        for dim in Dimension::ALL {
            *dist
                .get_mut(&dim)
                .and_then(|row| row.get_mut(&report.grade(dim)))
                .expect("distribution is pre-populated") += 1;
        }
    }
    dist
}
