//! Agreement between two graders over ordinal grades.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dimension, EvaluationReport, Grade};

const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label vectors are empty")]
    EmptyInput,
}

fn check(a: &[Grade], b: &[Grade]) -> Result<(), AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    Ok(())
}

/// Mean absolute ordinal difference, in `[0, 2]`.
pub fn mae(a: &[Grade], b: &[Grade]) -> Result<f64, AgreementError> {
    check(a, b)?;
    let total: u32 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.ordinal().abs_diff(y.ordinal()) as u32)
        .sum();
    Ok(f64::from(total) / a.len() as f64)
}

/// Quadratic weighted kappa over the three grade levels.
///
/// Weights are `(i - j)^2 / (K - 1)^2`, the expected matrix comes from the
/// outer product of the two marginals divided by `n`. When the expected
/// weighted disagreement is zero (both graders constant and equal) the
/// result is 1.0.
pub fn qwk(a: &[Grade], b: &[Grade]) -> Result<f64, AgreementError> {
    check(a, b)?;
    let n = a.len() as f64;
    let mut observed = [[0.0f64; CLASSES]; CLASSES];
    let mut rows = [0.0f64; CLASSES];
    let mut cols = [0.0f64; CLASSES];
    for (x, y) in a.iter().zip(b) {
        let (i, j) = (x.ordinal() as usize, y.ordinal() as usize);
        observed[i][j] += 1.0;
        rows[i] += 1.0;
        cols[j] += 1.0;
    }

    let denom = ((CLASSES - 1) * (CLASSES - 1)) as f64;
    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..CLASSES {
        for j in 0..CLASSES {
            let w = ((i as f64) - (j as f64)).powi(2) / denom;
            weighted_observed += w * observed[i][j];
            weighted_expected += w * rows[i] * cols[j] / n;
        }
    }
    if weighted_expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - weighted_observed / weighted_expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionAgreement {
    pub mae: f64,
    pub qwk: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub dimensions: BTreeMap<Dimension, DimensionAgreement>,
}

/// Per-dimension agreement between two report sets, paired by skill id.
/// Skills graded by only one side are ignored.
pub fn agreement_stats(
    a: &[EvaluationReport],
    b: &[EvaluationReport],
) -> Result<AgreementStats, AgreementError> {
    let by_id: BTreeMap<&str, &EvaluationReport> =
        b.iter().map(|r| (r.skill_id.as_str(), r)).collect();
    let pairs: Vec<(&EvaluationReport, &EvaluationReport)> = a
        .iter()
        .filter_map(|r| by_id.get(r.skill_id.as_str()).map(|other| (r, *other)))
        .collect();
    if pairs.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    let mut dimensions = BTreeMap::new();
    for dim in Dimension::ALL {
        let left: Vec<Grade> = pairs.iter().map(|(x, _)| x.grade(dim)).collect();
        let right: Vec<Grade> = pairs.iter().map(|(_, y)| y.grade(dim)).collect();
        dimensions.insert(
            dim,
            DimensionAgreement {
                mae: mae(&left, &right)?,
                qwk: qwk(&left, &right)?,
                n: pairs.len(),
            },
        );
    }
    Ok(AgreementStats { dimensions })
}
