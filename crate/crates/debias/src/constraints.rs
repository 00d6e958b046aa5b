//! Corpus-level gender-ratio margin constraints, linearized over indicator
//! variables.
//!
//! A ratio band `L <= M / (M + W) <= U` over aggregated predictions clears its
//! denominator into the pair of linear rows
//! `(1 - U) * M - U * W <= 0` and `(L - 1) * M + L * W <= 0`
//! with bound 0, which the solver can penalize per indicator. Both rows are
//! vacuously satisfied when no prediction mentions the output.
//!
//! When the training bias table carries occurrence counts, each output's rows
//! are divided by the square root of its training support. Any positive
//! rescaling leaves the feasible set unchanged, but this one makes the
//! subgradient loop's per-iteration penalty movement proportional to the
//! ratio excess alone, independent of corpus size, so one step size works
//! from two-instance fixtures up to full corpora.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::BiasTable;
use crate::schema::{Assignment, Family, IndicatorKey, Label, OutputSchema};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("no defined training bias for target output '{output}'")]
    UndefinedTrainBias { output: String },
}

/// One row of the corpus-level linear system: `coeffs . sum_i y_i - bound <= 0`.
///
/// Coefficients are instance-independent; the same row applies to every
/// instance of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub id: String,
    #[serde(with = "coeff_pairs")]
    pub coeffs: BTreeMap<IndicatorKey, f64>,
    pub bound: f64,
}

mod coeff_pairs {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        coeffs: &BTreeMap<IndicatorKey, f64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(coeffs.len()))?;
        for pair in coeffs {
            seq.serialize_element(&pair)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<IndicatorKey, f64>, D::Error> {
        let pairs = Vec::<(IndicatorKey, f64)>::deserialize(deserializer)?;
        Ok(pairs.into_iter().collect())
    }
}

/// The full constraint system plus the margin and training bias it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<LinearConstraint>,
    pub margin: f64,
    pub source_bias: BiasTable,
}

impl ConstraintSet {
    pub fn bounds(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.bound).collect()
    }
}

/// Compile two-sided ratio margin constraints for each target output.
///
/// For target `o` with training bias `b*` toward the reference gender, the
/// band is `[max(0, b* - margin), min(1, b* + margin)]`; a side clamped to 0
/// or 1 is vacuous and omitted. Rows of outputs with known training support
/// are divided by sqrt(support); tables without support information keep the
/// plain cleared-denominator coefficients. Targets default to every output
/// with a defined training bias. An explicit target without gendered training
/// occurrences is an error.
pub fn build_margin_constraints(
    schema: &OutputSchema,
    train_bias: &BiasTable,
    margin: f64,
    targets: Option<&[String]>,
) -> Result<ConstraintSet, ConstraintError> {
    assert!(margin >= 0.0, "margin must be nonnegative");
    let g_ref = schema.reference_gender();
    let targets: Vec<String> = match targets {
        Some(explicit) => explicit.to_vec(),
        None => train_bias
            .outputs
            .iter()
            .filter(|o| train_bias.is_defined(o))
            .cloned()
            .collect(),
    };

    let mut constraints = Vec::new();
    for output in &targets {
        let b_star =
            train_bias
                .get(output, g_ref)
                .ok_or_else(|| ConstraintError::UndefinedTrainBias {
                    output: output.clone(),
                })?;
        let ref_keys = schema.marker_keys(output, g_ref);
        let other_keys: Vec<IndicatorKey> = schema
            .genders
            .iter()
            .filter(|g| g.as_str() != g_ref)
            .flat_map(|g| schema.marker_keys(output, g))
            .collect();
        if ref_keys.is_empty() && other_keys.is_empty() {
            return Err(ConstraintError::UndefinedTrainBias {
                output: output.clone(),
            });
        }

        let scale = match train_bias.support_of(output) {
            Some(count) if count > 0 => 2.0 / (count as f64).sqrt(),
            _ => 1.0,
        };
        let upper = (b_star + margin).min(1.0);
        let lower = (b_star - margin).max(0.0);
        if upper < 1.0 {
            let mut coeffs = BTreeMap::new();
            for key in &ref_keys {
                coeffs.insert(key.clone(), (1.0 - upper) * scale);
            }
            for key in &other_keys {
                coeffs.insert(key.clone(), -upper * scale);
            }
            constraints.push(LinearConstraint {
                id: format!("{output}:upper"),
                coeffs,
                bound: 0.0,
            });
        }
        if lower > 0.0 {
            let mut coeffs = BTreeMap::new();
            for key in &ref_keys {
                coeffs.insert(key.clone(), (lower - 1.0) * scale);
            }
            for key in &other_keys {
                coeffs.insert(key.clone(), lower * scale);
            }
            constraints.push(LinearConstraint {
                id: format!("{output}:lower"),
                coeffs,
                bound: 0.0,
            });
        }
    }

    Ok(ConstraintSet {
        constraints,
        margin,
        source_bias: train_bias.clone(),
    })
}

/// Total activation count of each indicator across a set of assignments.
pub fn aggregate_indicators(assignments: &[Assignment]) -> BTreeMap<IndicatorKey, f64> {
    let mut agg = BTreeMap::new();
    for assignment in assignments {
        for key in assignment.active_indicators() {
            *agg.entry(key).or_insert(0.0) += 1.0;
        }
    }
    agg
}

/// Slack of one constraint against aggregated indicator counts; positive
/// means violated.
pub fn slack_from_aggregate(
    constraint: &LinearConstraint,
    aggregate: &BTreeMap<IndicatorKey, f64>,
) -> f64 {
    constraint
        .coeffs
        .iter()
        .map(|(key, coeff)| coeff * aggregate.get(key).copied().unwrap_or(0.0))
        .sum::<f64>()
        - constraint.bound
}

/// Slack of one constraint against a list of assignments.
pub fn constraint_slack(constraint: &LinearConstraint, assignments: &[Assignment]) -> f64 {
    slack_from_aggregate(constraint, &aggregate_indicators(assignments))
}

/// Realized ratio of the reference gender for one output over predictions;
/// `None` when no prediction carries a gender marker for it.
pub fn ratio_of(schema: &OutputSchema, output: &str, assignments: &[Assignment]) -> Option<f64> {
    let mut ref_count = 0u64;
    let mut total = 0u64;
    let g_ref = schema.reference_gender();
    for assignment in assignments {
        match (&assignment.label, schema.family) {
            (Label::Vsrl { verb, role_fills }, Family::Vsrl) if verb == output => {
                let Some(by_gender) = schema.gender_markers.get(output) else {
                    continue;
                };
                for (gender, pairs) in by_gender {
                    let marked = role_fills
                        .iter()
                        .any(|(role, noun)| pairs.contains(&(role.clone(), noun.clone())));
                    if marked {
                        total += 1;
                        if gender == g_ref {
                            ref_count += 1;
                        }
                    }
                }
            }
            (Label::Mlc { objects, gender }, Family::Mlc) if objects.contains(output) => {
                total += 1;
                if gender == g_ref {
                    ref_count += 1;
                }
            }
            _ => {}
        }
    }
    if total == 0 {
        return None;
    }
    Some(ref_count as f64 / total as f64)
}
