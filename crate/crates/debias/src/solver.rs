//! Projected subgradient ascent on the dual of the corpus-constrained MAP
//! problem.
//!
//! Each iteration decodes every instance exactly under the current penalties,
//! aggregates indicator counts once over the whole corpus, computes the slack
//! of every constraint, and updates the multipliers with
//! `lambda <- max(0, lambda + eta * slack)`. The loop stops when every slack
//! is within tolerance or the iteration budget runs out. If it converges and
//! every positive-multiplier constraint has zero slack, the returned
//! assignments attain the constrained optimum.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::constraints::{aggregate_indicators, slack_from_aggregate, ConstraintSet};
use crate::decode::{decode_corpus, DecodeError, PenaltyView};
use crate::schema::{Assignment, Corpus};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Step size, iteration budget, margin passthrough, and slack tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Multiplier step size.
    pub eta: f64,
    pub max_iters: usize,
    /// Margin the constraints were built with; carried for reporting.
    pub margin: f64,
    /// A constraint counts as satisfied when its slack is at most this.
    pub slack_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta: 0.1,
            max_iters: 100,
            margin: 0.05,
            slack_tolerance: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(SolverError::ConfigInvalid(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::ConfigInvalid(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(SolverError::ConfigInvalid(format!(
                "margin must be nonnegative, got {}",
                self.margin
            )));
        }
        if self.slack_tolerance.is_nan() || self.slack_tolerance < 0.0 {
            return Err(SolverError::ConfigInvalid(format!(
                "slack tolerance must be nonnegative, got {}",
                self.slack_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Converged,
    IterationLimit,
}

/// One dual iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dual_objective: f64,
    pub num_violations: usize,
    pub max_slack: f64,
    pub lambda_l2: f64,
    pub lambda_min: f64,
}

/// Multiplier vector, iteration count, per-iteration trace, and status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub iteration: usize,
    pub trace: Vec<IterationRecord>,
    pub status: SolverStatus,
}

/// Final assignments plus the dual state and any still-violated constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub assignments: Vec<Assignment>,
    pub dual: DualState,
    /// (constraint id, slack) of constraints above tolerance at the final
    /// iterate; empty exactly when the status is `Converged`.
    pub residual: Vec<(String, f64)>,
}

/// One projected subgradient step: elementwise `max(0, lambda + eta * slack)`.
pub fn dual_update(lambda: &[f64], slacks: &[f64], eta: f64) -> Vec<f64> {
    assert_eq!(lambda.len(), slacks.len());
    lambda
        .iter()
        .zip(slacks)
        .map(|(l, s)| (l + eta * s).max(0.0))
        .collect()
}

/// The Lagrangian dual value at `lambda`: the sum over instances of the
/// maximal penalized score, plus `lambda . b`. By weak duality this bounds
/// the constrained optimum from above for any `lambda >= 0`.
pub fn dual_objective(
    corpus: &Corpus,
    set: &ConstraintSet,
    lambda: &[f64],
) -> Result<f64, SolverError> {
    let view = PenaltyView::new(set, lambda);
    let assignments = decode_corpus(corpus, &view)?;
    Ok(dual_objective_of(&assignments, set, &view))
}

fn dual_objective_of(assignments: &[Assignment], set: &ConstraintSet, view: &PenaltyView) -> f64 {
    let penalized: f64 = assignments
        .iter()
        .map(|a| a.score - view.penalty_of_assignment(a))
        .sum();
    let bound_term: f64 = view
        .lambda()
        .iter()
        .zip(set.constraints.iter())
        .map(|(l, c)| l * c.bound)
        .sum();
    penalized + bound_term
}

/// Run the calibration loop: decode, measure slack, update multipliers.
///
/// Starts from `lambda = 0`; stops as `Converged` the first time every slack
/// is within tolerance (returning that iterate's assignments), or as
/// `IterationLimit` after `max_iters` iterations (returning the last
/// iterate's assignments and the post-update multipliers). The trace records
/// every iteration executed.
pub fn calibrate(
    corpus: &Corpus,
    set: &ConstraintSet,
    config: &SolverConfig,
) -> Result<CalibrationResult, SolverError> {
    config.validate()?;
    let mut lambda = vec![0.0; set.constraints.len()];
    let mut trace = Vec::new();

    for iteration in 1..=config.max_iters {
        let view = PenaltyView::new(set, &lambda);
        let assignments = decode_corpus(corpus, &view)?;
        let aggregate = aggregate_indicators(&assignments);
        let slacks: Vec<f64> = set
            .constraints
            .iter()
            .map(|c| slack_from_aggregate(c, &aggregate))
            .collect();

        let num_violations = slacks
            .iter()
            .filter(|s| **s > config.slack_tolerance)
            .count();
        let max_slack = if slacks.is_empty() {
            0.0
        } else {
            slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        trace.push(IterationRecord {
            iteration,
            dual_objective: dual_objective_of(&assignments, set, &view),
            num_violations,
            max_slack,
            lambda_l2: lambda.iter().map(|l| l * l).sum::<f64>().sqrt(),
            lambda_min: lambda.iter().copied().fold(0.0, f64::min),
        });

        if num_violations == 0 {
            return Ok(CalibrationResult {
                assignments,
                dual: DualState {
                    lambda,
                    iteration,
                    trace,
                    status: SolverStatus::Converged,
                },
                residual: vec![],
            });
        }

        lambda = dual_update(&lambda, &slacks, config.eta);

        if iteration == config.max_iters {
            let residual: Vec<(String, f64)> = set
                .constraints
                .iter()
                .zip(&slacks)
                .filter(|(_, s)| **s > config.slack_tolerance)
                .map(|(c, s)| (c.id.clone(), *s))
                .collect();
            return Ok(CalibrationResult {
                assignments,
                dual: DualState {
                    lambda,
                    iteration,
                    trace,
                    status: SolverStatus::IterationLimit,
                },
                residual,
            });
        }
    }
    unreachable!("loop returns on convergence or at the iteration limit")
}

/// Write the trace as CSV: iteration, dual objective, violated-constraint
/// count, maximal slack, and the multiplier l2 norm.
pub fn write_trace_csv(trace: &[IterationRecord], out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "iteration,dual_objective,num_violations,max_slack,lambda_l2"
    )?;
    for rec in trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            rec.iteration, rec.dual_objective, rec.num_violations, rec.max_slack, rec.lambda_l2
        )?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::constraints::build_margin_constraints;
    use crate::metrics::BiasTable;
    use crate::schema::tests::{table_for, two_verb_schema};
    use crate::schema::OutputSchema;

    fn bias_toward_man(schema: &OutputSchema, output: &str, b: f64) -> BiasTable {
        BiasTable {
            outputs: schema.outputs(),
            genders: schema.genders.clone(),
            bias: BTreeMap::from([(
                output.to_owned(),
                BTreeMap::from([("man".to_owned(), b), ("woman".to_owned(), 1.0 - b)]),
            )]),
            support: BTreeMap::new(),
        }
    }

    /// Single-verb corpus where every instance prefers a man agent by `gaps[i]`.
    pub(crate) fn man_leaning_corpus(gaps: &[f64], woman_base: &[f64]) -> Corpus {
        let mut schema = two_verb_schema();
        schema.verbs.truncate(1);
        schema.gender_markers.retain(|v, _| v == "cooking");
        let mut instances = vec![];
        for (i, (gap, base)) in gaps.iter().zip(woman_base).enumerate() {
            let mut table = table_for(&schema, &format!("i{i:03}"), 0.0);
            let agent = table
                .role_scores
                .get_mut("cooking")
                .unwrap()
                .get_mut("agent")
                .unwrap();
            agent.insert("man".into(), base + gap);
            agent.insert("woman".into(), *base);
            instances.push(table);
        }
        Corpus {
            schema,
            instances,
            gold: None,
        }
    }

    #[test]
    fn dual_update_examples() {
        assert_eq!(dual_update(&[0.0], &[-1.0], 0.1), vec![0.0]);
        let updated = dual_update(&[0.0], &[0.62], 0.1);
        assert!((updated[0] - 0.062).abs() < 1e-12);
        assert_eq!(dual_update(&[0.05], &[-1.0], 0.1), vec![0.0]);
    }

    #[test]
    fn satisfied_constraints_converge_at_iteration_one() {
        let corpus = man_leaning_corpus(&[-0.5, 0.5], &[0.5, 0.5]); // one woman, one man
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let result = calibrate(&corpus, &set, &SolverConfig::default()).unwrap();
        assert_eq!(result.dual.status, SolverStatus::Converged);
        assert_eq!(result.dual.iteration, 1);
        assert!(result.dual.lambda.iter().all(|l| *l == 0.0));
        assert!(result.residual.is_empty());
        let unconstrained = decode_corpus(&corpus, &PenaltyView::none()).unwrap();
        assert_eq!(result.assignments, unconstrained);
    }

    #[test]
    fn planted_two_instance_corpus_flips_one_agent() {
        // both instances prefer man (gaps 0.1 and 0.2); the band requires one woman
        let corpus = man_leaning_corpus(&[0.1, 0.2], &[0.9, 0.8]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let config = SolverConfig {
            eta: 0.1,
            ..Default::default()
        };
        let result = calibrate(&corpus, &set, &config).unwrap();
        assert_eq!(result.dual.status, SolverStatus::Converged);
        let genders: Vec<_> = result
            .assignments
            .iter()
            .map(|a| {
                let crate::schema::Label::Vsrl { role_fills, .. } = &a.label else {
                    unreachable!()
                };
                role_fills["agent"].clone()
            })
            .collect();
        // the cheaper flip is instance 0
        assert_eq!(genders, vec!["woman".to_owned(), "man".to_owned()]);
        let oracle = crate::oracle::solve_exact(&corpus, &set, &Default::default()).unwrap();
        let crate::oracle::ExactOutcome::Optimal { objective, .. } = oracle else {
            panic!("planted corpus is feasible");
        };
        let total: f64 = result.assignments.iter().map(|a| a.score).sum();
        assert!((total - objective).abs() < 1e-9);

        // this fixture converges with strictly negative slack on the active
        // upper row, so optimality is not certified; the feasible iterate
        // still sits within the duality-gap bound
        let aggregate = crate::constraints::aggregate_indicators(&result.assignments);
        let slacks: Vec<f64> = set
            .constraints
            .iter()
            .map(|c| crate::constraints::slack_from_aggregate(c, &aggregate))
            .collect();
        assert!(slacks.iter().all(|s| *s <= 0.0));
        assert!(result
            .dual
            .lambda
            .iter()
            .zip(&slacks)
            .any(|(l, s)| *l > 0.0 && *s < 0.0));
        let gap_bound: f64 = result
            .dual
            .lambda
            .iter()
            .zip(&slacks)
            .map(|(l, s)| l * s.abs())
            .sum();
        assert!(total >= objective - gap_bound - 1e-9);
    }

    #[test]
    fn parity_infeasible_corpus_hits_the_iteration_limit() {
        // three gendered predictions with margin 0: ratio 0.5 is unattainable
        let corpus = man_leaning_corpus(&[0.1, 0.2, 0.3], &[0.9, 0.8, 0.7]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.0, None).unwrap();
        let config = SolverConfig {
            max_iters: 60,
            ..Default::default()
        };
        let result = calibrate(&corpus, &set, &config).unwrap();
        assert_eq!(result.dual.status, SolverStatus::IterationLimit);
        assert!(!result.residual.is_empty());
        assert_eq!(result.dual.trace.len(), 60);
    }

    #[test]
    fn lambda_stays_nonnegative_throughout() {
        let corpus = man_leaning_corpus(&[0.1, 0.2, 0.3, 0.4], &[0.9, 0.8, 0.7, 0.6]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.25);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let result = calibrate(&corpus, &set, &SolverConfig::default()).unwrap();
        for rec in &result.dual.trace {
            assert!(
                rec.lambda_min >= 0.0,
                "iteration {}: {}",
                rec.iteration,
                rec.lambda_min
            );
        }
        assert!(result.dual.lambda.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn dual_objective_at_zero_is_the_unconstrained_sum() {
        let corpus = man_leaning_corpus(&[0.1, 0.2], &[0.9, 0.8]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let zero = vec![0.0; set.constraints.len()];
        let at_zero = dual_objective(&corpus, &set, &zero).unwrap();
        let unconstrained = crate::oracle::unconstrained_max(&corpus, &Default::default()).unwrap();
        assert_eq!(at_zero, unconstrained);
    }

    #[test]
    fn dual_objective_with_no_constraints_ignores_lambda() {
        let corpus = man_leaning_corpus(&[0.1], &[0.9]);
        // a band wide enough that both sides clamp away
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.5, None).unwrap();
        assert!(set.constraints.is_empty());
        let value = dual_objective(&corpus, &set, &[]).unwrap();
        let unconstrained = crate::oracle::unconstrained_max(&corpus, &Default::default()).unwrap();
        assert_eq!(value, unconstrained);
    }

    #[test]
    fn weak_duality_holds_on_a_small_corpus() {
        let corpus = man_leaning_corpus(&[0.1, 0.2], &[0.9, 0.8]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let oracle = crate::oracle::solve_exact(&corpus, &set, &Default::default()).unwrap();
        let crate::oracle::ExactOutcome::Optimal { objective, .. } = oracle else {
            panic!("feasible by construction");
        };
        for lambda_val in [0.0, 0.05, 0.3, 1.0, 4.0] {
            let lambda = vec![lambda_val; set.constraints.len()];
            let dual = dual_objective(&corpus, &set, &lambda).unwrap();
            assert!(
                dual >= objective - 1e-9,
                "dual {dual} below optimum {objective} at lambda {lambda_val}"
            );
        }
    }

    #[test]
    fn violations_do_not_increase_from_first_to_last_iterate() {
        let corpus = man_leaning_corpus(&[0.05, 0.1, 0.15, 0.2, 0.25, 0.3], &[1.0; 6]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let config = SolverConfig {
            eta: 0.02,
            ..Default::default()
        };
        let result = calibrate(&corpus, &set, &config).unwrap();
        let first = result.dual.trace.first().unwrap().num_violations;
        let last = result.dual.trace.last().unwrap().num_violations;
        assert!(last <= first, "violations went from {first} to {last}");
    }

    #[test]
    fn identical_runs_produce_identical_traces() {
        let corpus = man_leaning_corpus(&[0.1, 0.2, 0.3], &[0.9, 0.8, 0.7]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.4);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let a = calibrate(&corpus, &set, &SolverConfig::default()).unwrap();
        let b = calibrate(&corpus, &set, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let corpus = man_leaning_corpus(&[0.1], &[0.9]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        for config in [
            SolverConfig {
                eta: 0.0,
                ..Default::default()
            },
            SolverConfig {
                eta: f64::NAN,
                ..Default::default()
            },
            SolverConfig {
                max_iters: 0,
                ..Default::default()
            },
            SolverConfig {
                margin: -0.1,
                ..Default::default()
            },
            SolverConfig {
                slack_tolerance: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                calibrate(&corpus, &set, &config),
                Err(SolverError::ConfigInvalid(_))
            ));
        }
    }

    #[test]
    fn trace_csv_has_one_row_per_iteration() {
        let corpus = man_leaning_corpus(&[0.1, 0.2, 0.3], &[0.9, 0.8, 0.7]);
        let train = bias_toward_man(&corpus.schema, "cooking", 0.5);
        let set = build_margin_constraints(&corpus.schema, &train, 0.0, None).unwrap();
        let config = SolverConfig {
            max_iters: 5,
            ..Default::default()
        };
        let result = calibrate(&corpus, &set, &config).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&result.dual.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "iteration,dual_objective,num_violations,max_slack,lambda_l2"
        );
        assert_eq!(lines.len(), 1 + 5);
        assert!(lines[1].starts_with("1,"));
    }
}
