//! Brute-force constrained joint optimizer over tiny corpora: the ground
//! truth for solver optimality, weak duality, and decoder exactness tests.
//! Single-threaded by contract; determinism over speed.

use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::schema::{enumerate_assignments, Assignment, Corpus, SchemaError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("joint output space has {cardinality} combinations, over the budget {budget}")]
    BudgetExceeded { cardinality: u128, budget: u64 },
    #[error(transparent)]
    Schema(SchemaError),
}

/// Cap on the joint combination count the oracle will enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_joint_combinations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_joint_combinations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExactOutcome {
    Optimal {
        assignments: Vec<Assignment>,
        objective: f64,
    },
    /// No combination of per-instance assignments satisfies every constraint.
    Infeasible,
}

fn enumerate_or_budget(
    corpus: &Corpus,
    budget: &OracleBudget,
) -> Result<Vec<Vec<Assignment>>, OracleError> {
    corpus
        .instances
        .iter()
        .map(|instance| {
            enumerate_assignments(&corpus.schema, instance, budget.max_joint_combinations).map_err(
                |err| match err {
                    SchemaError::CardinalityExceeded {
                        cardinality, limit, ..
                    } => OracleError::BudgetExceeded {
                        cardinality,
                        budget: limit,
                    },
                    other => OracleError::Schema(other),
                },
            )
        })
        .collect()
}

/// Maximize the total score over the Cartesian product of per-instance
/// assignments subject to every constraint slack being nonpositive.
///
/// Ties break to the lexicographically smallest index tuple (instance-major
/// over enumeration order). Fails fast with the computed cardinality when the
/// joint space is over budget.
pub fn solve_exact(
    corpus: &Corpus,
    set: &ConstraintSet,
    budget: &OracleBudget,
) -> Result<ExactOutcome, OracleError> {
    let spaces = enumerate_or_budget(corpus, budget)?;
    let cardinality = spaces
        .iter()
        .map(|s| s.len() as u128)
        .fold(1u128, u128::saturating_mul);
    if cardinality > u128::from(budget.max_joint_combinations) {
        return Err(OracleError::BudgetExceeded {
            cardinality,
            budget: budget.max_joint_combinations,
        });
    }

    // per-assignment contribution of each constraint row, so a combination's
    // slack is a plain sum over instances
    let contributions: Vec<Vec<Vec<f64>>> = spaces
        .iter()
        .map(|space| {
            space
                .iter()
                .map(|a| {
                    let keys = a.active_indicators();
                    set.constraints
                        .iter()
                        .map(|c| {
                            keys.iter()
                                .map(|k| c.coeffs.get(k).copied().unwrap_or(0.0))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let n = spaces.len();
    let mut picks = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    'joint: loop {
        let mut feasible = true;
        for (j, constraint) in set.constraints.iter().enumerate() {
            let slack: f64 = picks
                .iter()
                .enumerate()
                .map(|(i, &k)| contributions[i][k][j])
                .sum::<f64>()
                - constraint.bound;
            if slack > 0.0 {
                feasible = false;
                break;
            }
        }
        if feasible {
            let objective: f64 = picks
                .iter()
                .enumerate()
                .map(|(i, &k)| spaces[i][k].score)
                .sum();
            if best.as_ref().is_none_or(|(b, _)| objective > *b) {
                best = Some((objective, picks.clone()));
            }
        }

        // advance, last instance fastest
        let mut i = n;
        loop {
            if i == 0 {
                break 'joint;
            }
            i -= 1;
            picks[i] += 1;
            if picks[i] < spaces[i].len() {
                break;
            }
            picks[i] = 0;
        }
    }

    match best {
        None => Ok(ExactOutcome::Infeasible),
        Some((objective, picks)) => {
            let assignments = picks
                .iter()
                .enumerate()
                .map(|(i, &k)| spaces[i][k].clone())
                .collect();
            Ok(ExactOutcome::Optimal {
                assignments,
                objective,
            })
        }
    }
}

/// Sum of per-instance enumeration maxima: the unconstrained joint optimum.
pub fn unconstrained_max(corpus: &Corpus, budget: &OracleBudget) -> Result<f64, OracleError> {
    let spaces = enumerate_or_budget(corpus, budget)?;
    Ok(spaces
        .iter()
        .map(|space| {
            space
                .iter()
                .map(|a| a.score)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::constraints::{build_margin_constraints, constraint_slack};
    use crate::decode::{decode_corpus, PenaltyView};
    use crate::metrics::BiasTable;
    use crate::schema::tests::{table_for, two_verb_schema};
    use crate::schema::{Corpus, Label};

    fn empty_set(corpus: &Corpus) -> ConstraintSet {
        ConstraintSet {
            constraints: vec![],
            margin: 0.0,
            source_bias: BiasTable {
                outputs: corpus.schema.outputs(),
                genders: corpus.schema.genders.clone(),
                bias: BTreeMap::new(),
                support: BTreeMap::new(),
            },
        }
    }

    fn random_corpus(seed: u64, n_instances: usize) -> Corpus {
        let schema = two_verb_schema();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instances = (0..n_instances)
            .map(|i| {
                let mut table = table_for(&schema, &format!("i{i}"), 0.0);
                for v in table.verb_scores.values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                for roles in table.role_scores.values_mut() {
                    for nouns in roles.values_mut() {
                        for s in nouns.values_mut() {
                            *s = rng.gen_range(-1.0..1.0);
                        }
                    }
                }
                table
            })
            .collect();
        Corpus {
            schema,
            instances,
            gold: None,
        }
    }

    #[test]
    fn no_constraints_reduces_to_per_instance_argmax() {
        let corpus = random_corpus(3, 3);
        let set = empty_set(&corpus);
        let ExactOutcome::Optimal {
            assignments,
            objective,
        } = solve_exact(&corpus, &set, &Default::default()).unwrap()
        else {
            panic!("unconstrained problems are feasible");
        };
        let decoded = decode_corpus(&corpus, &PenaltyView::none()).unwrap();
        assert_eq!(assignments, decoded);
        assert_eq!(
            objective,
            unconstrained_max(&corpus, &Default::default()).unwrap()
        );
    }

    #[test]
    fn planted_corpus_keeps_one_agent_per_gender() {
        let corpus = crate::solver::tests::man_leaning_corpus(&[0.1, 0.2], &[0.9, 0.8]);
        let train = BiasTable {
            outputs: corpus.schema.outputs(),
            genders: corpus.schema.genders.clone(),
            bias: BTreeMap::from([(
                "cooking".to_owned(),
                BTreeMap::from([("man".to_owned(), 0.5), ("woman".to_owned(), 0.5)]),
            )]),
            support: BTreeMap::new(),
        };
        let set = build_margin_constraints(&corpus.schema, &train, 0.05, None).unwrap();
        let ExactOutcome::Optimal {
            assignments,
            objective,
        } = solve_exact(&corpus, &set, &Default::default()).unwrap()
        else {
            panic!("feasible by construction");
        };
        let agents: Vec<String> = assignments
            .iter()
            .map(|a| {
                let Label::Vsrl { role_fills, .. } = &a.label else {
                    unreachable!()
                };
                role_fills["agent"].clone()
            })
            .collect();
        // flipping instance 0 loses 0.1, flipping instance 1 loses 0.2
        assert_eq!(agents, vec!["woman".to_owned(), "man".to_owned()]);
        assert!((objective - (0.9 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn odd_gendered_count_with_zero_margin_is_infeasible() {
        let corpus = crate::solver::tests::man_leaning_corpus(&[0.1, 0.2, 0.3], &[0.9, 0.8, 0.7]);
        let train = BiasTable {
            outputs: corpus.schema.outputs(),
            genders: corpus.schema.genders.clone(),
            bias: BTreeMap::from([(
                "cooking".to_owned(),
                BTreeMap::from([("man".to_owned(), 0.5), ("woman".to_owned(), 0.5)]),
            )]),
            support: BTreeMap::new(),
        };
        let set = build_margin_constraints(&corpus.schema, &train, 0.0, None).unwrap();
        assert_eq!(
            solve_exact(&corpus, &set, &Default::default()).unwrap(),
            ExactOutcome::Infeasible
        );
    }

    #[test]
    fn budget_guard_fails_fast_with_cardinality() {
        let corpus = random_corpus(5, 4); // 4^4 = 256 joint combinations
        let set = empty_set(&corpus);
        let tight = OracleBudget {
            max_joint_combinations: 255,
        };
        match solve_exact(&corpus, &set, &tight) {
            Err(OracleError::BudgetExceeded {
                cardinality,
                budget,
            }) => {
                assert_eq!(budget, 255);
                assert!(cardinality == 256 || cardinality > 255);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn constrained_optimum_never_exceeds_unconstrained() {
        for seed in 0..10 {
            let corpus = random_corpus(seed, 3);
            let train = BiasTable {
                outputs: corpus.schema.outputs(),
                genders: corpus.schema.genders.clone(),
                bias: BTreeMap::from([(
                    "cooking".to_owned(),
                    BTreeMap::from([("man".to_owned(), 0.4), ("woman".to_owned(), 0.6)]),
                )]),
                support: BTreeMap::new(),
            };
            let set = build_margin_constraints(&corpus.schema, &train, 0.1, None).unwrap();
            let unconstrained = unconstrained_max(&corpus, &Default::default()).unwrap();
            match solve_exact(&corpus, &set, &Default::default()).unwrap() {
                ExactOutcome::Optimal {
                    objective,
                    assignments,
                } => {
                    assert!(objective <= unconstrained + 1e-12);
                    // every returned combination is feasible
                    for c in &set.constraints {
                        assert!(constraint_slack(c, &assignments) <= 0.0);
                    }
                }
                ExactOutcome::Infeasible => {}
            }
        }
    }

    #[test]
    fn unconstrained_max_matches_decoding_on_random_corpora() {
        for seed in 0..50 {
            let corpus = random_corpus(100 + seed, 2);
            let decoded = decode_corpus(&corpus, &PenaltyView::none()).unwrap();
            let total: f64 = decoded.iter().map(|a| a.score).sum();
            let oracle = unconstrained_max(&corpus, &Default::default()).unwrap();
            assert_eq!(total, oracle, "seed {seed}");
        }
    }

    #[test]
    fn random_feasible_combinations_never_beat_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..10 {
            let corpus = random_corpus(200 + seed, 3);
            let train = BiasTable {
                outputs: corpus.schema.outputs(),
                genders: corpus.schema.genders.clone(),
                bias: BTreeMap::from([(
                    "cooking".to_owned(),
                    BTreeMap::from([("man".to_owned(), 0.5), ("woman".to_owned(), 0.5)]),
                )]),
                support: BTreeMap::new(),
            };
            let set = build_margin_constraints(&corpus.schema, &train, 0.2, None).unwrap();
            let ExactOutcome::Optimal { objective, .. } =
                solve_exact(&corpus, &set, &Default::default()).unwrap()
            else {
                continue;
            };
            let spaces: Vec<Vec<Assignment>> = corpus
                .instances
                .iter()
                .map(|t| enumerate_assignments(&corpus.schema, t, 1_000_000).unwrap())
                .collect();
            for _ in 0..50 {
                let combo: Vec<Assignment> = spaces
                    .iter()
                    .map(|s| s[rng.gen_range(0..s.len())].clone())
                    .collect();
                let feasible = set
                    .constraints
                    .iter()
                    .all(|c| constraint_slack(c, &combo) <= 0.0);
                if feasible {
                    let total: f64 = combo.iter().map(|a| a.score).sum();
                    assert!(total <= objective + 1e-12);
                }
            }
        }
    }
}
