//! Bias measurement over corpora of assignments: co-occurrence counts, bias
//! scores, mean bias amplification, margin-violation counting, and the
//! recognition metrics reported next to them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Assignment, Family, Label, OutputSchema};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unknown output '{0}'")]
    UnknownOutput(String),
    #[error("unknown gender '{0}'")]
    UnknownGender(String),
    #[error("bias tables cover different outputs or genders")]
    MismatchedDomains,
    #[error("prediction and gold corpora are misaligned: {0}")]
    MisalignedCorpora(String),
}

/// Raw (output, gender) co-occurrence counts over a fixed domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    pub outputs: Vec<String>,
    pub genders: Vec<String>,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl CooccurrenceCounts {
    pub fn new(outputs: Vec<String>, genders: Vec<String>) -> Self {
        CooccurrenceCounts {
            outputs,
            genders,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, output: &str, gender: &str, n: u64) {
        *self
            .counts
            .entry(output.to_owned())
            .or_default()
            .entry(gender.to_owned())
            .or_default() += n;
    }

    pub fn count(&self, output: &str, gender: &str) -> u64 {
        self.counts
            .get(output)
            .and_then(|row| row.get(gender))
            .copied()
            .unwrap_or(0)
    }

    pub fn row_total(&self, output: &str) -> u64 {
        self.counts
            .get(output)
            .map(|row| row.values().sum())
            .unwrap_or(0)
    }
}

/// Count gendered occurrences of each output across a set of assignments.
///
/// VSRL: an assignment of verb `v` counts toward `(v, g)` when one of its role
/// fills is a marker for `g`; assignments matching no marker contribute
/// nothing. MLC: each included object counts once with the assigned gender.
pub fn count_cooccurrences(
    assignments: &[Assignment],
    schema: &OutputSchema,
) -> CooccurrenceCounts {
    let mut counts = CooccurrenceCounts::new(schema.outputs(), schema.genders.clone());
    for assignment in assignments {
        match (&assignment.label, schema.family) {
            (Label::Vsrl { verb, role_fills }, Family::Vsrl) => {
                let Some(by_gender) = schema.gender_markers.get(verb) else {
                    continue;
                };
                for (gender, pairs) in by_gender {
                    let marked = role_fills
                        .iter()
                        .any(|(role, noun)| pairs.contains(&(role.clone(), noun.clone())));
                    if marked {
                        counts.add(verb, gender, 1);
                    }
                }
            }
            (Label::Mlc { gender, objects }, Family::Mlc) => {
                for object in objects {
                    counts.add(object, gender, 1);
                }
            }
            _ => {}
        }
    }
    counts
}

/// b(o, g): the fraction of o's gendered occurrences carrying gender g.
/// `None` when o never occurs with any gender.
pub fn bias_score(
    counts: &CooccurrenceCounts,
    output: &str,
    gender: &str,
) -> Result<Option<f64>, MetricsError> {
    if !counts.outputs.iter().any(|o| o == output) {
        return Err(MetricsError::UnknownOutput(output.to_owned()));
    }
    if !counts.genders.iter().any(|g| g == gender) {
        return Err(MetricsError::UnknownGender(gender.to_owned()));
    }
    let total = counts.row_total(output);
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(counts.count(output, gender) as f64 / total as f64))
}

/// Per-(output, gender) bias scores over a fixed domain. Rows whose output
/// never occurred with any gender are undefined and stay absent.
///
/// `support` carries each defined row's gendered occurrence count when the
/// table came from counting; constraint building uses it to normalize row
/// scales. Hand-built tables may leave it empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub outputs: Vec<String>,
    pub genders: Vec<String>,
    pub bias: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub support: BTreeMap<String, u64>,
}

impl BiasTable {
    pub fn from_counts(counts: &CooccurrenceCounts) -> Self {
        let mut bias = BTreeMap::new();
        let mut support = BTreeMap::new();
        for output in &counts.outputs {
            let total = counts.row_total(output);
            if total == 0 {
                continue;
            }
            let row: BTreeMap<String, f64> = counts
                .genders
                .iter()
                .map(|g| (g.clone(), counts.count(output, g) as f64 / total as f64))
                .collect();
            bias.insert(output.clone(), row);
            support.insert(output.clone(), total);
        }
        BiasTable {
            outputs: counts.outputs.clone(),
            genders: counts.genders.clone(),
            bias,
            support,
        }
    }

    pub fn get(&self, output: &str, gender: &str) -> Option<f64> {
        self.bias
            .get(output)
            .and_then(|row| row.get(gender))
            .copied()
    }

    pub fn is_defined(&self, output: &str) -> bool {
        self.bias.contains_key(output)
    }

    /// Gendered training occurrences behind a row, when known.
    pub fn support_of(&self, output: &str) -> Option<u64> {
        self.support.get(output).copied()
    }

    fn check_same_domain(&self, other: &BiasTable) -> Result<(), MetricsError> {
        if self.outputs != other.outputs || self.genders != other.genders {
            return Err(MetricsError::MismatchedDomains);
        }
        Ok(())
    }
}

/// Mean bias amplification of predictions against training bias:
/// the average over all outputs of the excess predicted bias, summed over
/// (output, gender) pairs whose training bias already favors that gender
/// (strictly above 1/|G|). Undefined predicted rows contribute nothing.
pub fn mean_bias_amplification(train: &BiasTable, pred: &BiasTable) -> Result<f64, MetricsError> {
    train.check_same_domain(pred)?;
    if train.outputs.is_empty() {
        return Ok(0.0);
    }
    let threshold = 1.0 / train.genders.len() as f64;
    let mut total = 0.0;
    for output in &train.outputs {
        for gender in &train.genders {
            let Some(b_star) = train.get(output, gender) else {
                continue;
            };
            if b_star > threshold {
                if let Some(b_pred) = pred.get(output, gender) {
                    total += b_pred - b_star;
                }
            }
        }
    }
    Ok(total / train.outputs.len() as f64)
}

/// Outputs whose predicted bias toward the reference (first) gender moved by
/// more than `margin` from the training bias. Rows undefined on either side
/// are skipped.
pub fn count_margin_violations(
    train: &BiasTable,
    pred: &BiasTable,
    margin: f64,
) -> Result<Vec<String>, MetricsError> {
    assert!(margin >= 0.0, "margin must be nonnegative");
    train.check_same_domain(pred)?;
    let g_ref = &train.genders[0];
    let mut violating = Vec::new();
    for output in &train.outputs {
        let (Some(b_star), Some(b_pred)) = (train.get(output, g_ref), pred.get(output, g_ref))
        else {
            continue;
        };
        if (b_pred - b_star).abs() > margin {
            violating.push(output.clone());
        }
    }
    Ok(violating)
}

/// Fraction of gold role slots where the predicted verb matches the gold verb
/// and the predicted noun for that slot matches gold.
pub fn top1_role_accuracy(pred: &[Assignment], gold: &[Assignment]) -> Result<f64, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::MisalignedCorpora(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    let by_id: BTreeMap<&str, &Assignment> =
        pred.iter().map(|a| (a.instance_id.as_str(), a)).collect();
    let mut slots = 0u64;
    let mut hits = 0u64;
    for g in gold {
        let p = by_id.get(g.instance_id.as_str()).ok_or_else(|| {
            MetricsError::MisalignedCorpora(format!(
                "no prediction for instance '{}'",
                g.instance_id
            ))
        })?;
        let (
            Label::Vsrl {
                verb: gv,
                role_fills: gf,
            },
            Label::Vsrl {
                verb: pv,
                role_fills: pf,
            },
        ) = (&g.label, &p.label)
        else {
            return Err(MetricsError::MisalignedCorpora(format!(
                "instance '{}' is not a VSRL assignment",
                g.instance_id
            )));
        };
        slots += gf.len() as u64;
        if gv == pv {
            hits += gf
                .iter()
                .filter(|(role, noun)| pf.get(*role) == Some(noun))
                .count() as u64;
        }
    }
    if slots == 0 {
        return Ok(1.0);
    }
    Ok(hits as f64 / slots as f64)
}

/// Top-1 mean average precision for MLC: for every object category with at
/// least one gold positive, rank instances by score and average the precision
/// at each positive; categories with no positives are excluded from the mean.
///
/// `pred_scores` pairs each instance id with its per-object ranking scores,
/// positionally aligned with `gold`; objects missing from a map rank last.
pub fn top1_map(
    pred_scores: &[(String, BTreeMap<String, f64>)],
    gold: &[Assignment],
    objects: &[String],
) -> Result<f64, MetricsError> {
    if pred_scores.len() != gold.len() {
        return Err(MetricsError::MisalignedCorpora(format!(
            "{} score rows for {} gold labels",
            pred_scores.len(),
            gold.len()
        )));
    }
    for ((id, _), g) in pred_scores.iter().zip(gold) {
        if id != &g.instance_id {
            return Err(MetricsError::MisalignedCorpora(format!(
                "score row '{id}' does not match gold instance '{}'",
                g.instance_id
            )));
        }
    }
    let positives: Vec<&Label> = gold.iter().map(|g| &g.label).collect();
    let mut sum_ap = 0.0;
    let mut categories = 0u64;
    for object in objects {
        let gold_positive: Vec<bool> = positives
            .iter()
            .map(|label| matches!(label, Label::Mlc { objects, .. } if objects.contains(object)))
            .collect();
        let n_pos = gold_positive.iter().filter(|p| **p).count();
        if n_pos == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..pred_scores.len()).collect();
        order.sort_by(|&a, &b| {
            let sa = pred_scores[a]
                .1
                .get(object)
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
            let sb = pred_scores[b]
                .1
                .get(object)
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        let mut seen_pos = 0u64;
        let mut ap = 0.0;
        for (rank, &idx) in order.iter().enumerate() {
            if gold_positive[idx] {
                seen_pos += 1;
                ap += seen_pos as f64 / (rank + 1) as f64;
            }
        }
        sum_ap += ap / n_pos as f64;
        categories += 1;
    }
    if categories == 0 {
        return Ok(0.0);
    }
    Ok(sum_ap / categories as f64)
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use proptest::prelude::*;

    use super::*;
    use crate::schema::Assignment;

    fn vsrl_agent(id: &str, verb: &str, agent: &str) -> Assignment {
        Assignment::vsrl(
            id,
            verb,
            BTreeMap::from([("agent".to_owned(), agent.to_owned())]),
            0.0,
        )
    }

    fn schema() -> OutputSchema {
        crate::schema::tests::two_verb_schema()
    }

    fn table(entries: &[(&str, &[(&str, f64)])]) -> BiasTable {
        let outputs = entries.iter().map(|(o, _)| o.to_string()).collect();
        let mut bias = BTreeMap::new();
        let mut genders: Vec<String> = vec![];
        for (output, row) in entries {
            if row.is_empty() {
                continue;
            }
            if genders.is_empty() {
                genders = row.iter().map(|(g, _)| g.to_string()).collect();
            }
            bias.insert(
                output.to_string(),
                row.iter().map(|(g, v)| (g.to_string(), *v)).collect(),
            );
        }
        if genders.is_empty() {
            genders = vec!["man".into(), "woman".into()];
        }
        BiasTable {
            outputs,
            genders,
            bias,
            support: BTreeMap::new(),
        }
    }

    #[test]
    fn counts_follow_markers() {
        let schema = schema();
        let assignments = vec![
            vsrl_agent("i0", "cooking", "man"),
            vsrl_agent("i1", "cooking", "woman"),
            vsrl_agent("i2", "cooking", "woman"),
        ];
        let counts = count_cooccurrences(&assignments, &schema);
        assert_eq!(counts.count("cooking", "man"), 1);
        assert_eq!(counts.count("cooking", "woman"), 2);
        assert_eq!(counts.count("driving", "man"), 0);
    }

    #[test]
    fn empty_assignments_count_zero() {
        let counts = count_cooccurrences(&[], &schema());
        assert_eq!(counts.row_total("cooking"), 0);
    }

    #[test]
    fn mlc_counts_increment_per_object() {
        let schema = crate::schema::tests::mlc_schema(&["fork", "knife"]);
        let a = Assignment::mlc(
            "i0",
            "man",
            BTreeSet::from(["knife".to_owned(), "fork".to_owned()]),
            0.0,
        );
        let counts = count_cooccurrences(&[a], &schema);
        assert_eq!(counts.count("knife", "man"), 1);
        assert_eq!(counts.count("fork", "man"), 1);
        assert_eq!(counts.count("knife", "woman"), 0);
    }

    #[test]
    fn bias_score_is_the_count_quotient() {
        let mut counts =
            CooccurrenceCounts::new(vec!["cooking".into()], vec!["man".into(), "woman".into()]);
        counts.add("cooking", "man", 33);
        counts.add("cooking", "woman", 67);
        assert_eq!(bias_score(&counts, "cooking", "man").unwrap(), Some(0.33));

        let mut even =
            CooccurrenceCounts::new(vec!["cooking".into()], vec!["man".into(), "woman".into()]);
        even.add("cooking", "man", 5);
        even.add("cooking", "woman", 5);
        assert_eq!(bias_score(&even, "cooking", "man").unwrap(), Some(0.5));

        let empty =
            CooccurrenceCounts::new(vec!["cooking".into()], vec!["man".into(), "woman".into()]);
        assert_eq!(bias_score(&empty, "cooking", "man").unwrap(), None);
        assert!(matches!(
            bias_score(&empty, "flying", "man"),
            Err(MetricsError::UnknownOutput(_))
        ));
        assert!(matches!(
            bias_score(&empty, "cooking", "nb"),
            Err(MetricsError::UnknownGender(_))
        ));
    }

    #[test]
    fn amplification_on_worked_example() {
        let train = table(&[("cooking", &[("man", 0.34), ("woman", 0.66)])]);
        let pred = table(&[("cooking", &[("man", 0.16), ("woman", 0.84)])]);
        let amp = mean_bias_amplification(&train, &pred).unwrap();
        assert!((amp - 0.18).abs() < 1e-12, "amp = {amp}");
    }

    #[test]
    fn amplification_of_identical_tables_is_zero() {
        let t = table(&[
            ("a", &[("man", 0.8), ("woman", 0.2)]),
            ("b", &[("man", 0.5), ("woman", 0.5)]),
        ]);
        assert_eq!(mean_bias_amplification(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn amplification_sums_only_favoring_pairs() {
        let train = table(&[
            ("a", &[("man", 0.8), ("woman", 0.2)]),
            ("b", &[("man", 0.5), ("woman", 0.5)]),
        ]);
        let pred = table(&[
            ("a", &[("man", 0.9), ("woman", 0.1)]),
            ("b", &[("man", 0.7), ("woman", 0.3)]),
        ]);
        let amp = mean_bias_amplification(&train, &pred).unwrap();
        assert!((amp - 0.05).abs() < 1e-12, "amp = {amp}");
    }

    #[test]
    fn undefined_predicted_rows_contribute_nothing() {
        let train = table(&[("a", &[("man", 0.8), ("woman", 0.2)])]);
        let mut pred = train.clone();
        pred.bias.clear();
        assert_eq!(mean_bias_amplification(&train, &pred).unwrap(), 0.0);
        assert!(count_margin_violations(&train, &pred, 0.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn mismatched_domains_are_rejected() {
        let a = table(&[("a", &[("man", 0.8), ("woman", 0.2)])]);
        let b = table(&[("b", &[("man", 0.8), ("woman", 0.2)])]);
        assert!(matches!(
            mean_bias_amplification(&a, &b),
            Err(MetricsError::MismatchedDomains)
        ));
    }

    #[test]
    fn margin_violations_use_reference_gender() {
        let train = table(&[("cooking", &[("man", 0.33), ("woman", 0.67)])]);
        let pred = table(&[("cooking", &[("man", 0.40), ("woman", 0.60)])]);
        assert_eq!(
            count_margin_violations(&train, &pred, 0.05).unwrap(),
            vec!["cooking".to_owned()]
        );

        let close = table(&[("cooking", &[("man", 0.36), ("woman", 0.64)])]);
        assert!(count_margin_violations(&train, &close, 0.05)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn planted_violations_are_all_found() {
        let n = 10;
        let outputs: Vec<String> = (0..n).map(|i| format!("verb{i}")).collect();
        let mut train_rows = vec![];
        let mut pred_rows = vec![];
        for (i, o) in outputs.iter().enumerate() {
            let b = 0.5;
            // plant a violation on outputs 1, 4, 7
            let shift = if i % 3 == 1 { 0.2 } else { 0.0 };
            train_rows.push((o.clone(), b));
            pred_rows.push((o.clone(), b + shift));
        }
        let mk = |rows: &[(String, f64)]| BiasTable {
            outputs: outputs.clone(),
            genders: vec!["man".into(), "woman".into()],
            bias: rows
                .iter()
                .map(|(o, b)| {
                    (
                        o.clone(),
                        BTreeMap::from([("man".to_owned(), *b), ("woman".to_owned(), 1.0 - *b)]),
                    )
                })
                .collect(),
            support: BTreeMap::new(),
        };
        let violations = count_margin_violations(&mk(&train_rows), &mk(&pred_rows), 0.05).unwrap();
        assert_eq!(violations.len(), 3);
    }

    #[test]
    fn role_accuracy_gates_on_verb() {
        let gold = vec![
            Assignment::vsrl(
                "i0",
                "cooking",
                BTreeMap::from([
                    ("agent".to_owned(), "woman".to_owned()),
                    ("tool".to_owned(), "spatula".to_owned()),
                ]),
                0.0,
            ),
            Assignment::vsrl(
                "i1",
                "driving",
                BTreeMap::from([
                    ("agent".to_owned(), "man".to_owned()),
                    ("tool".to_owned(), "car".to_owned()),
                ]),
                0.0,
            ),
        ];
        assert_eq!(top1_role_accuracy(&gold, &gold).unwrap(), 1.0);

        let mut wrong_verb = gold.clone();
        for a in &mut wrong_verb {
            if let Label::Vsrl { verb, .. } = &mut a.label {
                *verb = format!("not_{verb}");
            }
        }
        assert_eq!(top1_role_accuracy(&wrong_verb, &gold).unwrap(), 0.0);

        let mut one_noun_wrong = gold.clone();
        if let Label::Vsrl { role_fills, .. } = &mut one_noun_wrong[1].label {
            role_fills.insert("tool".to_owned(), "bus".to_owned());
        }
        assert_eq!(top1_role_accuracy(&one_noun_wrong, &gold).unwrap(), 0.75);
    }

    #[test]
    fn map_handles_perfect_reversed_and_empty_categories() {
        let objects = vec!["knife".to_owned(), "fork".to_owned()];
        let gold: Vec<Assignment> = (0..4)
            .map(|i| {
                let objs = if i == 3 {
                    BTreeSet::from(["knife".to_owned()])
                } else {
                    BTreeSet::new()
                };
                Assignment::mlc(format!("i{i}"), "man", objs, 0.0)
            })
            .collect();
        let scores = |vals: [f64; 4]| -> Vec<(String, BTreeMap<String, f64>)> {
            vals.iter()
                .enumerate()
                .map(|(i, v)| {
                    (
                        format!("i{i}"),
                        BTreeMap::from([("knife".to_owned(), *v), ("fork".to_owned(), 0.0)]),
                    )
                })
                .collect()
        };
        // positive ranked first
        let perfect = top1_map(&scores([0.0, 0.1, 0.2, 0.9]), &gold, &objects).unwrap();
        assert_eq!(perfect, 1.0);
        // positive ranked last among 4; fork has no positives and is excluded
        let reversed = top1_map(&scores([0.9, 0.5, 0.2, 0.0]), &gold, &objects).unwrap();
        assert!((reversed - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gold_counting_reproduces_hand_ratios() {
        let schema = schema();
        let mut assignments = vec![];
        for i in 0..8 {
            let agent = if i < 2 { "man" } else { "woman" };
            assignments.push(vsrl_agent(&format!("i{i}"), "cooking", agent));
        }
        let counts = count_cooccurrences(&assignments, &schema);
        assert_eq!(bias_score(&counts, "cooking", "man").unwrap(), Some(0.25));
        let table = BiasTable::from_counts(&counts);
        assert_eq!(table.get("cooking", "woman"), Some(0.75));
        assert!(!table.is_defined("driving"));
    }

    proptest! {
        #[test]
        fn defined_rows_sum_to_one(counts in proptest::collection::vec(0u64..500, 2..6)) {
            let genders: Vec<String> = (0..counts.len()).map(|i| format!("g{i}")).collect();
            let mut cc = CooccurrenceCounts::new(vec!["o".into()], genders.clone());
            for (g, c) in genders.iter().zip(&counts) {
                cc.add("o", g, *c);
            }
            let table = BiasTable::from_counts(&cc);
            if counts.iter().sum::<u64>() == 0 {
                prop_assert!(!table.is_defined("o"));
            } else {
                let sum: f64 = genders.iter().map(|g| table.get("o", g).unwrap()).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn bias_score_is_scale_invariant(m in 1u64..1000, w in 0u64..1000, k in 1u64..50) {
            let mk = |scale: u64| {
                let mut cc = CooccurrenceCounts::new(
                    vec!["o".into()],
                    vec!["man".into(), "woman".into()],
                );
                cc.add("o", "man", m * scale);
                cc.add("o", "woman", w * scale);
                cc
            };
            let b1 = bias_score(&mk(1), "o", "man").unwrap().unwrap();
            let bk = bias_score(&mk(k), "o", "man").unwrap().unwrap();
            prop_assert!((b1 - bk).abs() < 1e-12);
        }

        #[test]
        fn amplification_is_monotone_in_favoring_pairs(
            b_star in 0.51f64..0.95,
            b_pred in 0.0f64..1.0,
            delta in 0.001f64..0.04,
            n_outputs in 1usize..6,
        ) {
            let outputs: Vec<String> = (0..n_outputs).map(|i| format!("o{i}")).collect();
            let genders = vec!["man".to_owned(), "woman".to_owned()];
            let row = |b: f64| BTreeMap::from([
                ("man".to_owned(), b),
                ("woman".to_owned(), 1.0 - b),
            ]);
            let train = BiasTable {
                outputs: outputs.clone(),
                genders: genders.clone(),
                bias: outputs.iter().map(|o| (o.clone(), row(b_star))).collect(),
                support: BTreeMap::new(),
            };
            let pred = BiasTable {
                outputs: outputs.clone(),
                genders: genders.clone(),
                bias: outputs.iter().map(|o| (o.clone(), row(b_pred))).collect(),
                support: BTreeMap::new(),
            };
            let mut raised = pred.clone();
            let bumped = raised.bias.get_mut("o0").unwrap().get_mut("man").unwrap();
            *bumped += delta;
            let base = mean_bias_amplification(&train, &pred).unwrap();
            let more = mean_bias_amplification(&train, &raised).unwrap();
            prop_assert!((more - base - delta / n_outputs as f64).abs() < 1e-9);
        }
    }
}
