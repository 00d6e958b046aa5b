//! Exact per-instance MAP decoding under multiplier-penalized scores.
//!
//! With the corpus-level rows relaxed into the objective, the joint argmax
//! decomposes per instance: each indicator's score is shifted by
//! `sum_j lambda_j * A_j[key]` and the original per-instance decoder applies
//! unchanged. Penalties are precomputed once per dual iteration; decoding
//! does lookups only.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::schema::{Assignment, Corpus, Family, IndicatorKey, Label, OutputSchema, ScoreTable};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("instance {instance_id}: no score for {key}")]
    UnknownKey { instance_id: String, key: String },
}

/// Per-indicator penalties for a fixed multiplier vector.
///
/// A key absent from every constraint carries penalty 0.
#[derive(Debug, Clone, Default)]
pub struct PenaltyView {
    lambda: Vec<f64>,
    verb: HashMap<String, f64>,
    role: HashMap<String, HashMap<String, HashMap<String, f64>>>,
    gender: HashMap<String, f64>,
    object: HashMap<String, HashMap<String, f64>>,
}

impl PenaltyView {
    /// Precompute `sum_j lambda_j * A_j[key]` for every key any constraint touches.
    pub fn new(set: &ConstraintSet, lambda: &[f64]) -> Self {
        assert_eq!(
            lambda.len(),
            set.constraints.len(),
            "one multiplier per constraint"
        );
        let mut view = PenaltyView {
            lambda: lambda.to_vec(),
            ..Default::default()
        };
        for (constraint, &weight) in set.constraints.iter().zip(lambda) {
            if weight == 0.0 {
                continue;
            }
            for (key, coeff) in &constraint.coeffs {
                let slot = match key {
                    IndicatorKey::Verb { verb } => view.verb.entry(verb.clone()).or_insert(0.0),
                    IndicatorKey::RoleNoun { verb, role, noun } => view
                        .role
                        .entry(verb.clone())
                        .or_default()
                        .entry(role.clone())
                        .or_default()
                        .entry(noun.clone())
                        .or_insert(0.0),
                    IndicatorKey::Gender { gender } => {
                        view.gender.entry(gender.clone()).or_insert(0.0)
                    }
                    IndicatorKey::GenderObject { gender, object } => view
                        .object
                        .entry(gender.clone())
                        .or_default()
                        .entry(object.clone())
                        .or_insert(0.0),
                };
                *slot += weight * coeff;
            }
        }
        view
    }

    /// The zero-penalty view (unconstrained decoding).
    pub fn none() -> Self {
        PenaltyView::default()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    fn verb_penalty(&self, verb: &str) -> f64 {
        self.verb.get(verb).copied().unwrap_or(0.0)
    }

    fn role_penalty(&self, verb: &str, role: &str, noun: &str) -> f64 {
        self.role
            .get(verb)
            .and_then(|r| r.get(role))
            .and_then(|n| n.get(noun))
            .copied()
            .unwrap_or(0.0)
    }

    fn gender_penalty(&self, gender: &str) -> f64 {
        self.gender.get(gender).copied().unwrap_or(0.0)
    }

    fn object_penalty(&self, gender: &str, object: &str) -> f64 {
        self.object
            .get(gender)
            .and_then(|o| o.get(object))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn penalty(&self, key: &IndicatorKey) -> f64 {
        match key {
            IndicatorKey::Verb { verb } => self.verb_penalty(verb),
            IndicatorKey::RoleNoun { verb, role, noun } => self.role_penalty(verb, role, noun),
            IndicatorKey::Gender { gender } => self.gender_penalty(gender),
            IndicatorKey::GenderObject { gender, object } => self.object_penalty(gender, object),
        }
    }

    /// Total penalty of an assignment's active indicators.
    pub fn penalty_of_assignment(&self, assignment: &Assignment) -> f64 {
        match &assignment.label {
            Label::Vsrl { verb, role_fills } => {
                let mut total = self.verb_penalty(verb);
                for (role, noun) in role_fills {
                    total += self.role_penalty(verb, role, noun);
                }
                total
            }
            Label::Mlc { gender, objects } => {
                let mut total = self.gender_penalty(gender);
                for object in objects {
                    total += self.object_penalty(gender, object);
                }
                total
            }
        }
    }
}

/// Raw score of one indicator minus its penalty. With all multipliers zero
/// this is the raw score.
pub fn adjusted_score(
    instance: &ScoreTable,
    key: &IndicatorKey,
    penalties: &PenaltyView,
) -> Result<f64, DecodeError> {
    let raw = instance
        .score_of(key)
        .ok_or_else(|| DecodeError::UnknownKey {
            instance_id: instance.instance_id.clone(),
            key: key.to_string(),
        })?;
    Ok(raw - penalties.penalty(key))
}

fn unknown(instance: &ScoreTable, key: String) -> DecodeError {
    DecodeError::UnknownKey {
        instance_id: instance.instance_id.clone(),
        key,
    }
}

/// Penalized total of one verb: adjusted verb score plus the per-role maxima.
fn vsrl_verb_total(
    verb: &crate::schema::VerbSpec,
    instance: &ScoreTable,
    penalties: &PenaltyView,
) -> Result<f64, DecodeError> {
    let raw = instance
        .verb_score(&verb.name)
        .ok_or_else(|| unknown(instance, format!("verb({})", verb.name)))?;
    let mut total = raw - penalties.verb_penalty(&verb.name);
    for role in &verb.roles {
        let mut best: Option<f64> = None;
        for noun in &role.nouns {
            let raw = instance
                .role_score(&verb.name, &role.name, noun)
                .ok_or_else(|| {
                    unknown(
                        instance,
                        format!("role({}, {}, {noun})", verb.name, role.name),
                    )
                })?;
            let adjusted = raw - penalties.role_penalty(&verb.name, &role.name, noun);
            if best.is_none_or(|b| adjusted > b) {
                best = Some(adjusted);
            }
        }
        total += best.expect("validated schema: role has at least one noun");
    }
    Ok(total)
}

/// Exact VSRL decoding: pick the verb maximizing the penalized total, then the
/// per-role argmax nouns. Ties break to the lowest schema index (verb first,
/// then role order, then noun index). The returned score is the un-penalized
/// model score of the chosen assignment.
pub fn decode_vsrl(
    schema: &OutputSchema,
    instance: &ScoreTable,
    penalties: &PenaltyView,
) -> Result<Assignment, DecodeError> {
    let mut best: Option<(f64, usize)> = None;
    for (vi, verb) in schema.verbs.iter().enumerate() {
        let total = vsrl_verb_total(verb, instance, penalties)?;
        if best.is_none_or(|(b, _)| total > b) {
            best = Some((total, vi));
        }
    }
    let (_, vi) = best.expect("validated schema: at least one verb");
    let verb = &schema.verbs[vi];

    let mut fills = std::collections::BTreeMap::new();
    let mut score = instance
        .verb_score(&verb.name)
        .ok_or_else(|| unknown(instance, format!("verb({})", verb.name)))?;
    for role in &verb.roles {
        let mut best: Option<(f64, &str, f64)> = None;
        for noun in &role.nouns {
            let raw = instance
                .role_score(&verb.name, &role.name, noun)
                .ok_or_else(|| {
                    unknown(
                        instance,
                        format!("role({}, {}, {noun})", verb.name, role.name),
                    )
                })?;
            let adjusted = raw - penalties.role_penalty(&verb.name, &role.name, noun);
            if best.is_none_or(|(b, _, _)| adjusted > b) {
                best = Some((adjusted, noun, raw));
            }
        }
        let (_, noun, raw) = best.expect("validated schema: role has at least one noun");
        score += raw;
        fills.insert(role.name.clone(), noun.to_owned());
    }
    Ok(Assignment::vsrl(
        &instance.instance_id,
        &verb.name,
        fills,
        score,
    ))
}

/// Exact MLC decoding: for each gender include exactly the objects with a
/// positive adjusted score (object inclusions are independent given the
/// gender), then pick the gender with the highest penalized total, ties to
/// the first listed. The returned score is un-penalized.
pub fn decode_mlc(
    schema: &OutputSchema,
    instance: &ScoreTable,
    penalties: &PenaltyView,
) -> Result<Assignment, DecodeError> {
    let mut best: Option<(f64, usize, Vec<usize>, f64)> = None;
    for (gi, gender) in schema.genders.iter().enumerate() {
        let raw_gender = instance
            .gender_score(gender)
            .ok_or_else(|| unknown(instance, format!("gender({gender})")))?;
        let mut total = raw_gender - penalties.gender_penalty(gender);
        let mut raw_total = raw_gender;
        let mut included = Vec::new();
        for (oi, object) in schema.objects.iter().enumerate() {
            let raw = instance
                .object_score(gender, object)
                .ok_or_else(|| unknown(instance, format!("object({gender}, {object})")))?;
            let adjusted = raw - penalties.object_penalty(gender, object);
            if adjusted > 0.0 {
                total += adjusted;
                raw_total += raw;
                included.push(oi);
            }
        }
        if best.as_ref().is_none_or(|(b, ..)| total > *b) {
            best = Some((total, gi, included, raw_total));
        }
    }
    let (_, gi, included, raw_total) = best.expect("validated schema: at least two genders");
    let objects = included
        .into_iter()
        .map(|oi| schema.objects[oi].clone())
        .collect();
    Ok(Assignment::mlc(
        &instance.instance_id,
        &schema.genders[gi],
        objects,
        raw_total,
    ))
}

/// Decode one instance with the decoder of its schema family.
pub fn decode_instance(
    schema: &OutputSchema,
    instance: &ScoreTable,
    penalties: &PenaltyView,
) -> Result<Assignment, DecodeError> {
    match schema.family {
        Family::Vsrl => decode_vsrl(schema, instance, penalties),
        Family::Mlc => decode_mlc(schema, instance, penalties),
    }
}

/// Decode every instance of a corpus against a shared penalty view.
///
/// Instances are decoded concurrently; results keep input order and are
/// independent of the worker count.
pub fn decode_corpus(
    corpus: &Corpus,
    penalties: &PenaltyView,
) -> Result<Vec<Assignment>, DecodeError> {
    corpus
        .instances
        .par_iter()
        .map(|instance| decode_instance(&corpus.schema, instance, penalties))
        .collect()
}
