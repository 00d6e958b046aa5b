//! Structured output spaces, per-instance score tables, and assignments.
//!
//! A [`Corpus`] couples one [`OutputSchema`] with per-instance [`ScoreTable`]s
//! and optional gold [`Assignment`]s. Scores are log-potentials: the total
//! score of an assignment is the sum of its component scores and MAP decoding
//! maximizes that sum. Every collection keeps file order, which fixes
//! indicator indices and tie-breaking everywhere downstream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved noun candidate marking an unfilled role. It carries no special
/// semantics in decoding; schemas that forbid empty roles simply omit it.
pub const NULL_NOUN: &str = "∅";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("instance {instance_id}: output space has {cardinality} assignments, over the limit {limit}")]
    CardinalityExceeded {
        instance_id: String,
        cardinality: u128,
        limit: u64,
    },
    #[error("instance {instance_id}: infeasible assignment: {reason}")]
    InfeasibleAssignment { instance_id: String, reason: String },
    #[error("instance {instance_id}: no score for {key}")]
    MissingScore { instance_id: String, key: String },
}

/// The two supported output-space families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// One verb per instance plus one noun filler per role of that verb.
    #[serde(rename = "VSRL")]
    Vsrl,
    /// One gender per instance plus any subset of object categories.
    #[serde(rename = "MLC")]
    Mlc,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Vsrl => write!(f, "VSRL"),
            Family::Mlc => write!(f, "MLC"),
        }
    }
}

/// A semantic role and its candidate noun fillers, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub nouns: Vec<String>,
}

/// A verb and its roles, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbSpec {
    pub name: String,
    pub roles: Vec<RoleSpec>,
}

/// Marker sets: verb -> gender -> (role, noun) pairs that attribute that gender.
pub type GenderMarkers = BTreeMap<String, BTreeMap<String, BTreeSet<(String, String)>>>;

fn default_genders() -> Vec<String> {
    vec!["man".to_owned(), "woman".to_owned()]
}

/// The structured output space shared by all instances of a corpus.
///
/// For the VSRL family the space is spanned by `verbs`; gender is attributed
/// through `gender_markers`. For the MLC family the space is spanned by
/// `genders` x subsets of `objects`, and the gender variable itself is the
/// marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub family: Family,
    #[serde(default)]
    pub verbs: Vec<VerbSpec>,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default = "default_genders")]
    pub genders: Vec<String>,
    #[serde(default)]
    pub gender_markers: GenderMarkers,
}

impl OutputSchema {
    pub fn verb(&self, name: &str) -> Option<&VerbSpec> {
        self.verbs.iter().find(|v| v.name == name)
    }

    /// The outputs bias is measured over: verb names (VSRL) or object names (MLC).
    pub fn outputs(&self) -> Vec<String> {
        match self.family {
            Family::Vsrl => self.verbs.iter().map(|v| v.name.clone()).collect(),
            Family::Mlc => self.objects.clone(),
        }
    }

    /// The gender ratios are expressed toward the first listed gender.
    pub fn reference_gender(&self) -> &str {
        &self.genders[0]
    }

    /// Indicator keys whose activation attributes gender `gender` to `output`.
    pub fn marker_keys(&self, output: &str, gender: &str) -> Vec<IndicatorKey> {
        match self.family {
            Family::Vsrl => self
                .gender_markers
                .get(output)
                .and_then(|by_gender| by_gender.get(gender))
                .map(|pairs| {
                    pairs
                        .iter()
                        .map(|(role, noun)| IndicatorKey::RoleNoun {
                            verb: output.to_owned(),
                            role: role.clone(),
                            noun: noun.clone(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            Family::Mlc => vec![IndicatorKey::GenderObject {
                gender: gender.to_owned(),
                object: output.to_owned(),
            }],
        }
    }
}

/// One binary output variable of the structured space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKey {
    Verb {
        verb: String,
    },
    RoleNoun {
        verb: String,
        role: String,
        noun: String,
    },
    Gender {
        gender: String,
    },
    GenderObject {
        gender: String,
        object: String,
    },
}

impl fmt::Display for IndicatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndicatorKey::Verb { verb } => write!(f, "verb({verb})"),
            IndicatorKey::RoleNoun { verb, role, noun } => {
                write!(f, "role({verb}, {role}, {noun})")
            }
            IndicatorKey::Gender { gender } => write!(f, "gender({gender})"),
            IndicatorKey::GenderObject { gender, object } => {
                write!(f, "object({gender}, {object})")
            }
        }
    }
}

/// Per-instance log-potentials over the schema's output space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub instance_id: String,
    /// VSRL: verb -> score.
    #[serde(default)]
    pub verb_scores: BTreeMap<String, f64>,
    /// VSRL: verb -> role -> noun -> score.
    #[serde(default)]
    pub role_scores: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    /// MLC: gender -> score.
    #[serde(default)]
    pub gender_scores: BTreeMap<String, f64>,
    /// MLC: gender -> object -> score.
    #[serde(default)]
    pub object_scores: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ScoreTable {
    pub fn verb_score(&self, verb: &str) -> Option<f64> {
        self.verb_scores.get(verb).copied()
    }

    pub fn role_score(&self, verb: &str, role: &str, noun: &str) -> Option<f64> {
        self.role_scores.get(verb)?.get(role)?.get(noun).copied()
    }

    pub fn gender_score(&self, gender: &str) -> Option<f64> {
        self.gender_scores.get(gender).copied()
    }

    pub fn object_score(&self, gender: &str, object: &str) -> Option<f64> {
        self.object_scores.get(gender)?.get(object).copied()
    }

    /// Raw score of one indicator, if the table covers it.
    pub fn score_of(&self, key: &IndicatorKey) -> Option<f64> {
        match key {
            IndicatorKey::Verb { verb } => self.verb_score(verb),
            IndicatorKey::RoleNoun { verb, role, noun } => self.role_score(verb, role, noun),
            IndicatorKey::Gender { gender } => self.gender_score(gender),
            IndicatorKey::GenderObject { gender, object } => self.object_score(gender, object),
        }
    }
}

/// The family-specific part of a decoded or gold output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Vsrl {
        verb: String,
        /// Complete over the chosen verb's roles: role -> noun.
        role_fills: BTreeMap<String, String>,
    },
    Mlc {
        gender: String,
        objects: BTreeSet<String>,
    },
}

/// One structured output for one instance, with its un-penalized model score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub instance_id: String,
    #[serde(flatten)]
    pub label: Label,
    #[serde(default)]
    pub score: f64,
}

impl Assignment {
    pub fn vsrl(
        instance_id: impl Into<String>,
        verb: impl Into<String>,
        role_fills: BTreeMap<String, String>,
        score: f64,
    ) -> Self {
        Assignment {
            instance_id: instance_id.into(),
            label: Label::Vsrl {
                verb: verb.into(),
                role_fills,
            },
            score,
        }
    }

    pub fn mlc(
        instance_id: impl Into<String>,
        gender: impl Into<String>,
        objects: BTreeSet<String>,
        score: f64,
    ) -> Self {
        Assignment {
            instance_id: instance_id.into(),
            label: Label::Mlc {
                gender: gender.into(),
                objects,
            },
            score,
        }
    }

    pub fn verb(&self) -> Option<&str> {
        match &self.label {
            Label::Vsrl { verb, .. } => Some(verb),
            Label::Mlc { .. } => None,
        }
    }

    pub fn gender(&self) -> Option<&str> {
        match &self.label {
            Label::Mlc { gender, .. } => Some(gender),
            Label::Vsrl { .. } => None,
        }
    }

    /// The indicator variables set to 1 by this assignment.
    pub fn active_indicators(&self) -> Vec<IndicatorKey> {
        match &self.label {
            Label::Vsrl { verb, role_fills } => {
                let mut keys = Vec::with_capacity(1 + role_fills.len());
                keys.push(IndicatorKey::Verb { verb: verb.clone() });
                for (role, noun) in role_fills {
                    keys.push(IndicatorKey::RoleNoun {
                        verb: verb.clone(),
                        role: role.clone(),
                        noun: noun.clone(),
                    });
                }
                keys
            }
            Label::Mlc { gender, objects } => {
                let mut keys = Vec::with_capacity(1 + objects.len());
                keys.push(IndicatorKey::Gender {
                    gender: gender.clone(),
                });
                for object in objects {
                    keys.push(IndicatorKey::GenderObject {
                        gender: gender.clone(),
                        object: object.clone(),
                    });
                }
                keys
            }
        }
    }
}

/// A schema, its instances, and optional gold labels aligned 1:1 by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema: OutputSchema,
    pub instances: Vec<ScoreTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<Assignment>>,
}

/// One invariant violation, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn check_unique<'a>(
    names: impl Iterator<Item = &'a str>,
    path: &str,
    kind: &str,
    report: &mut ValidationReport,
) {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name) {
            report.push(path, format!("duplicate {kind} name '{name}'"));
        }
    }
}

/// Check every invariant of a corpus and report all violations.
///
/// An empty report guarantees that decoding, metrics, and constraint building
/// accept the corpus without error.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_schema(&corpus.schema, &mut report);

    let mut seen_ids = BTreeSet::new();
    for (i, instance) in corpus.instances.iter().enumerate() {
        let path = format!("instances[{i}]");
        if !seen_ids.insert(instance.instance_id.as_str()) {
            report.push(
                &path,
                format!("duplicate instance_id '{}'", instance.instance_id),
            );
        }
        validate_score_table(&corpus.schema, instance, &path, &mut report);
    }

    if let Some(gold) = &corpus.gold {
        if gold.len() != corpus.instances.len() {
            report.push(
                "gold",
                format!(
                    "{} gold assignments for {} instances",
                    gold.len(),
                    corpus.instances.len()
                ),
            );
        }
        for (i, assignment) in gold.iter().enumerate() {
            let path = format!("gold[{i}]");
            if let Some(instance) = corpus.instances.get(i) {
                if assignment.instance_id != instance.instance_id {
                    report.push(
                        &path,
                        format!(
                            "instance_id '{}' does not match instances[{i}] ('{}')",
                            assignment.instance_id, instance.instance_id
                        ),
                    );
                }
            }
            if let Err(err) = check_feasible(&corpus.schema, assignment) {
                report.push(&path, err.to_string());
            }
            if !assignment.score.is_finite() {
                report.push(format!("{path}.score"), "score is not finite".to_owned());
            }
        }
    }

    report
}

fn validate_schema(schema: &OutputSchema, report: &mut ValidationReport) {
    if schema.genders.len() < 2 {
        report.push("schema.genders", "at least two genders are required");
    }
    check_unique(
        schema.genders.iter().map(String::as_str),
        "schema.genders",
        "gender",
        report,
    );
    check_unique(
        schema.objects.iter().map(String::as_str),
        "schema.objects",
        "object",
        report,
    );
    check_unique(
        schema.verbs.iter().map(|v| v.name.as_str()),
        "schema.verbs",
        "verb",
        report,
    );

    match schema.family {
        Family::Vsrl => {
            if schema.verbs.is_empty() {
                report.push("schema.verbs", "VSRL schema must define at least one verb");
            }
            if !schema.objects.is_empty() {
                report.push("schema.objects", "VSRL schema must not define objects");
            }
            for (vi, verb) in schema.verbs.iter().enumerate() {
                let vpath = format!("schema.verbs[{vi}]");
                if verb.roles.is_empty() {
                    report.push(&vpath, format!("verb '{}' has no roles", verb.name));
                }
                check_unique(
                    verb.roles.iter().map(|r| r.name.as_str()),
                    &vpath,
                    "role",
                    report,
                );
                for (ri, role) in verb.roles.iter().enumerate() {
                    let rpath = format!("{vpath}.roles[{ri}]");
                    if role.nouns.is_empty() {
                        report.push(
                            &rpath,
                            format!("role '{}' has no candidate nouns", role.name),
                        );
                    }
                    check_unique(
                        role.nouns.iter().map(String::as_str),
                        &rpath,
                        "noun",
                        report,
                    );
                }
            }
            validate_markers(schema, report);
        }
        Family::Mlc => {
            if !schema.verbs.is_empty() {
                report.push("schema.verbs", "MLC schema must not define verbs");
            }
            if !schema.gender_markers.is_empty() {
                report.push(
                    "schema.gender_markers",
                    "MLC gender is the marker; gender_markers must be empty",
                );
            }
        }
    }
}

fn validate_markers(schema: &OutputSchema, report: &mut ValidationReport) {
    for (verb_name, by_gender) in &schema.gender_markers {
        let path = format!("schema.gender_markers['{verb_name}']");
        let Some(verb) = schema.verb(verb_name) else {
            report.push(&path, format!("unknown verb '{verb_name}'"));
            continue;
        };
        let mut used: BTreeMap<&(String, String), &str> = BTreeMap::new();
        for (gender, pairs) in by_gender {
            if !schema.genders.iter().any(|g| g == gender) {
                report.push(&path, format!("unknown gender '{gender}'"));
            }
            for pair in pairs {
                let (role_name, noun) = pair;
                match verb.roles.iter().find(|r| &r.name == role_name) {
                    None => report.push(
                        &path,
                        format!("marker ({role_name}, {noun}): verb '{verb_name}' has no role '{role_name}'"),
                    ),
                    Some(role) => {
                        if !role.nouns.iter().any(|n| n == noun) {
                            report.push(
                                &path,
                                format!("marker ({role_name}, {noun}): role '{role_name}' has no noun '{noun}'"),
                            );
                        }
                    }
                }
                if let Some(other) = used.insert(pair, gender) {
                    report.push(
                        &path,
                        format!("marker ({role_name}, {noun}) appears for both '{other}' and '{gender}'"),
                    );
                }
            }
        }
    }
}

fn validate_score_table(
    schema: &OutputSchema,
    table: &ScoreTable,
    path: &str,
    report: &mut ValidationReport,
) {
    let check_finite = |value: f64, key: String, report: &mut ValidationReport| {
        if !value.is_finite() {
            report.push(format!("{path}.{key}"), "score is not finite".to_owned());
        }
    };

    match schema.family {
        Family::Vsrl => {
            if !table.gender_scores.is_empty() || !table.object_scores.is_empty() {
                report.push(
                    path,
                    "VSRL instance must not carry gender_scores or object_scores",
                );
            }
            for verb in &schema.verbs {
                match table.verb_score(&verb.name) {
                    None => report.push(
                        format!("{path}.verb_scores"),
                        format!("missing score for verb '{}'", verb.name),
                    ),
                    Some(s) => check_finite(s, format!("verb_scores['{}']", verb.name), report),
                }
                for role in &verb.roles {
                    for noun in &role.nouns {
                        match table.role_score(&verb.name, &role.name, noun) {
                            None => report.push(
                                format!("{path}.role_scores"),
                                format!(
                                    "missing score for ({}, {}, {})",
                                    verb.name, role.name, noun
                                ),
                            ),
                            Some(s) => check_finite(
                                s,
                                format!("role_scores[{}][{}][{}]", verb.name, role.name, noun),
                                report,
                            ),
                        }
                    }
                }
            }
            for verb_name in table.verb_scores.keys() {
                if schema.verb(verb_name).is_none() {
                    report.push(
                        format!("{path}.verb_scores"),
                        format!("score for unknown verb '{verb_name}'"),
                    );
                }
            }
            for (verb_name, by_role) in &table.role_scores {
                let Some(verb) = schema.verb(verb_name) else {
                    report.push(
                        format!("{path}.role_scores"),
                        format!("scores for unknown verb '{verb_name}'"),
                    );
                    continue;
                };
                for (role_name, by_noun) in by_role {
                    let Some(role) = verb.roles.iter().find(|r| &r.name == role_name) else {
                        report.push(
                            format!("{path}.role_scores"),
                            format!("scores for unknown role ({verb_name}, {role_name})"),
                        );
                        continue;
                    };
                    for noun in by_noun.keys() {
                        if !role.nouns.iter().any(|n| n == noun) {
                            report.push(
                                format!("{path}.role_scores"),
                                format!(
                                    "score for unknown noun ({verb_name}, {role_name}, {noun})"
                                ),
                            );
                        }
                    }
                }
            }
        }
        Family::Mlc => {
            if !table.verb_scores.is_empty() || !table.role_scores.is_empty() {
                report.push(
                    path,
                    "MLC instance must not carry verb_scores or role_scores",
                );
            }
            for gender in &schema.genders {
                match table.gender_score(gender) {
                    None => report.push(
                        format!("{path}.gender_scores"),
                        format!("missing score for gender '{gender}'"),
                    ),
                    Some(s) => check_finite(s, format!("gender_scores['{gender}']"), report),
                }
                for object in &schema.objects {
                    match table.object_score(gender, object) {
                        None => report.push(
                            format!("{path}.object_scores"),
                            format!("missing score for ({gender}, {object})"),
                        ),
                        Some(s) => {
                            check_finite(s, format!("object_scores[{gender}][{object}]"), report)
                        }
                    }
                }
            }
            for gender in table.gender_scores.keys() {
                if !schema.genders.iter().any(|g| g == gender) {
                    report.push(
                        format!("{path}.gender_scores"),
                        format!("score for unknown gender '{gender}'"),
                    );
                }
            }
            for (gender, by_object) in &table.object_scores {
                if !schema.genders.iter().any(|g| g == gender) {
                    report.push(
                        format!("{path}.object_scores"),
                        format!("scores for unknown gender '{gender}'"),
                    );
                    continue;
                }
                for object in by_object.keys() {
                    if !schema.objects.iter().any(|o| o == object) {
                        report.push(
                            format!("{path}.object_scores"),
                            format!("score for unknown object ({gender}, {object})"),
                        );
                    }
                }
            }
        }
    }
}

/// Structural feasibility of one assignment against a schema.
pub fn check_feasible(schema: &OutputSchema, assignment: &Assignment) -> Result<(), SchemaError> {
    let fail = |reason: String| SchemaError::InfeasibleAssignment {
        instance_id: assignment.instance_id.clone(),
        reason,
    };
    match (&assignment.label, schema.family) {
        (Label::Vsrl { verb, role_fills }, Family::Vsrl) => {
            let spec = schema
                .verb(verb)
                .ok_or_else(|| fail(format!("unknown verb '{verb}'")))?;
            if role_fills.len() != spec.roles.len() {
                return Err(fail(format!(
                    "verb '{verb}' has {} roles, {} filled",
                    spec.roles.len(),
                    role_fills.len()
                )));
            }
            for role in &spec.roles {
                let noun = role_fills.get(&role.name).ok_or_else(|| {
                    fail(format!("role '{}' of verb '{verb}' is unfilled", role.name))
                })?;
                if !role.nouns.iter().any(|n| n == noun) {
                    return Err(fail(format!(
                        "noun '{noun}' is not a candidate for role '{}' of verb '{verb}'",
                        role.name
                    )));
                }
            }
            Ok(())
        }
        (Label::Mlc { gender, objects }, Family::Mlc) => {
            if !schema.genders.iter().any(|g| g == gender) {
                return Err(fail(format!("unknown gender '{gender}'")));
            }
            for object in objects {
                if !schema.objects.iter().any(|o| o == object) {
                    return Err(fail(format!("unknown object '{object}'")));
                }
            }
            Ok(())
        }
        (label, family) => {
            let got = match label {
                Label::Vsrl { .. } => Family::Vsrl,
                Label::Mlc { .. } => Family::Mlc,
            };
            Err(fail(format!("{got} assignment in a {family} corpus")))
        }
    }
}

/// Total model score of a feasible assignment, summed in schema order so that
/// equal assignments always produce bitwise-equal scores.
pub fn assignment_score(
    schema: &OutputSchema,
    instance: &ScoreTable,
    assignment: &Assignment,
) -> Result<f64, SchemaError> {
    check_feasible(schema, assignment)?;
    let missing = |key: String| SchemaError::MissingScore {
        instance_id: instance.instance_id.clone(),
        key,
    };
    match &assignment.label {
        Label::Vsrl { verb, role_fills } => {
            let spec = schema.verb(verb).expect("feasibility checked");
            let mut total = instance
                .verb_score(verb)
                .ok_or_else(|| missing(format!("verb({verb})")))?;
            for role in &spec.roles {
                let noun = &role_fills[&role.name];
                total += instance
                    .role_score(verb, &role.name, noun)
                    .ok_or_else(|| missing(format!("role({verb}, {}, {noun})", role.name)))?;
            }
            Ok(total)
        }
        Label::Mlc { gender, objects } => {
            let mut total = instance
                .gender_score(gender)
                .ok_or_else(|| missing(format!("gender({gender})")))?;
            for object in &schema.objects {
                if objects.contains(object) {
                    total += instance
                        .object_score(gender, object)
                        .ok_or_else(|| missing(format!("object({gender}, {object})")))?;
                }
            }
            Ok(total)
        }
    }
}

/// Closed-form cardinality of the schema's output space.
pub fn output_space_size(schema: &OutputSchema) -> u128 {
    match schema.family {
        Family::Vsrl => schema
            .verbs
            .iter()
            .map(|verb| {
                verb.roles
                    .iter()
                    .map(|role| role.nouns.len() as u128)
                    .fold(1u128, u128::saturating_mul)
            })
            .fold(0u128, u128::saturating_add),
        Family::Mlc => {
            let subsets = 1u128
                .checked_shl(schema.objects.len() as u32)
                .unwrap_or(u128::MAX);
            (schema.genders.len() as u128).saturating_mul(subsets)
        }
    }
}

/// Enumerate every feasible assignment of one instance, with scores.
///
/// Order is lexicographic over schema indices (verb, then noun index per role
/// with the last role varying fastest; gender, then object subsets by
/// ascending bitmask), so the first maximum in enumeration order coincides
/// with the decoder's tie-breaking.
pub fn enumerate_assignments(
    schema: &OutputSchema,
    instance: &ScoreTable,
    limit: u64,
) -> Result<Vec<Assignment>, SchemaError> {
    let cardinality = output_space_size(schema);
    if cardinality > u128::from(limit) {
        return Err(SchemaError::CardinalityExceeded {
            instance_id: instance.instance_id.clone(),
            cardinality,
            limit,
        });
    }
    let missing = |key: String| SchemaError::MissingScore {
        instance_id: instance.instance_id.clone(),
        key,
    };

    let mut result = Vec::with_capacity(cardinality as usize);
    match schema.family {
        Family::Vsrl => {
            for verb in &schema.verbs {
                let verb_score = instance
                    .verb_score(&verb.name)
                    .ok_or_else(|| missing(format!("verb({})", verb.name)))?;
                let mut picks = vec![0usize; verb.roles.len()];
                'odometer: loop {
                    let mut score = verb_score;
                    let mut fills = BTreeMap::new();
                    for (role, &ni) in verb.roles.iter().zip(&picks) {
                        let noun = &role.nouns[ni];
                        score += instance
                            .role_score(&verb.name, &role.name, noun)
                            .ok_or_else(|| {
                                missing(format!("role({}, {}, {noun})", verb.name, role.name))
                            })?;
                        fills.insert(role.name.clone(), noun.clone());
                    }
                    result.push(Assignment::vsrl(
                        &instance.instance_id,
                        &verb.name,
                        fills,
                        score,
                    ));

                    // advance, last role fastest
                    let mut k = picks.len();
                    loop {
                        if k == 0 {
                            break 'odometer;
                        }
                        k -= 1;
                        picks[k] += 1;
                        if picks[k] < verb.roles[k].nouns.len() {
                            break;
                        }
                        picks[k] = 0;
                    }
                }
            }
        }
        Family::Mlc => {
            for gender in &schema.genders {
                let gender_score = instance
                    .gender_score(gender)
                    .ok_or_else(|| missing(format!("gender({gender})")))?;
                let n = schema.objects.len();
                for mask in 0u64..(1u64 << n) {
                    let mut score = gender_score;
                    let mut objects = BTreeSet::new();
                    for (oi, object) in schema.objects.iter().enumerate() {
                        if mask & (1 << oi) != 0 {
                            score += instance
                                .object_score(gender, object)
                                .ok_or_else(|| missing(format!("object({gender}, {object})")))?;
                            objects.insert(object.clone());
                        }
                    }
                    result.push(Assignment::mlc(
                        &instance.instance_id,
                        gender,
                        objects,
                        score,
                    ));
                }
            }
        }
    }
    Ok(result)
}
