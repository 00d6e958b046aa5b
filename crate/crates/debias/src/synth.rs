//! Deterministic generator of synthetic biased corpora.
//!
//! Gold labels draw each instance's gender from a configured per-output ratio;
//! eval score tables start gold-consistent with a margin of about one unit,
//! then shift the majority-gender marker score by `amplification` and add
//! Gaussian noise, so unconstrained decoding over-predicts each output's
//! majority gender. Identical configs produce byte-identical corpora.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{
    assignment_score, Assignment, Corpus, Family, GenderMarkers, OutputSchema, RoleSpec,
    ScoreTable, VerbSpec,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {0}")]
    ConfigInvalid(String),
}

/// Generator knobs. For the MLC family `n_verbs` is the object-category
/// count and the role/noun knobs are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_instances: usize,
    pub n_verbs: usize,
    /// Roles per verb including the agent role (VSRL).
    pub roles_per_verb: usize,
    /// Candidate nouns per non-agent role (VSRL); the agent role's candidates
    /// are the gender nouns.
    pub nouns_per_role: usize,
    /// Target gender ratio toward the first gender, one entry per output or a
    /// single entry broadcast to all.
    pub train_bias: Vec<f64>,
    /// Score shift toward each output's majority gender; 1.0 is enough to
    /// flip borderline instances.
    pub amplification: f64,
    pub noise_sigma: f64,
    pub family: Family,
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            ("n_instances", self.n_instances),
            ("n_verbs", self.n_verbs),
            ("roles_per_verb", self.roles_per_verb),
            ("nouns_per_role", self.nouns_per_role),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(SynthError::ConfigInvalid(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.train_bias.len() != 1 && self.train_bias.len() != self.n_verbs {
            return Err(SynthError::ConfigInvalid(format!(
                "train_bias needs 1 or {} entries, got {}",
                self.n_verbs,
                self.train_bias.len()
            )));
        }
        if self.train_bias.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(SynthError::ConfigInvalid(
                "train_bias entries must lie in [0, 1]".into(),
            ));
        }
        if !(self.amplification >= 0.0 && self.amplification.is_finite()) {
            return Err(SynthError::ConfigInvalid(
                "amplification must be nonnegative".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SynthError::ConfigInvalid(
                "noise_sigma must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn bias_of(&self, output_index: usize) -> f64 {
        if self.train_bias.len() == 1 {
            self.train_bias[0]
        } else {
            self.train_bias[output_index]
        }
    }
}

/// One independent substream per (seed, split, instance, purpose), so changing
/// one knob never shifts the draws of another.
fn substream(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn build_schema(config: &SynthConfig) -> OutputSchema {
    let genders = vec!["man".to_owned(), "woman".to_owned()];
    match config.family {
        Family::Vsrl => {
            let mut verbs = Vec::with_capacity(config.n_verbs);
            let mut markers = GenderMarkers::new();
            for v in 0..config.n_verbs {
                let name = format!("verb{v:03}");
                let mut roles = vec![RoleSpec {
                    name: "agent".into(),
                    nouns: genders.clone(),
                }];
                for r in 1..config.roles_per_verb {
                    roles.push(RoleSpec {
                        name: format!("role{r}"),
                        nouns: (0..config.nouns_per_role)
                            .map(|n| format!("r{r}n{n}"))
                            .collect(),
                    });
                }
                verbs.push(VerbSpec {
                    name: name.clone(),
                    roles,
                });
                let by_gender: BTreeMap<String, BTreeSet<(String, String)>> = genders
                    .iter()
                    .map(|g| (g.clone(), BTreeSet::from([("agent".to_owned(), g.clone())])))
                    .collect();
                markers.insert(name, by_gender);
            }
            OutputSchema {
                family: Family::Vsrl,
                verbs,
                objects: vec![],
                genders,
                gender_markers: markers,
            }
        }
        Family::Mlc => OutputSchema {
            family: Family::Mlc,
            verbs: vec![],
            objects: (0..config.n_verbs).map(|o| format!("obj{o:03}")).collect(),
            genders,
            gender_markers: GenderMarkers::new(),
        },
    }
}

/// None when the configured ratio is exactly even.
fn majority_gender(schema: &OutputSchema, bias: f64) -> Option<&str> {
    if bias > 0.5 {
        Some(&schema.genders[0])
    } else if bias < 0.5 {
        Some(&schema.genders[1])
    } else {
        None
    }
}

struct NoiseSource {
    normal: Option<Normal<f64>>,
}

impl NoiseSource {
    fn new(sigma: f64) -> Self {
        let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("validated sigma"));
        NoiseSource { normal }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.normal {
            Some(normal) => normal.sample(rng),
            None => 0.0,
        }
    }
}

fn generate_instance(
    config: &SynthConfig,
    schema: &OutputSchema,
    split: &str,
    index: usize,
) -> (ScoreTable, Assignment) {
    let instance_id = format!("{split}_{index:05}");
    let mut label_rng = substream(config.seed, &[split, &instance_id, "label"]);
    let mut score_rng = substream(config.seed, &[split, &instance_id, "scores"]);
    let noise = NoiseSource::new(config.noise_sigma);

    let mut table = ScoreTable {
        instance_id: instance_id.clone(),
        verb_scores: BTreeMap::new(),
        role_scores: BTreeMap::new(),
        gender_scores: BTreeMap::new(),
        object_scores: BTreeMap::new(),
    };

    match config.family {
        Family::Vsrl => {
            let gold_verb = label_rng.gen_range(0..config.n_verbs);
            let bias = config.bias_of(gold_verb);
            let gold_gender = if label_rng.gen::<f64>() < bias {
                schema.genders[0].clone()
            } else {
                schema.genders[1].clone()
            };
            let mut fills = BTreeMap::new();
            for (ri, role) in schema.verbs[gold_verb].roles.iter().enumerate() {
                let noun = if ri == 0 {
                    gold_gender.clone()
                } else {
                    role.nouns[label_rng.gen_range(0..role.nouns.len())].clone()
                };
                fills.insert(role.name.clone(), noun);
            }

            for (vi, verb) in schema.verbs.iter().enumerate() {
                let base = if vi == gold_verb { 1.0 } else { 0.0 };
                table
                    .verb_scores
                    .insert(verb.name.clone(), base + noise.draw(&mut score_rng));
                let majority = majority_gender(schema, config.bias_of(vi));
                for (ri, role) in verb.roles.iter().enumerate() {
                    for noun in &role.nouns {
                        let mut score = if vi == gold_verb && fills.get(&role.name) == Some(noun) {
                            1.0
                        } else {
                            0.0
                        };
                        if ri == 0 && Some(noun.as_str()) == majority {
                            score += config.amplification;
                        }
                        table
                            .role_scores
                            .entry(verb.name.clone())
                            .or_default()
                            .entry(role.name.clone())
                            .or_default()
                            .insert(noun.clone(), score + noise.draw(&mut score_rng));
                    }
                }
            }

            let mut gold =
                Assignment::vsrl(&instance_id, &schema.verbs[gold_verb].name, fills, 0.0);
            gold.score = assignment_score(schema, &table, &gold).expect("gold is feasible");
            (table, gold)
        }
        Family::Mlc => {
            let primary = label_rng.gen_range(0..schema.objects.len());
            let bias = config.bias_of(primary);
            let gold_gender = if label_rng.gen::<f64>() < bias {
                schema.genders[0].clone()
            } else {
                schema.genders[1].clone()
            };
            let majority = majority_gender(schema, bias);

            for gender in &schema.genders {
                let mut base = if *gender == gold_gender { 1.0 } else { 0.0 };
                if Some(gender.as_str()) == majority {
                    base += config.amplification;
                }
                table
                    .gender_scores
                    .insert(gender.clone(), base + noise.draw(&mut score_rng));
                for (oi, object) in schema.objects.iter().enumerate() {
                    let base = if oi == primary { 1.0 } else { -1.0 };
                    table
                        .object_scores
                        .entry(gender.clone())
                        .or_default()
                        .insert(object.clone(), base + noise.draw(&mut score_rng));
                }
            }

            let objects = BTreeSet::from([schema.objects[primary].clone()]);
            let mut gold = Assignment::mlc(&instance_id, &gold_gender, objects, 0.0);
            gold.score = assignment_score(schema, &table, &gold).expect("gold is feasible");
            (table, gold)
        }
    }
}

fn generate_split(config: &SynthConfig, schema: &OutputSchema, split: &str) -> Corpus {
    let mut instances = Vec::with_capacity(config.n_instances);
    let mut gold = Vec::with_capacity(config.n_instances);
    for index in 0..config.n_instances {
        let (table, label) = generate_instance(config, schema, split, index);
        instances.push(table);
        gold.push(label);
    }
    Corpus {
        schema: schema.clone(),
        instances,
        gold: Some(gold),
    }
}

/// Generate a (train, eval) pair of corpora with gold labels and score tables
/// over the same schema, identically distributed.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, Corpus), SynthError> {
    config.validate()?;
    let schema = build_schema(config);
    let train = generate_split(config, &schema, "train");
    let eval = generate_split(config, &schema, "eval");
    Ok((train, eval))
}
