//! Measure gender-bias amplification in structured prediction outputs and
//! calibrate those outputs with corpus-level constraints.
//!
//! Structured predictors trained on gender-biased corpora tend to amplify the
//! bias: an output co-occurring with one gender 66% of the time in training
//! may co-occur 84% of the time in predictions. This crate quantifies that
//! effect and removes it at inference time, without retraining: gender-ratio
//! band constraints over the whole prediction set are relaxed into per-
//! indicator score penalties, and projected subgradient ascent on the
//! multipliers alternates with exact per-instance decoding until the bands
//! hold.
//!
//! The pieces, bottom to top:
//!
//! - [`schema`]: output spaces, score tables, assignments, validation, and
//!   exhaustive enumeration of small spaces.
//! - [`metrics`]: bias scores, mean bias amplification, margin violations,
//!   and the recognition metrics reported next to them.
//! - [`constraints`]: ratio bands compiled to linear rows over indicators.
//! - [`decode`]: exact penalized MAP decoding per instance.
//! - [`solver`]: the dual ascent loop.
//! - [`oracle`]: a brute-force constrained optimizer for verification.
//! - [`synth`]: deterministic synthetic biased corpora.
//! - [`cli`]: the `debias` command-line surface over corpus JSON files.
//!
//! ```
//! use debias::constraints::build_margin_constraints;
//! use debias::metrics::{count_cooccurrences, mean_bias_amplification, BiasTable};
//! use debias::solver::{calibrate, SolverConfig};
//! use debias::synth::{generate, SynthConfig};
//! use debias::schema::Family;
//!
//! let config = SynthConfig {
//!     seed: 7,
//!     n_instances: 200,
//!     n_verbs: 4,
//!     roles_per_verb: 2,
//!     nouns_per_role: 3,
//!     train_bias: vec![0.8],
//!     amplification: 1.0,
//!     noise_sigma: 0.5,
//!     family: Family::Vsrl,
//! };
//! let (train, eval) = generate(&config).unwrap();
//! let bias = BiasTable::from_counts(&count_cooccurrences(
//!     train.gold.as_ref().unwrap(),
//!     &train.schema,
//! ));
//! let set = build_margin_constraints(&eval.schema, &bias, 0.05, None).unwrap();
//! let result = calibrate(&eval, &set, &SolverConfig::default()).unwrap();
//! let calibrated = BiasTable::from_counts(&count_cooccurrences(
//!     &result.assignments,
//!     &eval.schema,
//! ));
//! let amp = mean_bias_amplification(&bias, &calibrated).unwrap();
//! assert!(amp < 0.1);
//! ```

pub mod cli;
pub mod constraints;
pub mod decode;
pub mod metrics;
pub mod oracle;
pub mod schema;
pub mod solver;
pub mod synth;

pub use constraints::{ConstraintSet, LinearConstraint};
pub use decode::PenaltyView;
pub use metrics::BiasTable;
pub use schema::{Assignment, Corpus, Family, IndicatorKey, OutputSchema, ScoreTable};
pub use solver::{CalibrationResult, DualState, SolverConfig, SolverStatus};
