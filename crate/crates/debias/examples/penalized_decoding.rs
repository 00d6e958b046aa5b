//! Exact per-instance decoding, unconstrained and under multiplier penalties.
//!
//! ```bash
//! cargo run --example penalized_decoding
//! ```

use std::collections::BTreeMap;

use debias::constraints::{ConstraintSet, LinearConstraint};
use debias::decode::{decode_vsrl, PenaltyView};
use debias::metrics::BiasTable;
use debias::schema::{
    Family, GenderMarkers, IndicatorKey, OutputSchema, RoleSpec, ScoreTable, VerbSpec,
};

fn main() {
    let schema = OutputSchema {
        family: Family::Vsrl,
        verbs: vec![
            VerbSpec {
                name: "cooking".into(),
                roles: vec![RoleSpec {
                    name: "agent".into(),
                    nouns: vec!["man".into(), "woman".into()],
                }],
            },
            VerbSpec {
                name: "driving".into(),
                roles: vec![RoleSpec {
                    name: "agent".into(),
                    nouns: vec!["man".into(), "woman".into()],
                }],
            },
        ],
        objects: vec![],
        genders: vec!["man".into(), "woman".into()],
        gender_markers: GenderMarkers::new(),
    };

    let mut instance = ScoreTable {
        instance_id: "img_000".into(),
        verb_scores: BTreeMap::from([("cooking".to_owned(), 1.0), ("driving".to_owned(), 0.6)]),
        role_scores: BTreeMap::new(),
        gender_scores: BTreeMap::new(),
        object_scores: BTreeMap::new(),
    };
    instance.role_scores.insert(
        "cooking".into(),
        BTreeMap::from([(
            "agent".to_owned(),
            BTreeMap::from([("man".to_owned(), 0.5), ("woman".to_owned(), 0.3)]),
        )]),
    );
    instance.role_scores.insert(
        "driving".into(),
        BTreeMap::from([(
            "agent".to_owned(),
            BTreeMap::from([("man".to_owned(), 0.4), ("woman".to_owned(), 0.1)]),
        )]),
    );

    let unconstrained = decode_vsrl(&schema, &instance, &PenaltyView::none()).unwrap();
    println!("unconstrained: {unconstrained:?}");

    // one constraint row taxing the (cooking, agent, man) indicator
    let set = ConstraintSet {
        constraints: vec![LinearConstraint {
            id: "cooking:upper".into(),
            coeffs: BTreeMap::from([
                (
                    IndicatorKey::RoleNoun {
                        verb: "cooking".into(),
                        role: "agent".into(),
                        noun: "man".into(),
                    },
                    0.62,
                ),
                (
                    IndicatorKey::RoleNoun {
                        verb: "cooking".into(),
                        role: "agent".into(),
                        noun: "woman".into(),
                    },
                    -0.38,
                ),
            ]),
            bound: 0.0,
        }],
        margin: 0.05,
        source_bias: BiasTable {
            outputs: vec!["cooking".into()],
            genders: vec!["man".into(), "woman".into()],
            bias: BTreeMap::new(),
            support: BTreeMap::new(),
        },
    };

    for lambda in [0.2, 0.6] {
        let view = PenaltyView::new(&set, &[lambda]);
        let decoded = decode_vsrl(&schema, &instance, &view).unwrap();
        let penalized = decoded.score - view.penalty_of_assignment(&decoded);
        println!(
            "lambda {lambda:.1}: verb {:?}, raw score {:.3}, penalized {penalized:.3}",
            decoded.verb().unwrap(),
            decoded.score
        );
    }
}
