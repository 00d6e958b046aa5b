//! Measure bias and bias amplification from co-occurrence counts.
//!
//! ```bash
//! cargo run --example audit_bias
//! ```

use std::collections::{BTreeMap, BTreeSet};

use debias::metrics::{
    bias_score, count_cooccurrences, count_margin_violations, mean_bias_amplification, BiasTable,
};
use debias::schema::{Assignment, Family, GenderMarkers, OutputSchema, RoleSpec, VerbSpec};

fn main() {
    // one activity, one agent role, binary genders
    let genders = vec!["man".to_owned(), "woman".to_owned()];
    let schema = OutputSchema {
        family: Family::Vsrl,
        verbs: vec![VerbSpec {
            name: "cooking".into(),
            roles: vec![RoleSpec {
                name: "agent".into(),
                nouns: genders.clone(),
            }],
        }],
        objects: vec![],
        genders: genders.clone(),
        gender_markers: GenderMarkers::from([(
            "cooking".to_owned(),
            genders
                .iter()
                .map(|g| (g.clone(), BTreeSet::from([("agent".to_owned(), g.clone())])))
                .collect::<BTreeMap<_, _>>(),
        )]),
    };

    let agents = |man: usize, woman: usize, tag: &str| -> Vec<Assignment> {
        (0..man + woman)
            .map(|i| {
                let agent = if i < man { "man" } else { "woman" };
                Assignment::vsrl(
                    format!("{tag}{i:03}"),
                    "cooking",
                    BTreeMap::from([("agent".to_owned(), agent.to_owned())]),
                    0.0,
                )
            })
            .collect()
    };

    // 33% of training agents are men; a model predicts only 16%
    let train_counts = count_cooccurrences(&agents(33, 67, "train"), &schema);
    let pred_counts = count_cooccurrences(&agents(16, 84, "pred"), &schema);

    let b_train = bias_score(&train_counts, "cooking", "man")
        .unwrap()
        .unwrap();
    let b_pred = bias_score(&pred_counts, "cooking", "man").unwrap().unwrap();
    println!("bias toward man:   training {b_train:.2}, predicted {b_pred:.2}");

    let train = BiasTable::from_counts(&train_counts);
    let pred = BiasTable::from_counts(&pred_counts);
    let amp = mean_bias_amplification(&train, &pred).unwrap();
    println!("mean bias amplification: {amp:.2}");

    let violations = count_margin_violations(&train, &pred, 0.05).unwrap();
    println!("outputs beyond the 0.05 margin: {violations:?}");
}
