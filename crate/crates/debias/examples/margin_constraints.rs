//! Compile gender-ratio bands into linear constraint rows and evaluate their
//! slack against predictions.
//!
//! ```bash
//! cargo run --example margin_constraints
//! ```

use std::collections::BTreeMap;

use debias::constraints::{build_margin_constraints, constraint_slack, ratio_of};
use debias::metrics::{count_cooccurrences, BiasTable};
use debias::schema::Assignment;
use debias::synth::{generate, SynthConfig};
use debias::Family;

fn main() {
    let config = SynthConfig {
        seed: 11,
        n_instances: 300,
        n_verbs: 3,
        roles_per_verb: 2,
        nouns_per_role: 3,
        train_bias: vec![0.33, 0.5, 0.9],
        amplification: 1.0,
        noise_sigma: 0.5,
        family: Family::Vsrl,
    };
    let (train, _eval) = generate(&config).unwrap();
    let train_bias = BiasTable::from_counts(&count_cooccurrences(
        train.gold.as_ref().unwrap(),
        &train.schema,
    ));

    let set = build_margin_constraints(&train.schema, &train_bias, 0.05, None).unwrap();
    println!(
        "{} constraint rows from {} verbs:",
        set.constraints.len(),
        config.n_verbs
    );
    for constraint in &set.constraints {
        let coeffs: Vec<String> = constraint
            .coeffs
            .iter()
            .map(|(key, value)| format!("{value:+.4} on {key}"))
            .collect();
        println!(
            "  {}: {} <= {}",
            constraint.id,
            coeffs.join(", "),
            constraint.bound
        );
    }

    // an all-man prediction slate for the first verb violates its upper row
    let verb = &train.schema.verbs[0].name;
    let all_men: Vec<Assignment> = (0..10)
        .map(|i| {
            Assignment::vsrl(
                format!("p{i}"),
                verb,
                BTreeMap::from([
                    ("agent".to_owned(), "man".to_owned()),
                    ("role1".to_owned(), "r1n0".to_owned()),
                ]),
                0.0,
            )
        })
        .collect();
    println!(
        "\npredictions: 10 x {verb} with man agents (ratio {:?})",
        ratio_of(&train.schema, verb, &all_men)
    );
    for constraint in &set.constraints {
        let slack = constraint_slack(constraint, &all_men);
        let status = if slack > 0.0 { "violated" } else { "satisfied" };
        println!("  {}: slack {slack:+.4} ({status})", constraint.id);
    }
}
