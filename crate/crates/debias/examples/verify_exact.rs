//! Check the solver against the brute-force oracle on a corpus small enough
//! to enumerate: weak duality and the convergence certificate in action.
//!
//! ```bash
//! cargo run --example verify_exact
//! ```

use std::collections::BTreeMap;

use debias::constraints::build_margin_constraints;
use debias::metrics::BiasTable;
use debias::oracle::{solve_exact, unconstrained_max, ExactOutcome, OracleBudget};
use debias::schema::{Corpus, Family, GenderMarkers, OutputSchema, RoleSpec, ScoreTable, VerbSpec};
use debias::solver::{calibrate, dual_objective, SolverConfig};

fn main() {
    // one verb, four instances, all preferring a man agent by distinct gaps
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
                .map(|g| {
                    (
                        g.clone(),
                        std::collections::BTreeSet::from([("agent".to_owned(), g.clone())]),
                    )
                })
                .collect(),
        )]),
    };
    let instances: Vec<ScoreTable> = [0.1, 0.2, 0.3, 0.4]
        .iter()
        .enumerate()
        .map(|(i, gap)| ScoreTable {
            instance_id: format!("i{i}"),
            verb_scores: BTreeMap::from([("cooking".to_owned(), 0.0)]),
            role_scores: BTreeMap::from([(
                "cooking".to_owned(),
                BTreeMap::from([(
                    "agent".to_owned(),
                    BTreeMap::from([("man".to_owned(), 1.0 + gap), ("woman".to_owned(), 1.0)]),
                )]),
            )]),
            gender_scores: BTreeMap::new(),
            object_scores: BTreeMap::new(),
        })
        .collect();
    let corpus = Corpus {
        schema,
        instances,
        gold: None,
    };

    // demand an exactly even gender split
    let train_bias = BiasTable {
        outputs: vec!["cooking".into()],
        genders,
        bias: BTreeMap::from([(
            "cooking".to_owned(),
            BTreeMap::from([("man".to_owned(), 0.5), ("woman".to_owned(), 0.5)]),
        )]),
        support: BTreeMap::new(),
    };
    let set = build_margin_constraints(&corpus.schema, &train_bias, 0.0, None).unwrap();

    let budget = OracleBudget::default();
    let free = unconstrained_max(&corpus, &budget).unwrap();
    let ExactOutcome::Optimal { objective, .. } = solve_exact(&corpus, &set, &budget).unwrap()
    else {
        panic!("an even split is attainable with four instances");
    };
    println!("unconstrained optimum: {free:.3}");
    println!("constrained optimum:   {objective:.3}");

    let config = SolverConfig {
        eta: 0.02,
        margin: 0.0,
        ..SolverConfig::default()
    };
    let result = calibrate(&corpus, &set, &config).unwrap();
    let achieved: f64 = result.assignments.iter().map(|a| a.score).sum();
    println!(
        "solver:                {achieved:.3} ({:?} at iteration {})",
        result.dual.status, result.dual.iteration
    );
    println!(
        "gap to oracle:         {:.2e}",
        (achieved - objective).abs()
    );

    // weak duality: every multiplier vector upper-bounds the optimum
    for lambda in [0.0, 0.1, 0.5, 2.0] {
        let dual = dual_objective(&corpus, &set, &vec![lambda; set.constraints.len()]).unwrap();
        println!("dual at lambda={lambda:<4}  {dual:.3} (>= {objective:.3})");
    }
}
