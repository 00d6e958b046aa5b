//! The full calibration loop on a synthetic biased corpus: build constraints
//! from training statistics, run the dual ascent, compare before and after.
//!
//! ```bash
//! cargo run --release --example calibrate_corpus
//! ```

use debias::constraints::build_margin_constraints;
use debias::decode::{decode_corpus, PenaltyView};
use debias::metrics::{
    count_cooccurrences, count_margin_violations, mean_bias_amplification, top1_role_accuracy,
    BiasTable,
};
use debias::schema::Assignment;
use debias::solver::{calibrate, SolverConfig};
use debias::synth::{generate, SynthConfig};
use debias::Family;

fn main() {
    let n_verbs = 10;
    let config = SynthConfig {
        seed: 42,
        n_instances: 1000,
        n_verbs,
        roles_per_verb: 2,
        nouns_per_role: 4,
        train_bias: (0..n_verbs)
            .map(|i| 0.6 + 0.3 * i as f64 / (n_verbs - 1) as f64)
            .collect(),
        amplification: 1.0,
        noise_sigma: 0.5,
        family: Family::Vsrl,
    };
    let (train, eval) = generate(&config).unwrap();
    let train_bias = BiasTable::from_counts(&count_cooccurrences(
        train.gold.as_ref().unwrap(),
        &train.schema,
    ));

    let margin = 0.05;
    let set = build_margin_constraints(&eval.schema, &train_bias, margin, None).unwrap();
    let solver_config = SolverConfig {
        margin,
        ..SolverConfig::default()
    };

    let before = decode_corpus(&eval, &PenaltyView::none()).unwrap();
    let result = calibrate(&eval, &set, &solver_config).unwrap();

    let report = |label: &str, assignments: &[Assignment]| {
        let pred = BiasTable::from_counts(&count_cooccurrences(assignments, &eval.schema));
        let amp = mean_bias_amplification(&train_bias, &pred).unwrap();
        let violations = count_margin_violations(&train_bias, &pred, margin)
            .unwrap()
            .len();
        let accuracy =
            top1_role_accuracy(assignments, eval.gold.as_ref().unwrap()).unwrap() * 100.0;
        println!("{label:<14} violations {violations:>2}   amplification {amp:.4}   accuracy {accuracy:.2}%");
    };
    println!(
        "corpus: {} instances, {} constraint rows, margin {margin}",
        eval.instances.len(),
        set.constraints.len()
    );
    report("unconstrained", &before);
    report("calibrated", &result.assignments);
    println!(
        "solver: {:?} after {} iterations, {} residual violations",
        result.dual.status,
        result.dual.iteration,
        result.residual.len()
    );
    let last = result.dual.trace.last().unwrap();
    println!(
        "final dual objective {:.3}, max slack {:.4}",
        last.dual_objective, last.max_slack
    );
}
