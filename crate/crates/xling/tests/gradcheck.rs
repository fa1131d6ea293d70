//! Finite-difference verification of the classifier gradients: every
//! analytic partial derivative is checked against central differences on a
//! tiny model across random parameter points.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xling::numerics::Matrix;
use xling::textclf::{loss_and_grads, CnnModel, Label};

fn random_point(seed: u64) -> (CnnModel, Vec<Matrix>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = CnnModel::new(4, 2, 0.5, seed);
    // Randomize biases too so their gradients are checked away from zero.
    for tensor in model.tensors_mut() {
        for v in tensor {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    let batch = vec![
        Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0)),
        // A two-row example exercises the width-3 and width-4 padding path.
        Matrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0)),
    ];
    let labels = vec![Label::Positive, Label::Negative];
    (model, batch, labels)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..20 {
        let (model, batch, labels) = random_point(point);
        let dropout_seed = 1000 + point;
        let (_, grads) = loss_and_grads(&model, &batch, &labels, dropout_seed).unwrap();
        let analytic: Vec<f64> = grads.tensors().concat();

        let n_tensors = model.tensors().len();
        let mut flat_index = 0usize;
        for t in 0..n_tensors {
            let len = model.tensors()[t].len();
            for i in 0..len {
                let mut plus = model.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = model.clone();
                minus.tensors_mut()[t][i] -= h;
                let (lp, _) = loss_and_grads(&plus, &batch, &labels, dropout_seed).unwrap();
                let (lm, _) = loss_and_grads(&minus, &batch, &labels, dropout_seed).unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                let a = analytic[flat_index];
                let rel = if a.abs() < 1e-10 && numeric.abs() < 1e-10 {
                    0.0
                } else {
                    (a - numeric).abs() / a.abs().max(numeric.abs())
                };
                assert!(
                    rel < 1e-4,
                    "point {point}, tensor {t}, index {i}: analytic {a} vs numeric {numeric} (rel {rel:.2e})"
                );
                worst = worst.max(rel);
                flat_index += 1;
            }
        }
    }
    println!("max relative gradient error over 20 points: {worst:.3e}");
}
