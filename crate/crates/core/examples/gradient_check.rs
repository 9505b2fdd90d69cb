//! Builds a small loss on the autodiff tape, runs the backward pass and
//! compares every gradient entry with a central finite difference.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use direc::loss::{bpr_loss, infonce, TrainingTriple};
use direc::tensor::{Matrix, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

/// BPR over two triples plus a weighted InfoNCE between the user table and a
/// projected copy of it.
fn objective(t: &mut Tape, users: Var, groups: Var, proj: Var) -> Var {
    let batch = [
        TrainingTriple { user: 0, pos_group: 1, neg_group: 2 },
        TrainingTriple { user: 2, pos_group: 0, neg_group: 3 },
    ];
    let bpr = bpr_loss(t, users, groups, &batch);
    let projected = t.matmul(users, proj);
    let activated = t.relu(projected);
    let ssl = infonce(t, users, activated, &[0, 1, 2], 0.5);
    let weighted = t.scale(ssl, 0.1);
    t.add(bpr, weighted)
}

fn value(inputs: &[Matrix]) -> f64 {
    let mut t = Tape::new();
    let v: Vec<Var> = inputs.iter().map(|m| t.leaf(m.clone())).collect();
    let out = objective(&mut t, v[0], v[1], v[2]);
    t.scalar(out)
}

fn main() -> direc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut random = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let inputs = vec![random(3, 4), random(4, 4), random(4, 4)];

    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| t.leaf(m.clone())).collect();
    let loss = objective(&mut t, vars[0], vars[1], vars[2]);
    t.backward(loss)?;
    println!("loss {:.6} over a tape of {} nodes", t.scalar(loss), t.len());

    for (name, (idx, &var)) in ["users", "groups", "proj"].iter().zip(vars.iter().enumerate()) {
        let analytic = t.grad(var).cloned().unwrap_or_else(|| Matrix::zeros(inputs[idx].rows(), inputs[idx].cols()));
        let mut worst: f64 = 0.0;
        for e in 0..inputs[idx].as_slice().len() {
            let mut plus = inputs.clone();
            plus[idx].as_mut_slice()[e] += STEP;
            let mut minus = inputs.clone();
            minus[idx].as_mut_slice()[e] -= STEP;
            let numeric = (value(&plus) - value(&minus)) / (2.0 * STEP);
            worst = worst.max((numeric - analytic.as_slice()[e]).abs());
        }
        println!("{name:<7} worst |analytic - numeric| = {worst:.2e}");
    }
    Ok(())
}
