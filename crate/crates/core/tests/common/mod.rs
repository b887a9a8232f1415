#![allow(dead_code)]

use ecgvit::autodiff::{Tape, Tensor, Var};
use ecgvit::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Elementwise relative error with a small absolute floor so that pairs of
/// near-zero derivatives do not blow up the ratio.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central finite differences of a scalar function of several tensors,
/// independent of the tape's backward rules.
pub fn numeric_grads(inputs: &[Tensor], f: &dyn Fn(&[Tensor]) -> f64, h: f64) -> Vec<Tensor> {
    let mut work = inputs.to_vec();
    inputs
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let mut g = Tensor::zeros(t.shape());
            for j in 0..t.numel() {
                let orig = work[ti].data()[j];
                work[ti].data_mut()[j] = orig + h;
                let up = f(&work);
                work[ti].data_mut()[j] = orig - h;
                let down = f(&work);
                work[ti].data_mut()[j] = orig;
                g.data_mut()[j] = (up - down) / (2.0 * h);
            }
            g
        })
        .collect()
}

/// Checks the tape gradient of `sum(build(inputs) ⊙ probe)` against finite
/// differences; returns the worst elementwise relative error.
pub fn gradcheck<F>(inputs: &[Tensor], seed: u64, build: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut probe_rng = rng(seed ^ 0xA5A5);
    let scalar_loss = |tape: &mut Tape, vars: &[Var], probe: &Tensor| -> Var {
        let out = build(tape, vars).expect("forward");
        let p = tape.constant(probe.clone());
        let prod = tape.mul(out, p).expect("probe shape");
        tape.sum(prod)
    };

    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &vars).expect("forward");
        random_tensor(&mut probe_rng, tape.shape(out))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = scalar_loss(&mut tape, &vars, &probe);
    let grads = tape.backward(loss).expect("backward");

    let f = |ts: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let loss = scalar_loss(&mut tape, &vars, &probe);
        tape.value(loss).item()
    };
    let numeric = numeric_grads(inputs, &f, 1e-5);

    let mut worst: f64 = 0.0;
    for (v, n) in vars.iter().zip(&numeric) {
        let a = grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(n.shape()));
        for (x, y) in a.data().iter().zip(n.data()) {
            worst = worst.max(rel_err(*x, *y));
        }
    }
    worst
}
