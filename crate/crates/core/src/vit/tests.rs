use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Tensor;
use crate::data_io::{LabelVocab, Task};

fn tiny() -> VitConfig {
    VitConfig {
        seq_len: 40,
        patch_size: 10,
        hidden_dim: 8,
        n_layers: 2,
        n_heads: 2,
        mlp_dim: 16,
        n_classes: 3,
        ..VitConfig::default()
    }
}

fn windows(cfg: &VitConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..cfg.seq_len).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}

fn refs(w: &[Vec<f64>]) -> Vec<&[f64]> {
    w.iter().map(Vec::as_slice).collect()
}

fn assert_rows_stochastic(t: &Tensor, tol: f64) {
    let n = *t.shape().last().unwrap();
    for row in t.data().chunks(n) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < tol);
    }
}

#[test]
fn identity_projection_copies_patches() {
    let cfg = VitConfig {
        patch_size: 8,
        hidden_dim: 8,
        ..tiny()
    };
    let mut p = init_params(&cfg, 0).unwrap();
    p.embed = Tensor::eye(8);
    p.pos_embed = Tensor::zeros(&[cfg.n_tokens(), 8]);
    let w = &windows(&cfg, 1, 1)[0];
    let z = embed_patches(w, &p, &cfg).unwrap();
    assert_eq!(z.shape(), &[6, 8]);
    assert!(z.data()[..8].iter().all(|&v| v == 0.0));
    assert_eq!(&z.data()[8..], w.as_slice());
}

#[test]
fn patch_edit_is_local_before_positions() {
    let cfg = VitConfig {
        seq_len: 100,
        ..tiny()
    };
    let mut p = init_params(&cfg, 2).unwrap();
    p.pos_embed = Tensor::zeros(&[cfg.n_tokens(), cfg.hidden_dim]);
    let a = windows(&cfg, 1, 3).remove(0);
    let mut b = a.clone();
    for v in &mut b[70..80] {
        *v += 0.5;
    }
    let (za, zb) = (embed_patches(&a, &p, &cfg).unwrap(), embed_patches(&b, &p, &cfg).unwrap());
    let d = cfg.hidden_dim;
    for row in 0..cfg.n_tokens() {
        let same = za.data()[row * d..(row + 1) * d] == zb.data()[row * d..(row + 1) * d];
        assert_eq!(same, row != 8, "row {row}");
    }
}

#[test]
fn embed_rejects_wrong_length() {
    let p = init_params(&tiny(), 0).unwrap();
    assert!(embed_patches(&[0.0; 39], &p, &tiny()).is_err());
}

#[test]
fn attention_rows_sum_to_one() {
    let cfg = tiny();
    let p = init_params(&cfg, 4).unwrap();
    let z = Tensor::from_fn(&[cfg.n_tokens(), cfg.hidden_dim], |i| (i as f64 * 0.37).sin());
    let (out, a) = mhsa(&z, &p.layers[0], &cfg).unwrap();
    assert_eq!(out.shape(), z.shape());
    assert_eq!(a.shape(), &[2, 5, 5]);
    assert_rows_stochastic(&a, 1e-9);
}

#[test]
fn zero_query_key_gives_uniform_attention() {
    let cfg = tiny();
    let mut p = init_params(&cfg, 5).unwrap();
    p.layers[0].w_q = Tensor::zeros(p.layers[0].w_q.shape());
    p.layers[0].w_k = Tensor::zeros(p.layers[0].w_k.shape());
    let z = Tensor::from_fn(&[cfg.n_tokens(), cfg.hidden_dim], |i| i as f64);
    let (_, a) = mhsa(&z, &p.layers[0], &cfg).unwrap();
    for &v in a.data() {
        assert!((v - 1.0 / 5.0).abs() < 1e-15);
    }
}

fn permute_rows(z: &Tensor, perm: &[usize]) -> Tensor {
    let d = z.shape()[1];
    let mut out = z.clone();
    for (dst, &src) in perm.iter().enumerate() {
        out.data_mut()[dst * d..(dst + 1) * d].copy_from_slice(&z.data()[src * d..(src + 1) * d]);
    }
    out
}

#[test]
fn mhsa_is_permutation_equivariant() {
    let cfg = tiny();
    let p = init_params(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z = Tensor::from_fn(&[cfg.n_tokens(), cfg.hidden_dim], |_| rng.gen_range(-1.0..1.0));
    let perm = [0, 3, 1, 4, 2];
    let (out, _) = mhsa(&z, &p.layers[0], &cfg).unwrap();
    let (out_p, _) = mhsa(&permute_rows(&z, &perm), &p.layers[0], &cfg).unwrap();
    for (a, b) in permute_rows(&out, &perm).data().iter().zip(out_p.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn ln(z: &Tensor, eps: f64) -> Tensor {
    let d = z.shape()[1];
    let mut out = z.clone();
    for row in out.data_mut().chunks_mut(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        for v in row.iter_mut() {
            *v = (*v - mean) / (var + eps).sqrt();
        }
    }
    out
}

#[test]
fn zero_branches_reduce_to_double_layer_norm() {
    let cfg = tiny();
    let mut p = init_params(&cfg, 8).unwrap();
    let l = &mut p.layers[0];
    l.w_o = Tensor::zeros(l.w_o.shape());
    l.w2 = Tensor::zeros(l.w2.shape());
    let z = Tensor::from_fn(&[cfg.n_tokens(), cfg.hidden_dim], |i| (i as f64).cos() * 3.0);
    let out = encoder_layer(&z, &p.layers[0], &cfg, None).unwrap();
    let expect = ln(&ln(&z, cfg.ln_eps), cfg.ln_eps);
    for (a, b) in out.data().iter().zip(expect.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn full_survival_training_matches_inference() {
    let cfg = VitConfig {
        survival_prob: 1.0,
        ..tiny()
    };
    let p = init_params(&cfg, 9).unwrap();
    let w = windows(&cfg, 3, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = forward(&p, &cfg, &refs(&w), None, true).unwrap();
    let b = forward(&p, &cfg, &refs(&w), Some(&mut rng), true).unwrap();
    let c = forward(&p, &cfg, &refs(&w), None, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn stochastic_depth_changes_training_output() {
    let cfg = VitConfig {
        survival_prob: 0.5,
        ..tiny()
    };
    let p = init_params(&cfg, 11).unwrap();
    let w = windows(&cfg, 4, 12);
    let inference = forward(&p, &cfg, &refs(&w), None, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = forward(&p, &cfg, &refs(&w), Some(&mut rng), false).unwrap();
    assert_ne!(inference.logits, train.logits);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let again = forward(&p, &cfg, &refs(&w), Some(&mut rng), false).unwrap();
    assert_eq!(train, again);
}

#[test]
fn zero_head_gives_uniform_probabilities() {
    let cfg = VitConfig {
        n_classes: 2,
        ..tiny()
    };
    let mut p = init_params(&cfg, 13).unwrap();
    p.head_w = Tensor::zeros(p.head_w.shape());
    let w = windows(&cfg, 4, 14);
    let out = forward(&p, &cfg, &refs(&w), None, false).unwrap();
    assert!(out.probs.data().iter().all(|&v| v == 0.5));
    assert!(out.attention.is_empty());
}

#[test]
fn class_logits_ignore_patch_order_without_positions() {
    let cfg = tiny();
    let mut p = init_params(&cfg, 15).unwrap();
    p.pos_embed = Tensor::zeros(p.pos_embed.shape());
    let w = windows(&cfg, 1, 16).remove(0);
    let mut shuffled = Vec::new();
    for patch in [2, 0, 3, 1] {
        shuffled.extend_from_slice(&w[patch * 10..(patch + 1) * 10]);
    }
    let a = forward(&p, &cfg, &[&w], None, false).unwrap();
    let b = forward(&p, &cfg, &[&shuffled], None, false).unwrap();
    for (x, y) in a.logits.data().iter().zip(b.logits.data()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn default_geometry_shapes() {
    let cfg = VitConfig::default();
    let p = init_params(&cfg, 17).unwrap();
    let w: Vec<Vec<f64>> = (0..2)
        .map(|k| (0..2000).map(|i| ((i + k) as f64 * 0.01).sin() * 0.5 + 0.5).collect())
        .collect();
    assert_eq!(embed_patches(&w[0], &p, &cfg).unwrap().shape(), &[101, 256]);
    let out = forward(&p, &cfg, &refs(&w), None, true).unwrap();
    assert_eq!(out.logits.shape(), &[2, 2]);
    assert_eq!(out.final_class_token.shape(), &[2, 256]);
    assert_eq!(out.attention.len(), 6);
    for a in &out.attention {
        assert_eq!(a.shape(), &[2, 6, 101, 101]);
        assert_rows_stochastic(a, 1e-6);
    }
    assert_rows_stochastic(&out.probs, 1e-6);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = tiny();
    let p = init_params(&cfg, 18).unwrap();
    let vocab = LabelVocab {
        task: Task::AgeGroup,
        classes: vec!["a".into(), "b".into(), "c".into()],
    };
    let ck = Checkpoint::new(cfg.clone(), vocab, p).unwrap();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    let w = windows(&cfg, 2, 19);
    let a = forward(&ck.params, &cfg, &refs(&w), None, true).unwrap();
    let b = forward(&back.params, &back.config, &refs(&w), None, true).unwrap();
    assert_eq!(a, b);
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn checkpoint_rejects_vocab_size_mismatch() {
    let cfg = tiny();
    let p = init_params(&cfg, 20).unwrap();
    let vocab = LabelVocab {
        task: Task::Gender,
        classes: vec!["male".into(), "female".into()],
    };
    assert!(Checkpoint::new(cfg, vocab, p).is_err());
}
