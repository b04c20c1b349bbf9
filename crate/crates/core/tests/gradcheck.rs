//! Finite-difference checks of the hand-written backward passes.

mod common;

use ndarray::{Array2, Array3};
use rand::Rng;

use kdsense_core::models::{Model, ModelSpec};
use kdsense_core::nn::Parameters;

/// `sum(logits * probe)`, a scalar whose gradient wrt logits is `probe`.
fn objective(model: &mut Model, x: &Array3<f64>, probe: &Array2<f64>) -> f64 {
    (&model.forward_train(x).unwrap() * probe).sum()
}

fn perturb(model: &mut Model, flat: usize, delta: f64) {
    let mut i = 0;
    model.visit_params_mut(&mut |p| {
        if flat >= i && flat < i + p.len() {
            p.value[flat - i] += delta;
        }
        i += p.len();
    });
}

fn analytic(model: &Model) -> Vec<f64> {
    let mut g = Vec::new();
    model.visit_params(&mut |p| g.extend_from_slice(&p.grad));
    g
}

fn check_model(spec: ModelSpec, t: usize, seed: u64) {
    let mut r = common::rng(seed);
    let x = Array3::from_shape_fn((3, spec.in_channels, t), |_| r.random_range(-1.0..1.0));
    let probe = Array2::from_shape_fn((3, spec.n_classes), |_| r.random_range(-1.0..1.0));
    let mut model = Model::new(&spec, seed).unwrap();

    model.zero_grad();
    model.forward_train(&x).unwrap();
    let dx = model.backward(&probe);
    let g = analytic(&model);

    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let k = r.random_range(0..g.len());
        perturb(&mut model, k, h);
        let up = objective(&mut model, &x, &probe);
        perturb(&mut model, k, -2.0 * h);
        let dn = objective(&mut model, &x, &probe);
        perturb(&mut model, k, h);
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3));
    }
    assert!(worst < 1e-4, "{}: parameter gradient rel. error {worst:e}", spec.name());

    let mut worst_x = 0.0f64;
    for _ in 0..20 {
        let idx = (
            r.random_range(0..3),
            r.random_range(0..spec.in_channels),
            r.random_range(0..t),
        );
        let mut xp = x.clone();
        xp[idx] += h;
        let up = objective(&mut model, &xp, &probe);
        xp[idx] -= 2.0 * h;
        let dn = objective(&mut model, &xp, &probe);
        let fd = (up - dn) / (2.0 * h);
        worst_x = worst_x.max((fd - dx[idx]).abs() / fd.abs().max(dx[idx].abs()).max(1e-3));
    }
    assert!(worst_x < 1e-4, "{}: input gradient rel. error {worst_x:e}", spec.name());
}

#[test]
fn wrn_backward_matches_finite_differences() {
    check_model(ModelSpec::wrn(16, 1, 2, 3), 32, 1);
}

#[test]
fn deeper_wrn_backward_matches_finite_differences() {
    check_model(ModelSpec::wrn(22, 1, 1, 4), 24, 2);
}

#[test]
fn resnet_backward_matches_finite_differences() {
    check_model(ModelSpec::resnet18(4, 2, 3), 40, 3);
}
