//! Trainer integration checks: gradients against finite differences,
//! training behavior, and experiment determinism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use widthnet::eval::Domain;
use widthnet::train::{
    fit, init_network, layer_dims, loss_and_gradients, phase_transition_probe, run_table1,
    ExperimentSpec, InitMode, TrainConfig,
};
use widthnet::{Activation, GridSamples, Network};

fn batch_mse(net: &Network, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
    let sum: f64 = inputs
        .iter()
        .zip(targets)
        .map(|(x, t)| {
            let d = net.forward_scalar(x).unwrap() - t;
            d * d
        })
        .sum();
    sum / inputs.len() as f64
}

/// Smallest |pre-activation| of any ReLU node over the batch, relative to
/// its layer's activation scale; small margins mean a finite-difference
/// step could cross a kink.
fn min_relu_margin(net: &Network, inputs: &[Vec<f64>]) -> f64 {
    let mut margin = f64::INFINITY;
    for x in inputs {
        let mut cur = x.clone();
        for layer in net.layers() {
            let mut next = vec![0.0; layer.out_dim()];
            let mut zs = Vec::with_capacity(layer.out_dim());
            for r in 0..layer.out_dim() {
                let mut z = layer.biases()[r];
                for (c, xv) in cur.iter().enumerate() {
                    z += layer.weight(r, c) * xv;
                }
                zs.push(z);
                next[r] = layer.activation().apply(z);
            }
            if layer.activation() == Activation::Relu {
                let scale = zs.iter().fold(0.0f64, |m, z| m.max(z.abs())).max(1e-12);
                for z in &zs {
                    margin = margin.min(z.abs() / scale);
                }
            }
            cur = next;
        }
    }
    margin
}

fn kink_free_batch(
    net: &Network,
    rng: &mut impl Rng,
    batch: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = net.input_dim();
    for _ in 0..500 {
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        if min_relu_margin(net, &inputs) > 1e-3 {
            let targets = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
            return (inputs, targets);
        }
    }
    panic!("no kink-free batch found");
}

/// Central-difference check of every weight and bias gradient.
fn assert_gradients_match(net: &Network, inputs: &[Vec<f64>], targets: &[f64], rel_tol: f64) {
    let (_, grads) = loss_and_gradients(net, inputs, targets).unwrap();
    let h = 1e-5;
    let mut probe = net.clone();
    for t in 0..net.depth() {
        let (out_dim, in_dim) = (net.layers()[t].out_dim(), net.layers()[t].in_dim());
        for r in 0..out_dim {
            for c in 0..in_dim {
                let orig = net.layers()[t].weight(r, c);
                probe.layer_mut(t).set_weight(r, c, orig + h);
                let plus = batch_mse(&probe, inputs, targets);
                probe.layer_mut(t).set_weight(r, c, orig - h);
                let minus = batch_mse(&probe, inputs, targets);
                probe.layer_mut(t).set_weight(r, c, orig);
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads.layers()[t].d_weights[r * in_dim + c];
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / scale <= rel_tol,
                    "layer {} w[{},{}]: analytic {} numeric {}",
                    t,
                    r,
                    c,
                    analytic,
                    numeric
                );
            }
            let orig = net.layers()[t].biases()[r];
            probe.layer_mut(t).set_bias(r, orig + h);
            let plus = batch_mse(&probe, inputs, targets);
            probe.layer_mut(t).set_bias(r, orig - h);
            let minus = batch_mse(&probe, inputs, targets);
            probe.layer_mut(t).set_bias(r, orig);
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.layers()[t].d_biases[r];
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic - numeric).abs() / scale <= rel_tol,
                "layer {} b[{}]: analytic {} numeric {}",
                t,
                r,
                analytic,
                numeric
            );
        }
    }
}

#[test]
fn gradients_match_central_differences_on_random_nets() {
    let shapes: [&[usize]; 3] = [&[1, 6, 6, 1], &[2, 10, 10, 10, 1], &[3, 16, 16, 1]];
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for dims in shapes {
        for _ in 0..2 {
            let net = init_network(dims, InitMode::HeNormal, &mut rng).unwrap();
            let (inputs, targets) = kink_free_batch(&net, &mut rng, 4);
            assert_gradients_match(&net, &inputs, &targets, 1e-5);
        }
    }
}

#[test]
fn fitting_relu_with_one_hidden_node_converges() {
    // The hypothesis class contains the target; with a sign-compatible init
    // the fit drives the error below 1e-4 within 100 epochs.
    let inputs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 100.0 - 1.0]).collect();
    let targets: Vec<f64> = inputs.iter().map(|x| x[0].max(0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = init_network(&layer_dims(1, 1, 2).unwrap(), InitMode::HeNormal, &mut rng).unwrap();
    let cfg = TrainConfig {
        epochs: 100,
        seed: 2,
        ..TrainConfig::default()
    };
    let outcome = fit(&net, &inputs, &targets, &inputs, &targets, &cfg).unwrap();
    assert!(outcome.best_mse < 1e-4, "best MSE {}", outcome.best_mse);
}

#[test]
fn fit_never_returns_worse_than_initial() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..5 {
        let net = init_network(&[1, 5, 5, 1], InitMode::HeNormal, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 / 32.0 - 1.0]).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| (3.0 * x[0]).sin()).collect();
        let initial = batch_mse(&net, &inputs, &targets);
        let cfg = TrainConfig {
            epochs: 5,
            seed: trial,
            ..TrainConfig::default()
        };
        let outcome = fit(&net, &inputs, &targets, &inputs, &targets, &cfg).unwrap();
        assert!(
            outcome.best_mse <= initial,
            "trial {}: best {} > initial {}",
            trial,
            outcome.best_mse,
            initial
        );
        let returned = batch_mse(&outcome.network, &inputs, &targets);
        assert!((returned - outcome.best_mse).abs() < 1e-12);
    }
}

fn tiny_spec() -> (ExperimentSpec, TrainConfig) {
    let spec = ExperimentSpec {
        n: 1,
        k: 2,
        trials: 2,
        grid_size: Some(400),
    };
    let config = TrainConfig {
        epochs: 3,
        seed: 77,
        ..TrainConfig::default()
    };
    (spec, config)
}

#[test]
fn run_table1_is_bitwise_deterministic() {
    let (spec, config) = tiny_spec();
    let a = run_table1(&spec, &config, 1).unwrap();
    let b = run_table1(&spec, &config, 1).unwrap();
    let bits = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.trial_mse), bits(&b.trial_mse));
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn run_table1_result_is_independent_of_worker_count() {
    let (spec, config) = tiny_spec();
    let sequential = run_table1(&spec, &config, 1).unwrap();
    let parallel = run_table1(&spec, &config, 2).unwrap();
    assert_eq!(sequential.to_csv(), parallel.to_csv());
}

#[test]
fn run_table1_reports_reference_shapes() {
    let (spec, _) = tiny_spec();
    let k3 = ExperimentSpec::new(1, 3, 1);
    assert_eq!(k3.target_width(), 18);
    assert_eq!(k3.target_depth(), 3);
    assert_eq!(k3.approx_width(), 16);
    assert_eq!(k3.approx_depth(), 5);
    assert_eq!(spec.target_width(), 8);
}

#[test]
fn probe_reports_one_row_per_width_plus_constructed() {
    let bump = |x: &[f64]| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        (1.0 - r / 0.8).max(0.0)
    };
    let domain = Domain::symmetric(2, 1.0).unwrap();
    let samples = GridSamples::from_fn(domain, 10, bump).unwrap();
    let config = TrainConfig {
        epochs: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let report =
        phase_transition_probe(&samples, 1.0, 0.8, &[1, 2, 6], 3, &config, 101).unwrap();
    let widths: Vec<usize> = report.rows.iter().map(|r| r.width).collect();
    assert_eq!(widths, vec![1, 2, 6]);
    assert_eq!(report.constructed_width, 6);
    assert_eq!(report.plan_epsilon, 0.8);
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + 3 + 2);
}

#[test]
fn probe_on_zero_function_reaches_zero_error() {
    let domain = Domain::symmetric(1, 1.0).unwrap();
    let samples = GridSamples::from_fn(domain, 32, |_| 0.0).unwrap();
    let config = TrainConfig {
        epochs: 400,
        batch_size: 8,
        seed: 3,
        ..TrainConfig::default()
    };
    let report = phase_transition_probe(&samples, 1.0, 0.5, &[1, 2, 3], 3, &config, 101).unwrap();
    assert_eq!(report.constructed_l1, 0.0);
    for row in &report.rows {
        assert!(
            row.best_mse <= 1e-3,
            "width {} stalled at {}",
            row.width,
            row.best_mse
        );
    }
}
