use hpmg_ppo::net::{Activation, DenseNet, LayerSpec, Mode};
use hpmg_ppo::policy::{actor_layers, critic_layers};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
/// Parameters probed per network; large layers are subsampled with a stride.
const PROBES: usize = 1500;

fn random_net(layers: Vec<LayerSpec>, seed: u64) -> DenseNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DenseNet::new(layers).unwrap();
    net.init(&mut rng);
    net
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `L = c . y` for a fixed upstream vector `c`. Train-mode passes replay
/// `masks` so the loss is a deterministic function of the parameters.
fn loss(net: &DenseNet, x: &[f64], c: &[f64], masks: Option<&[Vec<f64>]>) -> f64 {
    let cache = match masks {
        Some(m) => net.forward_masked(x, m).unwrap(),
        None => net.forward(x, Mode::Eval, None).unwrap(),
    };
    cache.output().iter().zip(c).map(|(y, c)| y * c).sum()
}

/// Relative error `|g - fd| / max(|g|, |fd|)` over a strided subset of the
/// parameters.
fn gradient_error(net: &mut DenseNet, x: &[f64], c: &[f64], masks: Option<&[Vec<f64>]>) -> f64 {
    let cache = match masks {
        Some(m) => net.forward_masked(x, m).unwrap(),
        None => net.forward(x, Mode::Eval, None).unwrap(),
    };
    let mut grad = vec![0.0; net.n_params()];
    net.backward(&cache, c, &mut grad).unwrap();
    let stride = (net.n_params() / PROBES).max(1);
    let (mut diff, mut g_norm, mut fd_norm) = (0.0, 0.0, 0.0);
    for i in (0..net.n_params()).step_by(stride) {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + H;
        let up = loss(net, x, c, masks);
        net.params_mut()[i] = orig - H;
        let down = loss(net, x, c, masks);
        net.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * H);
        diff += (grad[i] - fd).powi(2);
        g_norm += grad[i] * grad[i];
        fd_norm += fd * fd;
    }
    diff.sqrt() / g_norm.sqrt().max(fd_norm.sqrt()).max(1e-300)
}

#[test]
fn every_layer_shape_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shapes: Vec<LayerSpec> = actor_layers(4, 4).into_iter().chain(critic_layers(4)).collect();
    for (k, spec) in shapes.iter().enumerate() {
        let mut single = *spec;
        single.dropout = 0.0;
        let mut net = random_net(vec![single], 100 + k as u64);
        let x = random_vec(spec.inputs, &mut rng);
        let c = random_vec(spec.outputs, &mut rng);
        let err = gradient_error(&mut net, &x, &c, None);
        assert!(err <= TOL, "layer {}x{} {:?}: relative error {err:e}", spec.inputs, spec.outputs, spec.activation);
    }
}

#[test]
fn full_networks_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (name, layers) in [("actor", actor_layers(4, 4)), ("critic", critic_layers(4)), ("actor-burgers", actor_layers(3, 6))] {
        let mut net = random_net(layers, 7);
        let x = random_vec(net.input_dim(), &mut rng);
        let c = random_vec(net.output_dim(), &mut rng);
        let err = gradient_error(&mut net, &x, &c, None);
        assert!(err <= TOL, "{name} eval: relative error {err:e}");
        let mut drop = ChaCha8Rng::seed_from_u64(13);
        let masks = net.forward(&x, Mode::Train, Some(&mut drop)).unwrap().into_masks();
        let err = gradient_error(&mut net, &x, &c, Some(&masks));
        assert!(err <= TOL, "{name} with dropout: relative error {err:e}");
    }
}

#[test]
fn three_layer_random_net() {
    use Activation::*;
    let layers = vec![
        LayerSpec::new(5, 7, Tanh, 0.0),
        LayerSpec::new(7, 6, Relu, 0.0),
        LayerSpec::new(6, 3, Identity, 0.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut net = random_net(layers, 15);
    let x = random_vec(5, &mut rng);
    let c = random_vec(3, &mut rng);
    assert!(gradient_error(&mut net, &x, &c, None) <= TOL);
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let net = random_net(actor_layers(4, 4), 3);
    let cache = net.forward(&[0.1, 1.0, 0.5, 0.2], Mode::Eval, None).unwrap();
    let mut grad = vec![0.0; net.n_params()];
    net.backward(&cache, &[0.0; 4], &mut grad).unwrap();
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn eval_equals_expected_train_output() {
    let mut net = DenseNet::new(vec![
        LayerSpec::new(3, 5, Activation::Identity, 0.5),
        LayerSpec::new(5, 2, Activation::Identity, 0.0),
    ])
    .unwrap();
    let params: Vec<f64> = (0..net.n_params()).map(|i| 0.3 + 0.05 * (i % 7) as f64).collect();
    net.params_mut().copy_from_slice(&params);
    let x = [1.0, 2.0, 3.0];
    let eval = net.predict(&x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let passes = 100_000;
    let mut mean = [0.0; 2];
    for _ in 0..passes {
        let out = net.forward(&x, Mode::Train, Some(&mut rng)).unwrap();
        for (m, y) in mean.iter_mut().zip(out.output()) {
            *m += y / passes as f64;
        }
    }
    for (m, e) in mean.iter().zip(&eval) {
        assert!((m - e).abs() <= 0.01 * e.abs(), "train mean {m} vs eval {e}");
    }
}
