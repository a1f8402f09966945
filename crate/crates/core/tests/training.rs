mod common;

use cnre_core::loss::{self, assemble_contrastive_batch, nrec_zero_logit_loss, LossConfig, Regime};
use cnre_core::nn::{ArchPreset, Architecture, Mode, RatioNet, Standardizer};
use cnre_core::posterior::NetRatio;
use cnre_core::rng;
use cnre_core::tasks::{sample_joint, task_by_name};
use cnre_core::train::{train, validate_mi0, Checkpoint, TrainConfig};

fn zero_net(input_dim: usize) -> RatioNet {
    let mut net = RatioNet::new(Architecture::new(input_dim, 8, 1), &mut rng::stream(1, 0)).unwrap();
    net.zero_output_layer();
    net.set_mode(Mode::Eval);
    net
}

#[test]
fn zero_network_scores_zero_mi_while_its_loss_depends_on_gamma_and_k() {
    let task = task_by_name("conjugate_gaussian").unwrap();
    let mut r = rng::stream(5, 0);
    let val = sample_joint(task.as_ref(), 64, &mut r);
    let std = Standardizer::fit(&val.theta, &val.x).unwrap();
    let mut net = zero_net(2);
    let neg_mi0 = validate_mi0(&NetRatio::new(&net, &std), task.as_ref(), &val, 16, &mut r).unwrap();
    assert_eq!(neg_mi0, 0.0);
    let mut losses = Vec::new();
    for (gamma, k) in [(1.0, 1), (1.0, 2), (4.0, 3), (0.25, 8)] {
        let cfg = LossConfig::nrec(gamma, k).unwrap();
        let (ind, dep) = assemble_contrastive_batch(&val, Regime::Bootstrap, k, None, &mut r).unwrap();
        let l = loss::loss(&mut net, &cfg, &ind, &dep).unwrap();
        assert!((l - nrec_zero_logit_loss(gamma, k)).abs() < 1e-12, "gamma {gamma} K {k}: {l}");
        losses.push(l);
    }
    assert!(losses.windows(2).all(|w| (w[0] - w[1]).abs() > 0.05));
}

#[test]
fn short_training_beats_the_constant_classifier() {
    let mut c = TrainConfig::new(
        "conjugate_gaussian",
        Regime::FreshJoint,
        LossConfig::nrec(1.0, 1).unwrap(),
        ArchPreset::Small,
    );
    c.batch_size = 256;
    c.max_epochs = 50;
    c.mi_every = 10;
    c.seed = 2;
    let o = train(&c).unwrap();
    assert_eq!(o.report.epochs.len(), 50);
    assert!(o.report.best_val_loss.unwrap() < 2f64.ln() - 0.05);
    // -I0 never beats the true mutual information
    let mi = 0.5 * 2f64.ln();
    for e in &o.report.epochs {
        if let Some(v) = e.neg_mi0 {
            assert!(v > -mi - 0.1, "epoch {}: {v}", e.epoch);
        }
    }
}

#[test]
fn checkpoint_reload_reproduces_eval_outputs_bitwise() {
    let mut c = TrainConfig::new("two_moons", Regime::Bootstrap, LossConfig::nrec(2.0, 3).unwrap(), ArchPreset::Small);
    c.batch_size = 32;
    c.batches_per_epoch = 5;
    c.val_batches = 1;
    c.simulation_budget = 6 * 32;
    c.max_epochs = 4;
    c.mi_samples = 4;
    let o = train(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("checkpoint.json");
    o.best.save(&p).unwrap();
    let back = Checkpoint::load(&p).unwrap();
    assert_eq!(back, o.best);
    let a = o.best.network().unwrap();
    let b = back.network().unwrap();
    let input = common::normal_matrix(50, 4, &mut rng::stream(0, 9));
    let ha = a.forward_eval(&input).unwrap();
    let hb = b.forward_eval(&input).unwrap();
    assert!(ha.iter().zip(&hb).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(back.rng.restore().unwrap(), o.best.rng.restore().unwrap());
}

#[test]
fn config_toml_round_trip() {
    let mut c = TrainConfig::new("slcp", Regime::FreshPrior, LossConfig::nreb(7).unwrap(), ArchPreset::Large);
    c.patience = Some(12);
    c.lr = 3.3e-4;
    let back = TrainConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn insufficient_budget_is_a_config_error() {
    let mut c = TrainConfig::new("two_moons", Regime::Bootstrap, LossConfig::nrea(), ArchPreset::Small);
    c.simulation_budget = 1000;
    assert!(matches!(train(&c), Err(cnre_core::Error::Config(_))));
}
