//! Train a tiny bundle end to end, then exercise checkpointing, generation
//! and the sweep on it.

use nara_core::ar::Sequence;
use nara_core::checkpoint::{from_text, to_text};
use nara_core::config::RunConfig;
use nara_core::engine::{generate_nara, generate_pure_ar, GenerationConfig};
use nara_core::prior::prior_l1;
use nara_core::sweep::{run_sweep, sweep_cases};
use nara_core::trainer::train;

const TINY: &str = "\
seed = 2
o = 16
M = 4
B = 4
H = 8
hidden = 6
epochs = 3
batch = 4
passes = 1
conf.hidden = 6
conf.epochs = 3
conf.train_windows = 32
conf.val_windows = 12
conf.batch = 8
dataset.length = 40
dataset.count = 10
";

#[test]
fn tiny_pipeline() {
    let cfg = RunConfig::parse_text(TINY).unwrap();
    let data = cfg.dataset().unwrap();
    let mut bundle = cfg.init_bundle().unwrap();
    let log = train(&mut bundle, &data, &cfg.training_config()).unwrap();
    assert_eq!(log.joint_epochs().count(), 3);
    assert_eq!(log.epochs.len(), 6);
    assert!(bundle.trained.ar && bundle.trained.prior && bundle.trained.confidence);
    assert!(bundle.calibration.is_fitted());

    // the logged ℓ1 is the one recomputed from the final W
    let windows = data.eval_windows(bundle.context_len(), bundle.chunk_len());
    let last = log.joint_epochs().last().unwrap().prior_l1.unwrap();
    assert_eq!(prior_l1(&bundle.prior, &windows).unwrap(), last);

    let text = to_text(&bundle);
    let loaded = from_text(&text).unwrap();
    assert_eq!(to_text(&loaded), text);

    let ctx = Sequence::new(data.validation[0].samples()[..16].to_vec()).unwrap();
    let a = generate_nara(&loaded, &ctx, &GenerationConfig::new(1.0, 10, 5).unwrap()).unwrap();
    let b = generate_pure_ar(&bundle.ar, &ctx, 10, 5).unwrap();
    assert_eq!(a.generated, b.generated);
    let z = generate_nara(&loaded, &ctx, &GenerationConfig::new(0.0, 10, 5).unwrap()).unwrap();
    assert_eq!(z.sequential_rounds, 3);

    let cases = sweep_cases(&data, 16, 8).unwrap();
    let rows = run_sweep(&loaded, &cases, &[0.0, 0.5, 1.0], 1).unwrap();
    assert_eq!(rows[0].sequential_rounds, 2 * cases.len());
    assert_eq!(rows[2].sequential_rounds, 8 * cases.len());
    assert_eq!(rows[0].acceptance_ratio_pct, 100.0);
    assert_eq!(rows[2].acceptance_ratio_pct, 0.0);
    assert!(rows.iter().all(|r| r.mean_l1.is_finite()));
}

#[test]
fn sweep_cases_need_long_enough_sequences() {
    let cfg = RunConfig::parse_text(TINY).unwrap();
    let data = cfg.dataset().unwrap();
    assert!(sweep_cases(&data, 30, 20).is_err());
    assert_eq!(sweep_cases(&data, 16, 8).unwrap().len(), data.validation.len());
}
