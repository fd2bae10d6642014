use framerestore::experiment::{
    prepare, run_prepared, ExperimentConfig, InputSpec, Method, NoiseRule, Task,
};
use framerestore::image::Image;
use framerestore::operators::FanBeamGeometry;
use framerestore::pgm;
use framerestore::prox::FeasibleSet;
use proptest::prelude::*;

fn small_ct(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Task::Ct);
    cfg.input = InputSpec::Phantom { size: 32 };
    cfg.geometry = Some(FanBeamGeometry {
        views: 45,
        ..FanBeamGeometry::default_for(32)
    });
    cfg.levels = 2;
    cfg.noise = NoiseRule::RelativeToPeak {
        fraction: 0.01,
        seed,
    };
    cfg.lambda = vec![1e-3];
    cfg.record_timing = false;
    cfg
}

#[test]
fn ct_restoration_is_nonnegative_and_informative() {
    let cfg = small_ct(1);
    let prep = prepare(&cfg).unwrap();
    let out = run_prepared(&prep, &cfg).unwrap();
    assert!(out.restored.pixels().iter().all(|v| *v >= 0.0));
    let zero = Image::zeros(32, 32);
    let floor = framerestore::psnr(&zero, &prep.truth, cfg.psnr_mode).unwrap();
    assert!(
        out.row.psnr_db > floor + 10.0,
        "{} vs {floor}",
        out.row.psnr_db
    );
}

#[test]
fn deconvolution_output_respects_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.pgm");
    let img = Image::from_fn(
        40,
        32,
        |x, y| if (x / 5 + y / 5) % 2 == 0 { 250.0 } else { 5.0 },
    );
    pgm::write(&path, &img, 255).unwrap();
    let mut cfg = ExperimentConfig::defaults(Task::Deconvolution);
    cfg.input = InputSpec::Pgm { path };
    cfg.levels = 2;
    cfg.lambda = vec![0.5];
    let prep = prepare(&cfg).unwrap();
    let out = run_prepared(&prep, &cfg).unwrap();
    assert_eq!(cfg.feasible_set, FeasibleSet::Box { lb: 0.0, ub: 255.0 });
    assert!(cfg.feasible_set.contains(out.restored.pixels()));
    let observed = Image::new(40, 32, prep.f.clone()).unwrap();
    let before = framerestore::psnr(&observed, &prep.truth, cfg.psnr_mode).unwrap();
    assert!(out.row.psnr_db > before);
}

#[test]
fn every_method_runs_on_the_same_data() {
    let cfg = small_ct(2);
    let prep = prepare(&cfg).unwrap();
    for method in Method::ALL {
        let run = ExperimentConfig {
            method,
            ..cfg.clone()
        };
        let out = run_prepared(&prep, &run).unwrap();
        assert_eq!(out.row.method, method.name());
        assert!(out.row.psnr_db.is_finite());
        assert_eq!(out.pd.is_some(), method == Method::Pd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn noise_sigma_tracks_the_clean_peak(seed in 0u64..1000, fraction in 0.001f64..0.05) {
        let mut cfg = small_ct(seed);
        cfg.noise = NoiseRule::RelativeToPeak { fraction, seed };
        let prep = prepare(&cfg).unwrap();
        let clean = prep.op.apply_vec(prep.truth.pixels());
        let peak = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((prep.sigma - fraction * peak).abs() <= 1e-12 * peak);
    }

    #[test]
    fn same_seed_same_measurements(seed in 0u64..1000) {
        let cfg = small_ct(seed);
        let a = prepare(&cfg).unwrap();
        let b = prepare(&cfg).unwrap();
        prop_assert_eq!(a.f, b.f);
    }
}
