use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsp::algebra::tprod;
use tsp::harness::deblur::circular_convolve;
use tsp::harness::{
    all_methods_config, gen_deblur_with, gaussian_kernel, images_to_tensor, run_experiment, tensor_to_images,
    ExperimentConfig, KernelSpec, MethodSpec, ProblemSpec, SketchChoice, SketchSpec,
};
use tsp::solver::Method;

#[test]
fn deblur_operator_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (side, size, sigma) in [(6, 3, 0.8), (9, 5, 2.0), (4, 4, 1.3)] {
        let kernel = gaussian_kernel(size, sigma).unwrap();
        let g = gen_deblur_with(side, 2, &kernel, &mut rng).unwrap();
        let n = side + size - 1;
        let padded = tsp::harness::deblur::zero_pad(&kernel, n).unwrap().transpose();
        for (x, b) in tensor_to_images(&g.x).iter().zip(tensor_to_images(&g.b)) {
            let direct = circular_convolve(x, &padded);
            assert!((&direct - &b).norm() <= 1e-10 * direct.norm());
        }
    }
}

#[test]
fn random_images_through_the_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let kernel = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 + 0.5);
    let h = tsp::harness::deblur::zero_pad(&kernel, 7).unwrap();
    let a = tsp::harness::blur_operator(&h).unwrap();
    let ims: Vec<_> = (0..2).map(|_| DMatrix::from_fn(7, 7, |_, _| rand::Rng::random::<f64>(&mut rng))).collect();
    let b = tprod(&a, &images_to_tensor(&ims).unwrap()).unwrap();
    for (x, bi) in ims.iter().zip(tensor_to_images(&b)) {
        assert!((circular_convolve(x, &h.transpose()) - bi).norm() < 1e-10);
    }
}

#[test]
fn identical_entries_give_identical_traces() {
    let spec = MethodSpec::new(Method::AtspPr, SketchSpec { kind: SketchChoice::Block, tau: 2, q: None });
    let mut twin = spec.clone();
    twin.label = Some("twin".into());
    let config = ExperimentConfig {
        problem: ProblemSpec::gaussian(10, 4, 2, 3),
        methods: vec![spec, twin],
        trials: 3,
        tol: 1e-8,
        max_iters: 20_000,
        output_dir: None,
        write_traces: false,
    };
    let r = run_experiment(&config).unwrap();
    for trial in 0..3 {
        let pick = |label: &str| {
            r.runs.iter().find(|run| run.label == label && run.trial == trial).unwrap().outcome.clone().unwrap()
        };
        let (a, b) = (pick("ATSP-PR"), pick("twin"));
        assert_eq!(a.rows.len(), b.rows.len());
        assert!(a.rows.iter().zip(&b.rows).all(|(x, y)| x.epsilon == y.epsilon && x.chosen == y.chosen));
    }
}

#[test]
fn summary_validates_against_schema_and_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = all_methods_config(ProblemSpec::gaussian(12, 5, 2, 3), 2, 1e-6);
    config.output_dir = Some(dir.path().to_path_buf());
    config.write_traces = true;
    let r = run_experiment(&config).unwrap();
    assert_eq!(r.summary.methods.len(), 11);
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&summary).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert!(dir.path().join("ATSP-MD_iter.csv").exists());
    assert!(dir.path().join("ATSP-MD_time.csv").exists());
    assert!(dir.path().join("traces").join("NTSP_trial1.csv").exists());
}

#[test]
fn config_parses_from_toml() {
    let text = r#"
        trials = 4
        tol = 1e-7
        [problem]
        kind = "deblur"
        m = 8
        p = 2
        kernel = { size = 3, sigma = 1.0 }
        [[methods]]
        method = "ATSP-MD"
        sketch = { kind = "block", tau = 3 }
        [[methods]]
        label = "cs-half"
        method = "ATSP-CS"
        theta = 0.5
        prob = "slice_norm"
        sketch = { kind = "slice" }
    "#;
    let c: ExperimentConfig = toml::from_str(text).unwrap();
    assert_eq!(c.trials, 4);
    assert_eq!(c.problem.kernel, Some(KernelSpec { size: 3, sigma: 1.0 }));
    assert_eq!(c.methods[0].method, Method::AtspMd);
    assert_eq!(c.methods[1].label(), "cs-half");
    assert_eq!(c.max_iters, 100_000);
}

#[test]
fn deblur_experiment_reaches_target() {
    let mut config = ExperimentConfig {
        problem: ProblemSpec::deblur(12, 2, KernelSpec::default()),
        methods: vec![MethodSpec::new(Method::AtspMd, SketchSpec { kind: SketchChoice::Slice, tau: 1, q: None })],
        trials: 1,
        tol: 5e-3,
        max_iters: 200_000,
        output_dir: None,
        write_traces: false,
    };
    config.problem.seed = 7;
    let r = run_experiment(&config).unwrap();
    assert_eq!(r.summary.methods[0].converged, 1, "{:?}", r.summary.methods[0]);
}
