use super::*;
use crate::network::init_params;
use crate::optim::OptimizerKind;
use crate::problems::ProblemConfig;

fn small() -> ProblemConfig {
    ProblemConfig {
        width: Some(6),
        interior_per_side: 6,
        boundary_per_edge: 6,
        initial_points: 6,
        boundary_per_side: 6,
        ritz_points: 200,
        eval_per_side: 12,
        ritz_eval_points: 200,
    }
}

fn small_config(
    kind: OptimizerKind,
    iters: usize,
    seeds: Vec<u64>,
    dir: &Path,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ProblemKind::Poisson2D, kind)
        .with_iters(iters)
        .with_seeds(seeds)
        .with_out_dir(dir);
    cfg.discretization = small();
    cfg.with_timing(false)
}

#[test]
fn zero_iterations_report_the_initial_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&small_config(OptimizerKind::Engd, 0, vec![3], dir.path())).unwrap();
    let problem = ProblemInstance::new(ProblemKind::Poisson2D, &small()).unwrap();
    let (l2, h1) = problem
        .relative_errors(&init_params(problem.arch, 3))
        .unwrap();
    assert_eq!(
        res.summary.l2,
        Stats {
            median: l2,
            min: l2,
            max: l2
        }
    );
    assert_eq!(
        res.summary.h1,
        Stats {
            median: h1,
            min: h1,
            max: h1
        }
    );
    assert_eq!(res.runs[0].record.rows.len(), 1);
}

#[test]
fn order_statistics() {
    let s = Stats::of(&[3.0, 1.0, 2.0]).unwrap();
    assert_eq!((s.median, s.min, s.max), (2.0, 1.0, 3.0));
    let s = Stats::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((s.median, s.min, s.max), (2.5, 1.0, 4.0));
    assert!(Stats::of(&[]).is_none());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for kind in [OptimizerKind::Engd, OptimizerKind::Gd, OptimizerKind::Adam] {
        run_experiment(&small_config(kind, 12, vec![0, 1], a.path())).unwrap();
        run_experiment(&small_config(kind, 12, vec![0, 1], b.path())).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3 * 5);
    for n in names {
        assert_eq!(
            fs::read(a.path().join(&n)).unwrap(),
            fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn summary_matches_recomputation_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let r1 = run_experiment(&small_config(
        OptimizerKind::Engd,
        5,
        vec![0, 1, 2],
        dir.path(),
    ))
    .unwrap();
    let r2 = run_experiment(&small_config(OptimizerKind::Gd, 20, vec![4, 5], dir.path())).unwrap();
    let recomputed = summarize(dir.path()).unwrap();
    assert_eq!(recomputed.len(), 2);
    let find = |o: &str| {
        recomputed
            .iter()
            .find(|s| s.optimizer == o)
            .unwrap()
            .clone()
    };
    assert_eq!(find("engd"), r1.summary);
    assert_eq!(find("gd"), r2.summary);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
}

#[test]
fn traces_have_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&small_config(OptimizerKind::Adam, 250, vec![7], dir.path())).unwrap();
    let text = fs::read_to_string(&res.runs[0].trace_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    let iterations: Vec<usize> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(iterations, vec![0, 100, 200, 250]);
    assert!(res.runs[0].trace_path.ends_with("poisson2d_adam_seed7.csv"));
    let params =
        crate::network::ParamVector::load(&dir.path().join("poisson2d_adam_seed7.params")).unwrap();
    assert_eq!(params, res.runs[0].record.final_params);
}

#[test]
fn unwritable_output_aborts_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not_a_dir");
    fs::write(&file, b"x").unwrap();
    let err = run_experiment(&small_config(
        OptimizerKind::Engd,
        1_000_000,
        vec![0],
        &file,
    ))
    .unwrap_err();
    assert!(matches!(err, RunnerError::Unwritable { .. }), "{err}");
}

#[test]
fn seed_lists_must_be_nonempty_and_unique() {
    let d = Path::new("unused");
    assert!(matches!(
        small_config(OptimizerKind::Engd, 1, vec![], d).validate(),
        Err(RunnerError::Config(_))
    ));
    assert!(matches!(
        small_config(OptimizerKind::Engd, 1, vec![1, 2, 1], d).validate(),
        Err(RunnerError::Config(_))
    ));
    assert!(small_config(OptimizerKind::Engd, 1, vec![2, 1], d)
        .validate()
        .is_ok());
    assert_eq!(
        ExperimentConfig::new(ProblemKind::Heat1D, OptimizerKind::Gd).seeds,
        (0..10).collect::<Vec<_>>()
    );
}

#[test]
fn toml_config_with_dotted_keys_and_chain() {
    let text = r#"
        problem = "heat1d"
        seeds = [4, 2]
        out = "somewhere"
        record_timing = false
        chain = ["adam:1000", "engd:500"]
        optimizer.rcond = 1e-10
        optimizer.grid = { lo = 1e-6, hi = 1.0, n = 20 }
        adam.lr0 = 5e-4
        discretization.width = 16
    "#;
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    assert_eq!(cfg.problem, ProblemKind::Heat1D);
    assert_eq!(cfg.seeds, vec![4, 2]);
    assert_eq!(cfg.out_dir, PathBuf::from("somewhere"));
    assert!(!cfg.record_timing);
    assert_eq!(cfg.label(), "adam+engd");
    assert_eq!(cfg.stages[0].max_iters, Some(1000));
    assert_eq!(cfg.stages[1].kind, OptimizerKind::Engd);
    assert!(cfg
        .stages
        .iter()
        .all(|s| s.rcond == 1e-10 && s.adam.lr0 == 5e-4));
    assert_eq!(cfg.discretization.width, Some(16));

    assert!(ExperimentConfig::from_toml_str("seeds = []").is_err());
    assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    assert!(ExperimentConfig::from_toml_str("optimizer.kind = \"sgd\"").is_err());
    assert!(ExperimentConfig::from_toml_str("chain = [\"engd:x\"]").is_err());
}

#[test]
fn stems_round_trip() {
    let stem = run_stem(ProblemKind::Ritz1D, "adam+engd", 12);
    assert_eq!(
        parse_stem(&stem),
        Some(("ritz1d".into(), "adam+engd".into(), 12))
    );
    assert_eq!(parse_stem("summary"), None);
}

#[test]
fn zero_field_is_flagged_and_left_unscaled() {
    let w = vec![0.25; 4];
    let cols = field_columns(
        &w,
        vec![
            ("residual".into(), vec![0.0; 4]),
            ("other".into(), vec![1.0, -4.0, 2.0, 0.5]),
        ],
    );
    assert!(cols[0].zero);
    assert_eq!(cols[0].scale, 1.0);
    assert!(cols[0].values.iter().all(|v| *v == 0.0));
    assert!(!cols[1].zero);
    assert_eq!(cols[1].values, vec![0.25, -1.0, 0.5, 0.125]);
}

#[test]
fn engd_pushforward_is_closer_to_the_residual_than_the_gradient() {
    let problem = ProblemInstance::new(ProblemKind::Poisson2D, &ProblemConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for seed in [0, 1] {
        let params = init_params(problem.arch, seed);
        let report = emit_field_csv(&params, &problem, 1e-12, dir.path(), "init").unwrap();
        for c in &report.columns {
            let max = c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert_eq!(max, 1.0, "{}", c.name);
        }
        // Independent oracle: plain weighted inner products of the unscaled samples.
        let w = &problem.eval.weights;
        let raw = |name: &str| -> Vec<f64> {
            let c = report.column(name).unwrap();
            c.values.iter().map(|v| v * c.scale).collect()
        };
        let cos = |a: &[f64], b: &[f64]| {
            let d = |x: &[f64], y: &[f64]| {
                x.iter()
                    .zip(y)
                    .zip(w)
                    .map(|((x, y), w)| w * x * y)
                    .sum::<f64>()
            };
            d(a, b) / (d(a, a) * d(b, b)).sqrt()
        };
        let r = raw("residual");
        let engd = cos(&raw("engd_pushforward"), &r);
        let grad = cos(&raw("gradient_pushforward"), &r);
        assert!(
            (engd
                - report
                    .column("engd_pushforward")
                    .unwrap()
                    .cosine_to_reference)
                .abs()
                < 1e-12
        );
        assert!(engd > grad, "seed {seed}: engd {engd} vs gradient {grad}");
        assert!(engd > 0.9, "seed {seed}: {engd}");
    }
    let text = fs::read_to_string(dir.path().join("init_meta.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "column,scale,zero,cosine_to_residual"
    );
}
