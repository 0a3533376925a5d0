use proptest::prelude::*;
use sania::data::{read_libsvm, write_libsvm};
use sania::experiments::{invariance_report, lr_sweep};
use sania::runner::{prepare, validate};
use sania::trace::format_float;
use sania::{run, run_detailed, HarnessError, Method, ObjectiveName, Precond, RunConfig};
use sania_core::datasets::generate_synthetic;
use sania_core::LabelEncoding;

fn small(method: Method) -> RunConfig {
    RunConfig {
        dataset: "synthetic:60:8".into(),
        method,
        batch_size: Some(15),
        epochs: 3,
        ..Default::default()
    }
}

#[test]
fn identical_configs_give_identical_csv() {
    for method in [
        Method::SaniaQn(Precond::AdamSqr),
        Method::SaniaQn(Precond::Hutchinson),
        Method::Psps(Precond::AdaGrad),
        Method::SaniaPcg { precond: Precond::AdaGradSqr, nonconvex: false },
    ] {
        let cfg = small(method);
        assert_eq!(run(&cfg).unwrap().to_csv_string(), run(&cfg).unwrap().to_csv_string(), "{method}");
    }
}

#[test]
fn seeds_change_the_schedule() {
    let a = run(&small(Method::Sps)).unwrap();
    let b = run(&RunConfig { seed: 1, ..small(Method::Sps) }).unwrap();
    assert_ne!(a.rows, b.rows);
}

#[test]
fn zero_epochs_is_a_single_evaluation() {
    let t = run(&RunConfig { epochs: 0, ..small(Method::Sps) }).unwrap();
    assert_eq!(t.rows.len(), 1);
    let r = &t.rows[0];
    assert_eq!((r.epoch, r.step), (0, 0));
    assert!((r.loss - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn row_layout() {
    let t = run(&small(Method::SaniaQn(Precond::AdaGradSqr))).unwrap();
    // 60 / 15 = 4 steps per epoch plus a summary
    assert_eq!(t.rows.len(), 1 + 3 * 5);
    for epoch in 1..=3 {
        let rows: Vec<_> = t.rows.iter().filter(|r| r.epoch == epoch).collect();
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert!(rows[..4].iter().all(|r| r.lambda.is_some_and(|l| (0.0..=1.0).contains(&l))));
        assert!(rows[4].is_evaluation());
    }
    assert_eq!(t.evaluations().count(), 4);
}

#[test]
fn csv_floats_round_trip() {
    let t = run(&small(Method::SaniaQn(Precond::AdamSqr))).unwrap();
    let csv = t.to_csv_string();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    for (rec, row) in reader.records().zip(&t.rows) {
        let rec = rec.unwrap();
        assert_eq!(rec[2].parse::<f64>().unwrap(), row.loss);
        assert_eq!(rec[5].parse::<f64>().unwrap(), row.grad_norm);
        assert_eq!(&rec[8], "sania-adam-sqr");
    }
}

#[test]
fn validation_rules() {
    let check = |cfg: RunConfig| validate(&cfg, 60, 8);
    assert!(check(small(Method::Sps)).is_ok());
    assert!(matches!(check(small(Method::Sgd)), Err(HarnessError::Config(_))));
    assert!(matches!(
        check(RunConfig { step_size: Some(-1.0), ..small(Method::Sgd) }),
        Err(HarnessError::Config(_))
    ));
    assert!(matches!(
        check(RunConfig { objective: ObjectiveName::Nllsq, ..small(Method::SaniaNewton) }),
        Err(HarnessError::Incompatible { .. })
    ));
    let nonconvex = Method::SaniaPcg { precond: Precond::Identity, nonconvex: true };
    assert!(matches!(check(small(nonconvex)), Err(HarnessError::Incompatible { .. })));
    assert!(check(RunConfig { objective: ObjectiveName::Nllsq, ..small(nonconvex) }).is_ok());
    assert!(matches!(check(small(Method::CubicPolyak)), Err(HarnessError::Incompatible { .. })));
    assert!(check(RunConfig { batch_size: None, ..small(Method::CubicPolyak) }).is_ok());
    assert!(matches!(check(small(Method::GradRegNewton)), Err(HarnessError::Config(_))));
    assert!(check(RunConfig { batch_size: Some(61), ..small(Method::Sps) }).is_err());
    assert!(check(RunConfig { dense_cap: 4, ..small(Method::SaniaNewton) }).is_err());
}

#[test]
fn every_method_runs() {
    for method in Method::all() {
        let mut cfg = small(method);
        if method.takes_step_size() {
            cfg.step_size = Some(0.05);
        }
        if method == Method::GradRegNewton {
            cfg.l2 = Some(0.1);
        }
        if method.second_order() {
            cfg.objective = ObjectiveName::LogregL2;
            cfg.f_hat = 0.1;
        }
        match method {
            Method::SaniaPcg { nonconvex: true, .. } => cfg.objective = ObjectiveName::Nllsq,
            // in floating point CG can need more than d iterations to reach 1e-10
            Method::SaniaPcg { .. } => {
                cfg.objective = ObjectiveName::LogregL2;
                cfg.mu = 0.1;
                cfg.f_hat = 0.3;
                cfg.cg_max_iter = Some(64);
            }
            _ => {}
        }
        let t = run(&cfg).unwrap_or_else(|e| panic!("{method}: {e}"));
        assert!(!t.aborted(), "{method}: {:?}", t.metadata.status);
    }
}

#[test]
fn sweep_reports_grid_order() {
    let cfg = RunConfig { step_size: None, ..small(Method::Sgd) };
    let t = lr_sweep(&cfg, &[2, -4, 0]).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.exponent).collect::<Vec<_>>(), vec![2, -4, 0]);
    assert!(t.best.is_some());
    let single = lr_sweep(&cfg, &[-2]).unwrap();
    assert_eq!(single.best.unwrap().exponent, -2);
    assert!(lr_sweep(&small(Method::SaniaQn(Precond::AdamSqr)), &[0]).is_err());
    assert!(lr_sweep(&cfg, &[]).is_err());
}

#[test]
fn libsvm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.svm");
    let ds = generate_synthetic(30, 6, 2).unwrap();
    write_libsvm(&path, &ds).unwrap();
    let back = read_libsvm(&path, LabelEncoding::PlusMinusOne).unwrap();
    assert_eq!(back.rows(), 30);
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.to_dense(), ds.to_dense());
}

#[test]
fn scaled_dataset_is_prepared() {
    let (plain, v) = prepare(&small(Method::Sps)).unwrap();
    assert!(v.is_none());
    let (scaled, v) = prepare(&RunConfig { scale_k: 2.0, ..small(Method::Sps) }).unwrap();
    let v = v.unwrap();
    assert!(v.values.iter().all(|x| (f64::exp(-2.0)..=f64::exp(2.0)).contains(x)));
    let (a, b) = (plain.to_dense(), scaled.to_dense());
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!((x * v.values[i % 8] - y).abs() <= 1e-15 * x.abs().max(1.0));
    }
}

#[test]
fn invariance_report_on_synthetic() {
    let cfg = RunConfig {
        method: Method::SaniaQn(Precond::AdaGradSqr),
        precond: sania::PrecondParams { eps: 0.0, ..Default::default() },
        ..small(Method::Sps)
    };
    let r = invariance_report(&cfg, 2.0, 4).unwrap();
    assert!(r.pass, "{}", r.max_relative_gap);
    assert_eq!(r.epochs.len(), 4);
    assert!(r.max_iterate_error_normalized < 1e-10);
}

#[test]
fn iterates_are_recorded_per_step() {
    let (data, _) = prepare(&small(Method::Sps)).unwrap();
    let out = run_detailed(&small(Method::Sps), &data, true).unwrap();
    assert_eq!(out.iterates.len(), 1 + 3 * 4);
    assert_eq!(out.iterates.last().unwrap(), &out.w);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sania_lambda_stays_in_unit_interval(seed in 0u64..1000, batch in 1usize..40, adam in any::<bool>()) {
        let method = Method::SaniaQn(if adam { Precond::AdamSqr } else { Precond::AdaGradSqr });
        let cfg = RunConfig { seed, batch_size: Some(batch), epochs: 1, dataset: "synthetic:40:5".into(), ..small(method) };
        let t = run(&cfg).unwrap();
        for r in &t.rows {
            if let Some(l) = r.lambda {
                prop_assert!((0.0..=1.0).contains(&l));
            }
        }
    }

    #[test]
    fn formatted_floats_parse_back(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}
