use ndm::ad::{Array, Tape};
use ndm::harness::*;
use ndm::Error;

fn small() -> TrainConfig {
    TrainConfig { n_layers: 2, hidden: 6, n_train: 64, batch_size: 16, steps: 20, geometry_subsample: 8, ..Default::default() }
}

#[test]
fn run_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let out = train(&c).unwrap();
    write_run(&out, &c, dir.path()).unwrap();
    let ck = Checkpoint::load(&dir.path().join("checkpoint.json")).unwrap();
    assert_eq!(ck.config, c);
    assert_eq!(ck.steps_completed, 20);
    assert_eq!(ck.model().unwrap(), out.model);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv, metrics_csv(&out.history));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("geometry_report.json")).unwrap()).unwrap();
    assert_eq!(report["layers"].as_array().unwrap().len(), 2);
    assert_eq!(report["points"], 64);
}

#[test]
fn checkpoints_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = small();
    write_run(&train(&c).unwrap(), &c, a.path()).unwrap();
    write_run(&train(&c).unwrap(), &c, b.path()).unwrap();
    for f in ["metrics.csv", "checkpoint.json", "geometry_report.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_rows_reproduce_the_loss_identity() {
    let c = TrainConfig { lambda: 0.3, w_curv: 0.5, w_vol: 2.0, ..small() };
    let csv = metrics_csv(&train(&c).unwrap().history);
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').take(6).map(|v| v.parse().unwrap()).collect();
        let (task, curv, vol, geo, total) = (f[1], f[2], f[3], f[4], f[5]);
        assert!((geo - (0.5 * curv + 2.0 * vol)).abs() <= 1e-12);
        assert!((total - (task + 0.3 * (0.5 * curv + 2.0 * vol))).abs() <= 1e-12);
    }
}

#[test]
fn metric_nets_learn_only_from_geometry() {
    let zero = train(&TrainConfig { lambda: 0.0, ..small() }).unwrap();
    assert!(zero.history.iter().all(|r| r.metricnet_grad_norm == 0.0));
    let shaped = train(&small()).unwrap();
    assert!(shaped.history[0].metricnet_grad_norm > 0.0);
}

#[test]
fn sinusoid_regression_trains() {
    let c = TrainConfig { task: Task::Sinusoid, steps: 300, ..small() };
    let out = train(&c).unwrap();
    let first = out.history[0].l_task;
    assert!(out.final_task_loss < first, "{} !< {first}", out.final_task_loss);
}

#[test]
fn wide_models_train() {
    let c = TrainConfig { d: 3, n_layers: 3, steps: 5, ..small() };
    let out = train(&c).unwrap();
    assert_eq!(out.report.layers.len(), 3);
}

#[test]
fn divergence_aborts_with_the_component() {
    let c = TrainConfig { lr: 1e8, steps: 50, ..small() };
    match train(&c) {
        Err(Error::NonFiniteLoss { component, step, .. }) => {
            assert!(["l_task", "l_curv", "l_vol", "l_geo", "l_total"].contains(&component));
            assert!(step > 0);
        }
        other => panic!("expected a non-finite abort, got {:?}", other.map(|o| o.final_task_loss)),
    }
}

#[test]
fn forward_rejects_bad_batches() {
    let c = small();
    let m = initial_model(&c).unwrap();
    assert!(matches!(m.predict(&Array::zeros(&[0, 2])), Err(Error::EmptyBatch(_))));
    assert!(Array::matrix(1, 2, vec![f64::NAN, 0.0]).is_err());
    assert!(m.predict(&Array::zeros(&[3, 4])).is_err());
    let mut tape = Tape::new();
    let bound = tape.bind_constants(m.params());
    let x = tape.constant(Array::zeros(&[4, 2]));
    let t = ndm_forward(&m, &mut tape, &bound, x, Some(GeometryOptions { subsample: 16, h: 1e-3 })).unwrap();
    assert_eq!(tape.value(t.geometry[0].ricci).shape(), &[4, 1]);
}

#[test]
fn config_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"steps": 5, "optimizer": "natural", "damping": 0.1}"#).unwrap();
    let c = TrainConfig::load(&p).unwrap();
    assert_eq!(c.steps, 5);
    assert_eq!(c.damping, 0.1);
    std::fs::write(&p, r#"{"steps": -1}"#).unwrap();
    assert!(TrainConfig::load(&p).is_err());
}
