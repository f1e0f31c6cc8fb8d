use std::ffi::{CStr, CString};
use std::ptr;

use mbn::data::{make_blobs, BlobsSpec};
use mbn_ffi::*;

fn blobs() -> (Vec<f64>, Vec<i64>, usize, usize) {
    let ds = make_blobs(&BlobsSpec { seed: 1, clusters: 3, per_cluster: 12, dims: 3, separation: 30.0, spread: 1.0 })
        .unwrap();
    let labels = ds.labels.as_ref().unwrap().as_slice().iter().map(|&l| l as i64 * 5 - 2).collect();
    (ds.features.as_slice().to_vec(), labels, ds.n(), ds.d())
}

fn last_error() -> String {
    let p = mbn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_options() -> MbnEnsembleOptions {
    let mut o = unsafe {
        let mut o = std::mem::zeroed();
        mbn_ensemble_options_default(&mut o);
        o
    };
    assert_eq!(o.models, 40);
    assert_eq!(o.units_per_layer, 400);
    o.models = 5;
    o.units_per_layer = 48;
    o.seed = 3;
    o
}

#[test]
fn train_select_and_score() {
    let (x, y, n, d) = blobs();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(mbn_dataset_new(x.as_ptr(), n, d, y.as_ptr(), MBN_METRIC_EUCLIDEAN, &mut ds), MbnStatus::Ok);
        assert_eq!((mbn_dataset_n(ds), mbn_dataset_d(ds), mbn_dataset_classes(ds)), (36, 3, 3));

        let mut ens = ptr::null_mut();
        assert_eq!(mbn_ensemble_train(ds, &small_options(), &mut ens), MbnStatus::Ok);
        assert_eq!(mbn_ensemble_models(ens), 5);
        let mut deltas = [0.0; 5];
        assert_eq!(mbn_ensemble_deltas(ens, deltas.as_mut_ptr(), 5), MbnStatus::Ok);
        assert!(deltas.iter().all(|&v| (0.05..=0.95).contains(&v)));

        let opts =
            MbnSelectionOptions { mode: MBN_MODE_SO, criterion: MBN_CRITERION_VRC, b: 2, classes: 3, embed_dim: 0 };
        let mut sel = ptr::null_mut();
        assert_eq!(mbn_select(ens, &opts, &mut sel), MbnStatus::Ok);
        assert_eq!(mbn_selection_models(sel), 5);
        assert_eq!(mbn_selection_chosen_count(sel), 2);
        let mut chosen = [0usize; 2];
        assert_eq!(mbn_selection_chosen(sel, chosen.as_mut_ptr(), 2), MbnStatus::Ok);
        let mut weights = [0.0; 5];
        assert_eq!(mbn_selection_weights(sel, weights.as_mut_ptr(), 5), MbnStatus::Ok);
        assert!(weights[chosen[0]] >= weights[chosen[1]]);

        let (mut rows, mut h) = (0usize, 0usize);
        assert_eq!(mbn_selection_embedding_shape(sel, &mut rows, &mut h), MbnStatus::Ok);
        assert_eq!(rows, n);
        let mut emb = vec![0.0; rows * h];
        assert_eq!(mbn_selection_embedding(sel, emb.as_mut_ptr(), emb.len()), MbnStatus::Ok);
        let mut assigned = vec![0usize; n];
        assert_eq!(mbn_cluster(emb.as_ptr(), n, h, 3, assigned.as_mut_ptr()), MbnStatus::Ok);
        let pred: Vec<i64> = assigned.iter().map(|&l| l as i64).collect();
        let mut acc = 0.0;
        assert_eq!(mbn_accuracy(pred.as_ptr(), y.as_ptr(), n, &mut acc), MbnStatus::Ok);
        assert_eq!(acc, 1.0);

        mbn_selection_free(sel);
        mbn_ensemble_free(ens);
        mbn_dataset_free(ds);
    }
}

#[test]
fn ensembles_round_trip_through_disk() {
    let (x, y, n, d) = blobs();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("ens").to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(mbn_dataset_new(x.as_ptr(), n, d, y.as_ptr(), MBN_METRIC_EUCLIDEAN, &mut ds), MbnStatus::Ok);
        let mut ens = ptr::null_mut();
        assert_eq!(mbn_ensemble_train(ds, &small_options(), &mut ens), MbnStatus::Ok);
        assert_eq!(mbn_ensemble_save(ens, path.as_ptr()), MbnStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(mbn_ensemble_load(path.as_ptr(), &mut back), MbnStatus::Ok);
        let opts = MbnSelectionOptions { mode: MBN_MODE_SD, criterion: 0, b: 3, classes: 0, embed_dim: 0 };
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(mbn_select(ens, &opts, &mut a), MbnStatus::Ok);
        assert_eq!(mbn_select(back, &opts, &mut b), MbnStatus::Ok);
        let (mut wa, mut wb) = ([0.0; 5], [0.0; 5]);
        mbn_selection_weights(a, wa.as_mut_ptr(), 5);
        mbn_selection_weights(b, wb.as_mut_ptr(), 5);
        assert_eq!(wa, wb);
        mbn_selection_free(a);
        mbn_selection_free(b);
        mbn_ensemble_free(back);
        mbn_ensemble_free(ens);
        mbn_dataset_free(ds);
    }
}

#[test]
fn failures_report_status_and_message() {
    let (x, y, n, d) = blobs();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(mbn_dataset_new(ptr::null(), n, d, ptr::null(), 0, &mut ds), MbnStatus::NullPointer);
        assert!(ds.is_null());
        assert!(last_error().contains("features"));
        assert_eq!(mbn_dataset_new(x.as_ptr(), n, d, y.as_ptr(), 7, &mut ds), MbnStatus::InvalidArgument);
        assert_eq!(mbn_dataset_new(x.as_ptr(), 1, d, ptr::null(), 0, &mut ds), MbnStatus::InvalidDataset);
        assert!(last_error().contains("at least 2 points"));

        assert_eq!(mbn_dataset_new(x.as_ptr(), n, d, ptr::null(), 0, &mut ds), MbnStatus::Ok);
        assert!(mbn_last_error().is_null());
        let mut ens = ptr::null_mut();
        // No labels and no top_k: the top layer size is unknown.
        assert_eq!(mbn_ensemble_train(ds, &small_options(), &mut ens), MbnStatus::Config);
        let opts = MbnEnsembleOptions { top_k: 4, ..small_options() };
        assert_eq!(mbn_ensemble_train(ds, &opts, &mut ens), MbnStatus::Ok);

        let mut sel = ptr::null_mut();
        let bad = MbnSelectionOptions { mode: 9, criterion: 0, b: 0, classes: 3, embed_dim: 0 };
        assert_eq!(mbn_select(ens, &bad, &mut sel), MbnStatus::InvalidArgument);
        let so = MbnSelectionOptions { mode: MBN_MODE_SO, criterion: MBN_CRITERION_PB, b: 0, classes: 0, embed_dim: 0 };
        assert_eq!(mbn_select(ens, &so, &mut sel), MbnStatus::Config);
        let too_many = MbnSelectionOptions { b: 6, classes: 3, ..so };
        assert_eq!(mbn_select(ens, &too_many, &mut sel), MbnStatus::Config);
        let ok = MbnSelectionOptions { b: 1, classes: 3, ..so };
        assert_eq!(mbn_select(ens, &ok, &mut sel), MbnStatus::Ok);
        let mut short = [0.0; 2];
        assert_eq!(mbn_selection_weights(sel, short.as_mut_ptr(), 2), MbnStatus::BufferTooSmall);
        assert_eq!(mbn_selection_weights(ptr::null(), short.as_mut_ptr(), 2), MbnStatus::NullPointer);

        let missing = CString::new("/nonexistent/mbn.csv").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(mbn_dataset_load_csv(missing.as_ptr(), -1, 0, &mut other), MbnStatus::Io);

        let mut acc = 0.0;
        assert_eq!(mbn_accuracy(y.as_ptr(), y.as_ptr(), n, &mut acc), MbnStatus::Ok);
        assert_eq!(acc, 1.0);

        mbn_selection_free(sel);
        mbn_ensemble_free(ens);
        mbn_dataset_free(ds);
        mbn_dataset_free(ptr::null_mut());
    }
}

#[test]
fn experiment_from_json() {
    let cfg = CString::new(
        r#"{"runs": 2, "pipeline": {"kind": "mbn_sd"}, "network": {"units_per_layer": 32}, "ensemble": {"models": 4},
            "data": {"kind": "blobs", "seed": 2, "clusters": 3, "per_cluster": 15, "dims": 3, "separation": 25.0, "spread": 1.0}}"#,
    )
    .unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(mbn_run_experiment(cfg.as_ptr(), &mut report), MbnStatus::Ok);
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        mbn_string_free(report);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["pipeline"], "mbn_sd");
        assert_eq!(v["runs"].as_array().unwrap().len(), 2);

        let bad = CString::new(r#"{"runs": 0}"#).unwrap();
        assert_eq!(mbn_run_experiment(bad.as_ptr(), &mut report), MbnStatus::Config);
        assert!(report.is_null());
        let garbage = CString::new("{").unwrap();
        assert_eq!(mbn_run_experiment(garbage.as_ptr(), &mut report), MbnStatus::Config);
    }
}

#[test]
fn header_declares_the_exports() {
    let header = include_str!("../include/mbn.h");
    for name in [
        "mbn_last_error",
        "mbn_dataset_new",
        "mbn_ensemble_train",
        "mbn_select",
        "mbn_accuracy",
        "mbn_run_experiment",
        "MBN_STATUS_BUFFER_TOO_SMALL = 22",
    ] {
        assert!(header.contains(name), "{name}");
    }
    let version = unsafe { CStr::from_ptr(mbn_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
