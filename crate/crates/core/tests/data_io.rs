use std::path::PathBuf;

use echo_core::data::{idx_dataset, load_idx, load_libsvm, parse_libsvm, write_libsvm, DataError};
use echo_core::loss::{BinaryParameterization, LossKind, LossModel};
use echo_core::ParamVector;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sample.libsvm")
}

#[test]
fn libsvm_fixture_round_trips() {
    let d = load_libsvm(fixture(), Some(54)).unwrap();
    assert_eq!(d.len(), 1000);
    assert_eq!(d.n_features, 55);
    let mut out = Vec::new();
    write_libsvm(&d, &mut out).unwrap();
    assert_eq!(
        String::from_utf8(out.clone()).unwrap(),
        std::fs::read_to_string(fixture()).unwrap()
    );
    let again = parse_libsvm(out.as_slice(), Some(54), &d.name).unwrap();
    assert_eq!(again, d);
}

#[test]
fn per_class_binary_model_has_110_parameters_for_54_features() {
    let d = load_libsvm(fixture(), Some(54)).unwrap();
    let kind = d.loss_kind(BinaryParameterization::PerClass);
    let model = LossModel::for_examples(kind, d.n_features, &d.examples, None).unwrap();
    assert_eq!(model.dimension(), 110);
    let single = LossModel::for_examples(
        LossKind::BinaryLogistic(BinaryParameterization::SingleVector),
        d.n_features,
        &d.examples,
        None,
    )
    .unwrap();
    assert_eq!(single.dimension(), 55);
    // max ‖x‖² over the file with the bias included
    let max_sq = d
        .examples
        .iter()
        .map(|e| e.as_labeled().unwrap().features.norm_sq())
        .fold(0.0, f64::max);
    assert!((single.beta() - max_sq / 4.0).abs() < 1e-12);
    assert!(
        model
            .mean_loss(&ParamVector::zeros(110), &d.examples)
            .unwrap()
            - 2f64.ln()
            < 1e-12
    );
}

#[test]
fn missing_file_names_path() {
    let err = load_libsvm("/nonexistent/file.libsvm", None).unwrap_err();
    assert!(matches!(err, DataError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/file.libsvm"));
}

#[test]
fn idx_pixels_are_scaled_into_unit_interval() {
    let mut images = Vec::new();
    for x in [2051u32, 3, 2, 2] {
        images.extend_from_slice(&x.to_be_bytes());
    }
    images.extend((0..12u8).map(|i| i * 23));
    let mut labels = Vec::new();
    for x in [2049u32, 3] {
        labels.extend_from_slice(&x.to_be_bytes());
    }
    labels.extend([0u8, 5, 9]);
    let d = idx_dataset(&images, &labels, "tiny").unwrap();
    for ex in &d.examples {
        let dense = ex.as_labeled().unwrap().features.to_dense(d.n_features);
        assert!(dense[..4].iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(dense[4], 1.0);
    }
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("i"), &images).unwrap();
    std::fs::write(dir.path().join("l"), &labels).unwrap();
    assert_eq!(
        load_idx(dir.path().join("i"), dir.path().join("l"))
            .unwrap()
            .examples,
        d.examples
    );
}
