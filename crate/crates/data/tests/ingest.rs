use std::path::PathBuf;

use succmax_data::{fit_bucketizer, ingest_csv, ingest_reader, ColumnMapping, DataError};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn six_row_fixture() {
    let data = ingest_csv(fixture("six_rows.csv"), &ColumnMapping::default()).unwrap();
    assert_eq!(data.n_users(), 6);
    assert_eq!(data.n_policies(), 2);
    assert_eq!(data.policy_counts(), vec![3, 3]);
    assert_eq!(data.outcome_names(), ["conversion", "visit"]);
    assert_eq!(data.feature_names().len(), 12);
    // Row 3: conversion 1, visit 1; row 4: conversion 0, visit 1.
    assert_eq!(data.rows()[2].outcome, vec![1.0, 1.0]);
    assert_eq!(data.rows()[3].outcome, vec![0.0, 1.0]);
    assert_eq!(data.rows()[2].features[0], 24.9);
}

#[test]
fn blank_outcome_names_the_line() {
    let err = ingest_csv(fixture("blank_outcome.csv"), &ColumnMapping::default()).unwrap_err();
    match &err {
        DataError::Parse { line, column, .. } => {
            assert_eq!(*line, 4);
            assert_eq!(column, "conversion");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("line 4"));
}

#[test]
fn non_numeric_cell_is_located() {
    let err = ingest_csv(fixture("non_numeric.csv"), &ColumnMapping::default()).unwrap_err();
    assert!(matches!(&err, DataError::Parse { line: 5, column, .. } if column == "visit"), "{err}");
    assert!(err.to_string().contains("'x1'"));
}

#[test]
fn missing_treatment_column() {
    let err = ingest_csv(fixture("missing_treatment.csv"), &ColumnMapping::default()).unwrap_err();
    assert!(matches!(&err, DataError::Schema(m) if m.contains("'treatment'")), "{err}");
}

#[test]
fn custom_delimiter_and_mapping() {
    let mapping = ColumnMapping {
        delimiter: ';',
        features: vec!["f0".into()],
        outcomes: vec!["visit".into()],
        ..ColumnMapping::default()
    };
    let data = ingest_csv(fixture("six_rows_semicolon.csv"), &mapping).unwrap();
    assert_eq!(data.outcome_dim(), 1);
    assert_eq!(data.rows().iter().map(|r| r.outcome[0]).sum::<f64>(), 4.0);
    assert!(ingest_csv(fixture("six_rows_semicolon.csv"), &ColumnMapping::default()).is_err());
}

#[test]
fn declared_policy_count() {
    let text = "x,t,y\n1,0,1\n2,1,0\n";
    let mapping = |k| ColumnMapping {
        features: vec!["x".into()],
        treatment: "t".into(),
        outcomes: vec!["y".into()],
        n_policies: Some(k),
        delimiter: ',',
    };
    assert_eq!(ingest_reader(text.as_bytes(), &mapping(3)).unwrap().n_policies(), 3);
    assert!(matches!(ingest_reader(text.as_bytes(), &mapping(1)), Err(DataError::Schema(_))));
    let bad = "x,t,y\n1,0.5,1\n";
    assert!(matches!(ingest_reader(bad.as_bytes(), &mapping(2)), Err(DataError::Parse { line: 2, .. })));
}

#[test]
fn ingestion_is_deterministic() {
    let bytes = std::fs::read(fixture("six_rows.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.csv");
    std::fs::write(&copy, &bytes).unwrap();
    let a = ingest_csv(fixture("six_rows.csv"), &ColumnMapping::default()).unwrap();
    let b = ingest_csv(&copy, &ColumnMapping::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn too_many_buckets_for_feature() {
    let data = ingest_csv(fixture("six_rows.csv"), &ColumnMapping::default()).unwrap();
    // f1: five rows at 10.0 and one above; f3: five rows at the maximum 4.6.
    assert!(fit_bucketizer(&data, "f1", 2).is_ok());
    assert!(matches!(fit_bucketizer(&data, "f1", 3), Err(DataError::Bucketizer(_))));
    assert!(matches!(fit_bucketizer(&data, "f3", 2), Err(DataError::Bucketizer(_))));
    assert!(matches!(fit_bucketizer(&data, "nope", 2), Err(DataError::Schema(_))));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = ingest_csv(fixture("absent.csv"), &ColumnMapping::default()).unwrap_err();
    assert!(matches!(err, DataError::Io { .. }));
}
