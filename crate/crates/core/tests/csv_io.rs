use std::io::Write;

use nalgebra::DMatrix;
use tvvar::series::{load_csv, save_csv, CsvOptions, TimeColumn};
use tvvar::{SeriesFrame, TvvarError};

#[test]
fn file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let vals = DMatrix::from_row_slice(3, 2, &[0.1, -2.5e-7, 3.0, 1.0 / 3.0, -0.0, 123456.789]);
    let frame = SeriesFrame::from_matrix(vals).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    save_csv(&frame, &a).unwrap();
    let loaded = load_csv(&a, &CsvOptions::default()).unwrap();
    assert_eq!(loaded.values(), frame.values());
    save_csv(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn named_time_column_and_selected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "day,ibm,spx,gold\n1,0.1,0.2,0.3\n2,0.4,0.5,0.6").unwrap();
    let opts = CsvOptions { time_column: TimeColumn::Named("day".into()), columns: Some(vec!["spx".into(), "ibm".into()]) };
    let frame = load_csv(&path, &opts).unwrap();
    assert_eq!(frame.labels(), &["spx".to_string(), "ibm".to_string()]);
    assert_eq!(frame.observation(2).as_slice(), &[0.5, 0.4]);
    assert_eq!(frame.times(), &["1".to_string(), "2".to_string()]);
}

#[test]
fn missing_file_is_io_error() {
    let err = load_csv("/nonexistent/file.csv", &CsvOptions::default()).unwrap_err();
    assert!(matches!(err, TvvarError::Io(_)));
}
