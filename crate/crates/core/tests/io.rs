use bdlab::dynamics::{run, GrowthScheme, RunOptions};
use bdlab::io::{decode_field, encode_field, export_trajectory, read_field, write_field, write_field_csv, CsvWriter};
use bdlab::presets::InitPreset;
use bdlab::{make_grid, Error, Field, GridSpec, ModelParams};
use proptest::prelude::*;
use std::path::Path;

#[test]
fn header_layout() {
    let g = make_grid(GridSpec::new(2, 1.5, 16)).unwrap();
    let f = Field::from_fn(g, |x| x[0] - 2.0 * x[1]);
    let bytes = encode_field(&f, 0.25);
    assert_eq!(&bytes[0..4], b"BDF1");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
    assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1.5);
    assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.25);
    assert_eq!(bytes.len(), 32 + 8 * 256);
    // row-major: second value is cell (0, 1)
    assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), f.values()[1]);
}

#[test]
fn malformed_snapshots_are_rejected() {
    let g = make_grid(GridSpec::new(1, 1.0, 16)).unwrap();
    let bytes = encode_field(&Field::zeros(g), 0.0);
    let p = Path::new("x.bdf");
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_field(&bad, p), Err(Error::Snapshot { .. })));
    assert!(decode_field(&bytes[..40], p).is_err());
    assert!(decode_field(&bytes[..10], p).is_err());
}

#[test]
fn files_round_trip_and_leave_no_partials() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(GridSpec::new(1, 2.0, 32)).unwrap();
    let f = Field::from_fn(g, |x| x[0].sin());
    let path = dir.path().join("f.bdf");
    write_field(&path, &f, 1.0).unwrap();
    let (back, t) = read_field(&path).unwrap();
    assert_eq!((back, t), (f.clone(), 1.0));

    let csv = write_field_csv(&dir.path().join("f.csv"), &f).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,x,value");
    assert_eq!(lines.len(), 33);
    let cols: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols, vec![0.0, g.coord(0), f.values()[0]]);
    for e in std::fs::read_dir(dir.path()).unwrap() {
        assert!(!e.unwrap().path().to_string_lossy().ends_with(".partial"));
    }
}

#[test]
fn csv_stays_partial_until_finished() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let mut w = CsvWriter::create(&path, "a,b").unwrap();
    w.row("1,2").unwrap();
    assert!(!path.exists());
    assert_eq!(std::fs::read_to_string(dir.path().join("t.csv.partial")).unwrap(), "a,b\n1,2\n");
    w.finish().unwrap();
    assert!(path.exists() && !dir.path().join("t.csv.partial").exists());
}

#[test]
fn trajectory_export_writes_manifest_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let m = ModelParams::default();
    let g = make_grid(GridSpec::new(1, 8.0, 128)).unwrap();
    let s = InitPreset { width: 0.8, offset: 0.75, ..Default::default() }.build(g, &m).unwrap();
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &s, &RunOptions::new(0.1, 0.05)).unwrap();
    export_trajectory(dir.path(), &traj, m.gamma).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "step,t,dt,mass_u,mass_v,max_p");
    assert_eq!(lines.len(), 1 + traj.snapshots.len());
    let last: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(last[0].parse::<usize>().unwrap(), traj.steps.len());
    assert_eq!(last[1].parse::<f64>().unwrap(), 0.1);
    let (u, t) = read_field(&dir.path().join("u_00002.bdf")).unwrap();
    assert_eq!(&u, &traj.final_state().u);
    assert_eq!(t, 0.1);
}

proptest! {
    #[test]
    fn encode_decode_round_trip(values in prop::collection::vec(-1e300f64..1e300, 16), t in -1e3f64..1e3) {
        let g = make_grid(GridSpec::new(1, 3.0, 16)).unwrap();
        let f = Field::from_values(g, values).unwrap();
        let (back, tb) = decode_field(&encode_field(&f, t), Path::new("mem")).unwrap();
        prop_assert_eq!(back, f);
        prop_assert_eq!(tb, t);
    }
}
