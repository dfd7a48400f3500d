use std::fs;
use std::process::Command;

use esfem::assembly::NodalField;
use esfem::mesh::build_icosphere;
use esfem::runner::{parse_config, run_experiment, write_vtk_to, ERRORS_HEADER};
use vtkio::model::{Attribute, DataSet, IOBuffer, Piece};
use vtkio::Vtk;

fn read_vtk(path: &std::path::Path) -> (Vec<f64>, Vec<(String, Vec<f64>)>) {
    let vtk = Vtk::import(path).expect("legacy VTK parses");
    let DataSet::UnstructuredGrid { pieces, .. } = vtk.data else {
        panic!("not an unstructured grid")
    };
    let Piece::Inline(piece) = &pieces[0] else {
        panic!("piece not inline")
    };
    let points = match &piece.points {
        IOBuffer::F64(v) => v.clone(),
        other => panic!("points stored as {:?}", other.scalar_type()),
    };
    let scalars = piece
        .data
        .point
        .iter()
        .map(|a| match a {
            Attribute::DataArray(d) => {
                let vals = match &d.data {
                    IOBuffer::F64(v) => v.clone(),
                    other => panic!("scalars stored as {:?}", other.scalar_type()),
                };
                (d.name.clone(), vals)
            }
            _ => panic!("unexpected field attribute"),
        })
        .collect();
    (points, scalars)
}

#[test]
fn vtk_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut mesh = build_icosphere(2).unwrap();
    for p in &mut mesh.nodes {
        p[0] *= 1.0 / 3.0;
    }
    let n = mesh.n_nodes();
    let u = NodalField::constant(n, 1.0);
    let w: NodalField = (0..n).map(|i| (i as f64).sin()).collect::<Vec<_>>().into();
    let path = dir.path().join("s.vtk");
    let mut out = Vec::new();
    write_vtk_to(&mut out, &mesh, &u, &w, 0.25).unwrap();
    fs::write(&path, out).unwrap();

    let (points, scalars) = read_vtk(&path);
    let flat: Vec<f64> = mesh.nodes.iter().flat_map(|p| [p[0], p[1], p[2]]).collect();
    assert_eq!(points, flat);
    assert_eq!(scalars[0].0, "u");
    assert!(scalars[0].1.iter().all(|&v| v == 1.0));
    assert_eq!(scalars[1].0, "w");
    assert_eq!(scalars[1].1, w.coeffs);
}

#[test]
fn ellipsoid_run_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment":"ch-ellipsoid","levels":[1],"T":0.01,"snapshot_every":25,"output_dir":{:?}}}"#,
        dir.path()
    );
    let cfg = parse_config(&text).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let names: Vec<String> = report
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for want in [
        "config.json",
        "mesh.off",
        "snapshot_000000.vtk",
        "snapshot_000100.vtk",
        "energy.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    assert_eq!(names.iter().filter(|n| n.ends_with(".vtk")).count(), 5);

    let csv = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,energy,mass,min_angle"));
    assert_eq!(lines.count(), 101);

    let (_, scalars) = read_vtk(&dir.path().join("snapshot_000100.vtk"));
    let hist = &report.histories[0].2;
    assert_eq!(hist.len(), 101);
    assert!(scalars[0].1.iter().all(|v| v.is_finite()));
}

#[test]
fn identical_config_gives_identical_csv() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{"experiment":"ch-dumbbell","levels":[1],"T":0.002,"seed":9,"output_dir":{:?}}}"#,
            dir.path()
        );
        run_experiment(&parse_config(&text).unwrap()).unwrap();
        fs::read(dir.path().join("energy.csv")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn linear_run_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment":"linear4th","levels":[1,2],"output_dir":{:?}}}"#,
        dir.path()
    );
    run_experiment(&parse_config(&text).unwrap()).unwrap();
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], ERRORS_HEADER);
    assert_eq!(lines.len(), 3);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), 10);
    assert_eq!(first[3], "");
    let second: Vec<&str> = lines[2].split(',').collect();
    let eoc: f64 = second[3].parse().unwrap();
    assert!(eoc > 0.5, "{eoc}");
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_esfem");
    let dir = tempfile::tempdir().unwrap();

    let bad = Command::new(bin).args(["--experiment", "bogus"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"experiment":"linear4th","colour":1}"#).unwrap();
    let unknown = Command::new(bin).arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let negative = Command::new(bin)
        .args(["--experiment", "ch-ellipsoid", "--T", "-1"])
        .output()
        .unwrap();
    assert_eq!(negative.status.code(), Some(2));

    fs::write(&cfg, r#"{"experiment":"ch-ellipsoid","levels":[3]}"#).unwrap();
    let ok = Command::new(bin)
        .arg("--config")
        .arg(&cfg)
        .args(["--levels", "1", "--T", "0.001", "--tau", "0.0005", "--output-dir"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let written = fs::read_to_string(dir.path().join("out/config.json")).unwrap();
    let back = parse_config(&written).unwrap();
    assert_eq!(back.levels, vec![1]);
    assert_eq!(back.tau, Some(0.0005));
}
