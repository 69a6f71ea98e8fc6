use std::path::Path;

use fmapkit::formats::{
    decode_fmap, decode_soft_map, encode_fmap, encode_soft_map, read_fmap_binary, read_fmap_csv, read_pointmap, read_pointmap_checked,
    read_soft_map, read_trace, write_fmap_binary, write_fmap_csv, write_pointmap, write_soft_map, write_trace,
};
use fmapkit::mesh_io::{parse_mesh, read_mesh, write_off, MeshFormat};
use fmapkit::Error;
use fmapkit_core::adapt::TraceEntry;
use fmapkit_core::conversion::{pointmap_from_feature_rows, PointMap, PointMapMode, SoftMap};
use fmapkit_core::fmap::{FunctionalMap, LossWeights, Provenance};
use fmapkit_core::losses::LossReport;
use fmapkit_core::{shapes, Mat};
use proptest::prelude::*;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn bundled_meshes_match_their_generators() {
    for (name, mesh) in fmapkit::cli::builtin_meshes() {
        assert_eq!(read_mesh(data(&format!("{name}.off"))).unwrap(), mesh, "{name}");
    }
}

#[test]
fn off_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::smooth_deformation(&shapes::icosphere(2), 3, 0.1);
    let path = dir.path().join("m.off");
    write_off(&mesh, &path).unwrap();
    assert_eq!(read_mesh(&path).unwrap(), mesh);
}

fn as_obj(mesh: &fmapkit_core::mesh::TriangleMesh) -> String {
    let mut s = String::from("# exported\no mesh\n");
    for p in mesh.vertices() {
        s.push_str(&format!("v {:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    for f in mesh.faces() {
        s.push_str(&format!("f {}/1 {}/1 {}/1\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
}

fn as_ply(mesh: &fmapkit_core::mesh::TriangleMesh) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\ncomment test\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.n(),
        mesh.faces().len()
    );
    for p in mesh.vertices() {
        s.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    for f in mesh.faces() {
        s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    s
}

#[test]
fn obj_and_ply_agree_with_off() {
    let mesh = shapes::wavy_patch();
    let origin = Path::new("mem");
    assert_eq!(parse_mesh(&as_obj(&mesh), MeshFormat::Obj, origin).unwrap(), mesh);
    assert_eq!(parse_mesh(&as_ply(&mesh), MeshFormat::Ply, origin).unwrap(), mesh);
}

#[test]
fn unknown_extension_and_missing_file() {
    assert!(matches!(read_mesh("mesh.stl"), Err(Error::Validation(_))));
    assert!(matches!(read_mesh("/nonexistent/mesh.off"), Err(Error::Io { .. })));
}

#[test]
fn degenerate_mesh_is_a_validation_error() {
    // vertex 3 is not used by any face
    let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n5 5 5\n3 0 1 2\n";
    let err = parse_mesh(text, MeshFormat::Off, Path::new("flat.off")).unwrap_err();
    assert!(matches!(err, Error::Core(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn pointmap_round_trip_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.txt");
    let targets = vec![3, 0, 0, 2];
    write_pointmap(&targets, &path).unwrap();
    assert_eq!(read_pointmap(&path).unwrap(), targets);
    assert!(read_pointmap_checked(&path, 4, 4).is_ok());
    assert!(matches!(read_pointmap_checked(&path, 5, 4), Err(Error::Validation(_))));
    assert!(read_pointmap_checked(&path, 4, 3).is_err());
    std::fs::write(&path, "1\nx\n").unwrap();
    assert!(matches!(read_pointmap(&path), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn soft_maps_round_trip() {
    let f_x = Mat::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
    let f_y = Mat::from_fn(5, 3, |i, j| ((i * 5 + j) as f64 * 0.21).cos());
    let dir = tempfile::tempdir().unwrap();
    for mode in [PointMapMode::Softmax, PointMapMode::SoftmaxTop(3)] {
        let PointMap::Soft(map) = pointmap_from_feature_rows(&f_x, &f_y, mode, 0.5).unwrap() else {
            panic!("soft mode gave a hard map");
        };
        assert_eq!(decode_soft_map(&encode_soft_map(&map)).unwrap(), map);
        let path = dir.path().join("soft.bin");
        write_soft_map(&map, &path).unwrap();
        assert_eq!(read_soft_map(&path).unwrap(), map);
    }
    // rows that do not sum to one are rejected on read
    let bad = SoftMap::Dense(Mat::from_vec(1, 2, vec![0.5, 0.6]));
    assert!(decode_soft_map(&encode_soft_map(&bad)).is_err());
}

#[test]
fn trace_round_trip() {
    let w = LossWeights::default();
    let trace: Vec<TraceEntry> = (0..3)
        .map(|i| TraceEntry {
            step: i,
            lambda: 100.0 / (i + 1) as f64,
            gamma: 0.5 - 0.01 * i as f64,
            report: LossReport::new(1.0, 2.0, 3.0 - i as f64, 0.5, 0.25, &w),
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&trace, &path).unwrap();
    let read = read_trace(&path).unwrap();
    for (e, r) in trace.iter().zip(&read) {
        assert_eq!((e.step, e.lambda, e.gamma, e.report.total), *r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fmap_formats_round_trip_bitwise(
        k_y in 1usize..8,
        k_x in 1usize..8,
        seed in any::<u64>(),
        converted in any::<bool>(),
    ) {
        let m = Mat::from_fn(k_y, k_x, |i, j| {
            let v = (seed.wrapping_mul(31).wrapping_add((i * 17 + j) as u64) % 100_003) as f64;
            (v * 1.234_567e-3).sin() * 10f64.powi((i as i32 % 5) - 2)
        });
        let provenance = if converted { Provenance::ConvertedFromPointwise } else { Provenance::Solved };
        let c = FunctionalMap::new(m, provenance).unwrap();
        prop_assert_eq!(&decode_fmap(&encode_fmap(&c)).unwrap(), &c);

        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("c.bin");
        let csv = dir.path().join("c.csv");
        write_fmap_binary(&c, &bin).unwrap();
        write_fmap_csv(&c, &csv).unwrap();
        prop_assert_eq!(&read_fmap_binary(&bin).unwrap(), &c);
        prop_assert_eq!(&read_fmap_csv(&csv, provenance).unwrap(), &c);
    }

    #[test]
    fn truncated_fmap_bytes_are_rejected(k in 1usize..6, cut in 1usize..40) {
        let c = FunctionalMap::new(Mat::identity(k), Provenance::Solved).unwrap();
        let bytes = encode_fmap(&c);
        let cut = cut.min(bytes.len());
        prop_assert!(decode_fmap(&bytes[..bytes.len() - cut]).is_err());
    }
}
