use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fmapkit::formats::{read_pointmap, write_pointmap};
use fmapkit::mesh_io::write_off;
use fmapkit_core::shapes;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmapkit")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "fmapkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small closed test meshes: a base sphere-like shape and smooth deformations.
fn small_meshes(dir: &Path, count: u64) -> Vec<PathBuf> {
    let base = shapes::smooth_deformation(&shapes::icosphere(2), 7, 0.15);
    let mut paths = vec![dir.join("base.off")];
    write_off(&base, &paths[0]).unwrap();
    for i in 0..count {
        let p = dir.join(format!("deformed_{i}.off"));
        write_off(&shapes::smooth_deformation(&base, 50 + i, 0.05), &p).unwrap();
        paths.push(p);
    }
    paths
}

fn pair_list(dir: &Path, name: &str, meshes: &[PathBuf]) -> PathBuf {
    let list: String = meshes[1..]
        .iter()
        .map(|m| format!("{} {}\n", meshes[0].file_name().unwrap().to_str().unwrap(), m.file_name().unwrap().to_str().unwrap()))
        .collect();
    let path = dir.join(name);
    fs::write(&path, format!("# x y\n{list}")).unwrap();
    path
}

#[test]
fn match_emits_both_maps_and_lists_both_losses() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    for (source, expected) in [("features", "map_features.txt"), ("fmap", "map_fmap.txt")] {
        let out = dir.path().join(source);
        ok(&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out), "--k", "10", "--adapt-steps", "2", "--map-source", source]);
        for f in ["map.txt", "map_features.txt", "map_fmap.txt", "fmap.csv", "fmap.bin", "losses.csv", "trace.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        assert_eq!(fs::read(out.join("map.txt")).unwrap(), fs::read(out.join(expected)).unwrap());
        let losses = fs::read_to_string(out.join("losses.csv")).unwrap();
        let labels: Vec<&str> = losses.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(labels, ["soft", "features", "fmap"]);
        let fmap = fmapkit::formats::read_fmap_binary(out.join("fmap.bin")).unwrap();
        assert_eq!((fmap.k_target(), fmap.k_source()), (10, 10));
    }
}

#[test]
fn match_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = ["--k", "8", "--adapt-steps", "3", "--refine-to", "12"];
    ok(&[&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&a)][..], &common].concat());
    ok(&[&["--jobs", "1", "match", s(&meshes[0]), s(&meshes[1]), "--out", s(&b)][..], &common].concat());
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "fmap_refined.csv"));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn eval_without_ground_truth_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let out = dir.path().join("out");
    let result = run(&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out), "--eval"]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("--gt"));
    assert!(!out.exists());
}

#[test]
fn match_with_ground_truth_writes_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let n = fmapkit::mesh_io::read_mesh(&meshes[0]).unwrap().n();
    let gt = dir.path().join("gt.txt");
    write_pointmap(&(0..n).collect::<Vec<_>>(), &gt).unwrap();
    let out = dir.path().join("out");
    ok(&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out), "--k", "10", "--adapt-steps", "0", "--eval", "--gt", s(&gt)]);
    let summary = fs::read_to_string(out.join("eval_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out.join("pck_features.csv").exists() && out.join("pck_fmap.csv").exists());
    assert!(!out.join("trace.csv").exists());

    // a ground truth of the wrong length is rejected before writing
    let short = dir.path().join("short.txt");
    write_pointmap(&[0, 1, 2], &short).unwrap();
    let out2 = dir.path().join("out2");
    let result = run(&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out2), "--eval", "--gt", s(&short)]);
    assert_eq!(result.status.code(), Some(2));
    assert!(!out2.exists());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let out = dir.path().join("out");
    let missing = run(&["match", "/nonexistent.off", s(&meshes[1]), "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_gamma = run(&["match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out), "--gamma0", "1.5"]);
    assert_eq!(bad_gamma.status.code(), Some(2));
    let config = dir.path().join("bad.toml");
    fs::write(&config, "k = \"thirty\"\n").unwrap();
    let bad_config = run(&["--config", s(&config), "match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out)]);
    assert_eq!(bad_config.status.code(), Some(2));
    let garbled = dir.path().join("garbled.off");
    fs::write(&garbled, "OFF\n3 1 0\n0 0 0\n1 0\n").unwrap();
    let parse = run(&["match", s(&garbled), s(&meshes[1]), "--out", s(&out)]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("garbled.off:4"));
    assert!(!out.exists());
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let config = dir.path().join("c.toml");
    fs::write(&config, "k = 6\n[adapt]\nsteps = 0\n[solver]\nmask = \"standard\"\n").unwrap();
    let out = dir.path().join("out");
    ok(&["--config", s(&config), "match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out)]);
    let fmap = fmapkit::formats::read_fmap_binary(out.join("fmap.bin")).unwrap();
    assert_eq!(fmap.k_target(), 6);
    assert!(!out.join("trace.csv").exists());
    ok(&["--config", s(&config), "match", s(&meshes[0]), s(&meshes[1]), "--out", s(&out), "--k", "9"]);
    assert_eq!(fmapkit::formats::read_fmap_binary(out.join("fmap.bin")).unwrap().k_target(), 9);
}

#[test]
fn adapt_with_zero_steps_has_one_trace_row_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 2);
    let list = pair_list(dir.path(), "pairs.txt", &meshes);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["adapt", s(&list), "--out", s(&a), "--k", "8", "--adapt-steps", "0"]);
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert_eq!(trace.lines().next().unwrap(), "step,lambda,gamma,total,bij,orth,couple,contrast");

    ok(&["adapt", s(&list), "--out", s(&a), "--k", "8", "--adapt-steps", "5"]);
    ok(&["--jobs", "3", "adapt", s(&list), "--out", s(&b), "--k", "8", "--adapt-steps", "5"]);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(fs::read(a.join("params.toml")).unwrap(), fs::read(b.join("params.toml")).unwrap());
    let params = fmapkit::formats::read_adapted_params(a.join("params.toml")).unwrap();
    assert_eq!(params.collection, "pairs");
    assert!(params.final_loss <= params.initial_loss);
}

#[test]
fn adapt_rejects_bad_pair_lists() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "# nothing\n").unwrap();
    assert_eq!(run(&["adapt", s(&empty), "--out", s(dir.path())]).status.code(), Some(2));
    let odd = dir.path().join("odd.txt");
    fs::write(&odd, "a.off\n").unwrap();
    assert_eq!(run(&["adapt", s(&odd), "--out", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn precompute_caches_once_and_repairs_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 1);
    let cache = dir.path().join("cache");
    let first = ok(&["--cache-dir", s(&cache), "precompute", s(&meshes[0]), "--k", "10"]);
    assert!(first.contains("computed"));
    let entries = fmapkit::cache::list_entries(&cache).unwrap();
    assert_eq!(entries.len(), 1);
    let again = ok(&["--cache-dir", s(&cache), "precompute", s(&meshes[0]), "--k", "10"]);
    assert!(again.contains("cached"));

    ok(&["--cache-dir", s(&cache), "precompute", s(&meshes[0]), s(&meshes[1]), "--k", "10"]);
    assert_eq!(fmapkit::cache::list_entries(&cache).unwrap().len(), 2);

    fs::write(&entries[0], b"FMBC broken").unwrap();
    let out = run(&["--cache-dir", s(&cache), "precompute", s(&meshes[0]), "--k", "10"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("recomputed"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupted cache entry"));
    assert!(ok(&["--cache-dir", s(&cache), "precompute", s(&meshes[0]), "--k", "10"]).contains("cached"));

    assert_eq!(run(&["precompute", s(&meshes[0])]).status.code(), Some(2));
}

#[test]
fn eval_command_scores_a_map() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = small_meshes(dir.path(), 0);
    let n = fmapkit::mesh_io::read_mesh(&meshes[0]).unwrap().n();
    let gt = dir.path().join("gt.txt");
    write_pointmap(&(0..n).collect::<Vec<_>>(), &gt).unwrap();
    let out = dir.path().join("eval");
    let stdout = ok(&["eval", "--mesh-x", s(&meshes[0]), "--pred", s(&gt), "--gt", s(&gt), "--out", s(&out), "--label", "perfect"]);
    assert!(stdout.contains("auc 1.0000"));
    let summary = fs::read_to_string(out.join("eval_summary_perfect.csv")).unwrap();
    assert_eq!(summary.lines().nth(1).unwrap(), format!("perfect,0.0,1.0,0,{n}"));
    assert!(out.join("pck_perfect.svg").exists());

    let short = dir.path().join("short.txt");
    write_pointmap(&[0], &short).unwrap();
    let r = run(&["eval", "--mesh-x", s(&meshes[0]), "--pred", s(&short), "--gt", s(&gt), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn verify_prints_and_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    let stdout = ok(&["verify", "--k", "2,4", "--seeds", "2", "--lemma-instances", "3", "--out", s(&out)]);
    assert!(stdout.contains("18/18 passed"), "{stdout}");
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(out.join("verify.txt").exists());
}

#[test]
fn report_aggregates_curves_and_collections() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results");
    let report = dir.path().join("report");

    // empty input
    fs::create_dir_all(&results).unwrap();
    assert_eq!(run(&["report", s(&results), "--out", s(&report)]).status.code(), Some(2));

    // one evaluation result: one curve
    let meshes = small_meshes(dir.path(), 2);
    let n = fmapkit::mesh_io::read_mesh(&meshes[0]).unwrap().n();
    let gt = dir.path().join("gt.txt");
    write_pointmap(&(0..n).collect::<Vec<_>>(), &gt).unwrap();
    ok(&["eval", "--mesh-x", s(&meshes[0]), "--pred", s(&gt), "--gt", s(&gt), "--out", s(&results.join("eval"))]);
    ok(&["report", s(&results), "--out", s(&report)]);
    let svg = fs::read_to_string(report.join("pck.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(!report.join("gamma.svg").exists());

    // two collections: two labelled bars
    let list_a = pair_list(dir.path(), "alpha.txt", &meshes[..2]);
    let list_b = pair_list(dir.path(), "beta.txt", &[meshes[0].clone(), meshes[2].clone()]);
    ok(&["adapt", s(&list_a), "--out", s(&results.join("alpha")), "--k", "8", "--adapt-steps", "3"]);
    ok(&["adapt", s(&list_b), "--out", s(&results.join("beta")), "--k", "8", "--adapt-steps", "3", "--gamma0", "0.2"]);
    // malformed files are skipped and listed
    fs::write(results.join("pck_broken.csv"), "threshold,fraction\n0.0,abc\n").unwrap();
    fs::write(results.join("trace_empty.csv"), "").unwrap();
    let out = run(&["report", s(&results), "--out", s(&report)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pck_broken.csv"));
    let gamma = fs::read_to_string(report.join("gamma.svg")).unwrap();
    assert_eq!(gamma.matches("class=\"bar\"").count(), 2);
    assert!(gamma.contains(">alpha<") && gamma.contains(">beta<"));
    assert!(report.join("lambda.svg").exists());
    let text = fs::read_to_string(report.join("report.txt")).unwrap();
    let footer = text.split("skipped (malformed):").nth(1).expect("footer present");
    assert!(footer.contains("pck_broken.csv") && footer.contains("trace_empty.csv"));
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.contains("params,alpha/params.toml,alpha,gamma,"));
    assert!(csv.contains("# skipped pck_broken.csv"));
}

#[test]
fn self_match_of_a_bundled_mesh_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/patch.off");
    let out = dir.path().join("out");
    ok(&["match", s(&mesh), s(&mesh), "--out", s(&out), "--adapt-steps", "0"]);
    let map = read_pointmap(out.join("map.txt")).unwrap();
    let identity = map.iter().enumerate().filter(|(i, t)| i == *t).count();
    assert!(identity as f64 >= 0.99 * map.len() as f64);
}
