//! End-to-end CLI behavior: exit codes, determinism, and the validate /
//! inspect surfaces.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use isim_forge_testkit::{structured_dataset, write_voc_dir};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isim-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn isim-forge")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Map of relative path -> file bytes for a whole directory tree.
fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.unwrap();
        if entry.file_type().is_file() {
            let rel = entry
                .path()
                .strip_prefix(dir)
                .unwrap()
                .display()
                .to_string();
            out.insert(rel, std::fs::read(entry.path()).unwrap());
        }
    }
    out
}

fn fitted_graph(dir: &Path) -> std::path::PathBuf {
    let voc = dir.join("voc");
    write_voc_dir(&structured_dataset(120, 9), &voc).unwrap();
    let graph = dir.join("graph.json");
    let out = run(&[
        "fit",
        "--annotations",
        voc.to_str().unwrap(),
        "--out",
        graph.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    graph
}

#[test]
fn fit_generate_validate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());

    let bundles = dir.path().join("bundles");
    let out = run(&[
        "generate",
        "--scdkg",
        graph.to_str().unwrap(),
        "--out",
        bundles.to_str().unwrap(),
        "--count",
        "5",
        "--seed",
        "7",
    ]);
    assert_code(&out, 0);
    assert!(bundles.join("manifest.json").exists());
    assert_eq!(tree_bytes(&bundles).len(), 5 * 3 + 1);

    let out = run(&["validate", bundles.to_str().unwrap()]);
    assert_code(&out, 0);
}

#[test]
fn generate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "generate",
            "--scdkg",
            graph.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--count",
            "4",
            "--seed",
            "123",
        ]);
        assert_code(&out, 0);
        trees.push(tree_bytes(&out_dir));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn worker_count_never_changes_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let mut trees = Vec::new();
    for (name, jobs) in [("j1", "1"), ("j8", "8")] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "generate",
            "--jobs",
            jobs,
            "--scdkg",
            graph.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--count",
            "12",
            "--seed",
            "55",
        ]);
        assert_code(&out, 0);
        trees.push(tree_bytes(&out_dir));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn corrupted_png_fails_validation_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let bundles = dir.path().join("bundles");
    assert_code(
        &run(&[
            "generate",
            "--scdkg",
            graph.to_str().unwrap(),
            "--out",
            bundles.to_str().unwrap(),
            "--count",
            "3",
            "--seed",
            "1",
        ]),
        0,
    );
    // Zero out one raster: its objects lose their gray regions.
    let png = walkdir::WalkDir::new(&bundles)
        .into_iter()
        .filter_map(Result::ok)
        .find(|e| e.path().extension().is_some_and(|x| x == "png"))
        .unwrap();
    let size = image::open(png.path()).unwrap().to_luma8();
    let blank = image::GrayImage::new(size.width(), size.height());
    blank.save(png.path()).unwrap();

    let out = run(&["validate", bundles.to_str().unwrap()]);
    assert_code(&out, 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn resume_never_duplicates_manifest_entries() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let bundles = dir.path().join("bundles");
    for count in ["3", "6"] {
        let out = run(&[
            "generate",
            "--scdkg",
            graph.to_str().unwrap(),
            "--out",
            bundles.to_str().unwrap(),
            "--count",
            count,
            "--seed",
            "42",
            "--resume",
        ]);
        assert_code(&out, 0);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bundles.join("manifest.json")).unwrap())
            .unwrap();
    let entries = manifest["bundles"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let ids: std::collections::BTreeSet<&str> = entries
        .iter()
        .map(|b| b["bundle_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids.len(), 6);
}

#[test]
fn inspect_prints_table_and_json_dump_parses() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let out = run(&["inspect", "--scdkg", graph.to_str().unwrap()]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("harbor"), "{stdout}");
    assert!(stdout.contains("interdependency"), "{stdout}");

    let out = run(&["inspect", "--scdkg", graph.to_str().unwrap(), "--json"]);
    assert_code(&out, 0);
    let dump: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(dump["classes"].as_array().unwrap().len(), 6);
    assert_eq!(dump["p_id"].as_array().unwrap().len(), 6);
}

#[test]
fn fidelity_on_exported_bundles_runs() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let bundles = dir.path().join("bundles");
    assert_code(
        &run(&[
            "generate",
            "--scdkg",
            graph.to_str().unwrap(),
            "--out",
            bundles.to_str().unwrap(),
            "--count",
            "150",
            "--seed",
            "8",
        ]),
        0,
    );
    let out = run(&[
        "fidelity",
        "--scdkg",
        graph.to_str().unwrap(),
        "--bundles",
        bundles.to_str().unwrap(),
        "--json",
    ]);
    assert_code(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_layouts"].as_u64(), Some(150));
}

#[test]
fn usage_and_io_errors_use_reserved_exit_codes() {
    // Unknown flag: clap usage error.
    let out = run(&["generate", "--nope"]);
    assert_code(&out, 2);
    // Bad image size: usage error from validation.
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let out = run(&[
        "generate",
        "--scdkg",
        graph.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "--count",
        "1",
        "--image-size",
        "800by800",
    ]);
    assert_code(&out, 2);
    // Missing graph file: IO error.
    let out = run(&["inspect", "--scdkg", "/nonexistent/graph.json"]);
    assert_code(&out, 3);
}

#[test]
fn run_log_carries_seed_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fitted_graph(dir.path());
    let out = run(&[
        "generate",
        "--scdkg",
        graph.to_str().unwrap(),
        "--out",
        dir.path().join("g").to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "99",
    ]);
    assert_code(&out, 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed=99"), "{stderr}");
    assert!(stderr.contains("scdkg="), "{stderr}");
    assert!(stderr.contains("config="), "{stderr}");
}
