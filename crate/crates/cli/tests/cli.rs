use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")).to_path_buf()
}

fn skintone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skintone")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, images: &str) -> PathBuf {
    let o = skintone(&["synth", "--out", s(dir), "--images", images, "--size", "48"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    dir.join("manifest.json")
}

#[test]
fn analyze_writes_the_full_tree() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let manifest = fixtures().join("mini-corpus/manifest.json");
    let reference = fixtures().join("demo_reference.csv");
    let o = skintone(&["analyze", "--manifest", s(&manifest), "--out", s(&out), "--reference", s(&reference), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    for id in ["kr", "cn", "th", "jp"] {
        for f in ["palette.json", "strip_by_size.svg", "strip_by_lightness.svg", "gamut.json"] {
            assert!(out.join(id).join(f).is_file(), "{id}/{f}");
        }
        assert!(text(&o.stdout).contains(&format!("{id}: 25 images")));
    }
    for f in ["metrics.csv", "distances.csv", "scatter.svg", "polar.svg", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let distances = fs::read_to_string(out.join("distances.csv")).unwrap();
    assert_eq!(distances.lines().count(), 5);
}

#[test]
fn corrupt_images_give_partial_success() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(&dir.path().join("corpus"), "3");
    let victim = dir.path().join("corpus/cn/face_001.png");
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() / 3]).unwrap();

    let out = dir.path().join("out");
    let o = skintone(&["analyze", "--manifest", s(&manifest), "--out", s(&out), "--k", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("face_001.png"));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["skipped"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_k_fails_before_touching_disk() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never");
    let o = skintone(&["analyze", "--manifest", "/no/such/manifest.json", "--out", s(&out), "--k", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("k"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(skintone(&["analyze"]).status.code(), Some(1));
    assert_eq!(skintone(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(skintone(&["--version"]).status.code(), Some(0));
}

#[test]
fn help_lists_every_default() {
    let o = skintone(&["analyze", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = text(&o.stdout);
    for default in [
        "[default: 20]",
        "[default: 0.000001]",
        "[default: 300]",
        "[default: 32]",
        "[default: 0.6]",
        "[default: 0:50,300:360]",
        "[default: 10]",
        "[default: 3]",
        "[default: 36,31]",
        "[default: 39,48]",
        "[default: 200]",
        "[default: bbox]",
        "[default: circular]",
        "[default: cylinder]",
        "[default: 0.05]",
    ] {
        assert!(help.contains(default), "missing {default}\n{help}");
    }
    assert_eq!(help.matches("(study default)").count(), 5);
}

#[test]
fn compare_identical_palettes_is_zero() {
    let p = fixtures().join("demo_palette.json");
    let o = skintone(&["compare", s(&p), s(&p)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = text(&o.stdout);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "cohort_id,kr,kr_2");
    assert_eq!(rows[1], "kr,0.000000,0.000000");
    assert_eq!(rows[2], "kr_2,0.000000,0.000000");
}

#[test]
fn compare_four_palettes_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let manifest = fixtures().join("mini-corpus/manifest.json");
    assert_eq!(skintone(&["analyze", "--manifest", s(&manifest), "--out", s(&out)]).status.code(), Some(0));
    let files: Vec<PathBuf> = ["kr", "cn", "th", "jp"].iter().map(|id| out.join(id).join("palette.json")).collect();
    let csv_path = dir.path().join("d.csv");
    let mut args = vec!["compare"];
    args.extend(files.iter().map(|p| s(p)));
    args.extend(["--out", s(&csv_path)]);
    let o = skintone(&args);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(o.stderr.is_empty());
    let csv = text(&o.stdout);
    assert_eq!(csv, fs::read_to_string(&csv_path).unwrap());
    assert_eq!(csv, fs::read_to_string(out.join("distances.csv")).unwrap());
    let m: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').skip(1).map(String::from).collect()).collect();
    assert_eq!(m.len(), 4);
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row[i], "0.000000");
        for (j, v) in row.iter().enumerate() {
            assert_eq!(v, &m[j][i]);
        }
    }
}

#[test]
fn compare_names_the_malformed_file() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("broken.json");
    fs::write(&bad, "{\"cohort\": ").unwrap();
    let o = skintone(&["compare", s(&fixtures().join("demo_palette.json")), s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("broken.json"));
}

#[test]
fn compare_warns_on_config_mismatch() {
    let dir = TempDir::new().unwrap();
    let original = fixtures().join("demo_palette.json");
    let json = fs::read_to_string(&original).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let hash = v["config_hash"].as_str().unwrap();
    let other = dir.path().join("other.json");
    fs::write(&other, json.replace(hash, &"0".repeat(64))).unwrap();
    let o = skintone(&["compare", s(&original), s(&other)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stderr).contains("warning"));
}

#[test]
fn gamut_matches_the_golden_file() {
    let o = skintone(&["gamut", s(&fixtures().join("demo_palette.json")), s(&fixtures().join("demo_reference.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout), fs::read_to_string(fixtures().join("demo_gamut.golden.json")).unwrap());
}

#[test]
fn gamut_rejects_non_positive_epsilon() {
    for eps in ["0", "-0.1"] {
        let o = skintone(&["gamut", s(&fixtures().join("demo_palette.json")), s(&fixtures().join("demo_reference.csv")), &format!("--epsilon={eps}")]);
        assert_eq!(o.status.code(), Some(1), "{eps}");
        assert!(text(&o.stderr).contains("epsilon"));
    }
}

#[test]
fn palette_built_from_the_reference_is_fully_in_gamut() {
    let dir = TempDir::new().unwrap();
    let csv = fs::read_to_string(fixtures().join("demo_reference.csv")).unwrap();
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(header, ["label", "h", "s", "l"]);
    let entries: Vec<String> = rows
        .step_by(4)
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            format!("{{\"h\": {}, \"s\": {}, \"l\": {}, \"proportion\": 0.111111, \"count\": 1}}", f[1], f[2], f[3])
        })
        .collect();
    let n = entries.len();
    let palette = format!("{{\"cohort\": \"inside\", \"k\": {n}, \"seed\": 20, \"n_samples\": {n}, \"entries\": [{}]}}", entries.join(","));
    let path = dir.path().join("inside.json");
    fs::write(&path, palette).unwrap();
    let o = skintone(&["gamut", s(&path), s(&fixtures().join("demo_reference.csv")), "--epsilon", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["out_fraction_weighted"], 0.0);
}
