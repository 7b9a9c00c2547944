use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use keytrap_core::keyforge::compute_keytag;

fn keytrap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keytrap"))
        .arg("-q")
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stderr(o)))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn forge_flagship_keys() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["forge", "--alg", "14", "--tag", "5353", "--count", "582", "--seed", "1"];
    let a = keytrap(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 582);
    for line in &lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(&f[3..7], ["DNSKEY", "256", "3", "14"]);
        let key = base64_decode(f[7]);
        let mut rdata = vec![1, 0, 3, 14];
        rdata.extend(key);
        assert_eq!(compute_keytag(&rdata), 5353);
    }
    let b = keytrap(&args, dir.path());
    assert_eq!(a.stdout, b.stdout);
}

fn base64_decode(s: &str) -> Vec<u8> {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    let mut bits = 0u32;
    let mut n = 0;
    let mut out = Vec::new();
    for c in s.bytes().filter(|&c| c != b'=') {
        bits = bits << 6 | ALPHABET.iter().position(|&a| a == c).unwrap() as u32;
        n += 6;
        if n >= 8 {
            n -= 8;
            out.push((bits >> n) as u8);
        }
    }
    out
}

#[test]
fn forge_rejects_zero_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = keytrap(&["forge", "--alg", "14", "--tag", "1", "--count", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn genzone_flagship_fits_and_oversize_names_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = keytrap(&["genzone", "keysigtrap", "-k", "582", "-s", "340", "--alg", "14", "--out-dir", "z"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["er.zone", "attack.er.zone", "graph.json", "fit.json", "manifest.json"] {
        assert!(dir.path().join("z").join(f).exists(), "{f}");
    }
    let o = keytrap(&["genzone", "lockcram", "-k", "600", "--alg", "14"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("589"), "{}", stderr(&o));
}

#[test]
fn genzone_minimal_sigjam() {
    let dir = tempfile::tempdir().unwrap();
    let o = keytrap(&["genzone", "sigjam", "-s", "1"], dir.path());
    assert!(o.status.success());
    let zone = stdout(&o);
    assert!(zone.contains("$ORIGIN attack.er."));
    assert_eq!(zone.matches(" IN RRSIG A ").count(), 1);
}

#[test]
fn validate_exit_codes_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(keytrap(&["genzone", "benign", "--out-dir", "b"], p).status.success());
    assert!(keytrap(&["genzone", "keysigtrap", "-k", "12", "-s", "9", "--out-dir", "k"], p).status.success());

    let o = keytrap(&["validate", "b/graph.json"], p);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["status"], "Secure");

    let o = keytrap(&["validate", "k/graph.json"], p);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["answer_counters"]["signature_attempts"], 108);

    let o = keytrap(&["validate", "k/graph.json", "--policy", "failures=16"], p);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&o)["answer_counters"]["signature_attempts"], 16);

    let o = keytrap(&["validate", "k/graph.json", "--crypto", "null", "--profile", "unbound"], p);
    assert_eq!(json(&o)["answer_counters"]["signature_attempts"], 6 * 108);
    assert!(json(&o)["stall_seconds"].as_f64().unwrap() > 0.0);

    let o = keytrap(&["validate", "missing.json"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hashtrap_chain_breaks() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(keytrap(&["genzone", "hashtrap", "-d", "4", "-k", "5", "--alg", "15", "--out-dir", "h"], p).status.success());
    let o = keytrap(&["validate", "h/graph.json"], p);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn simulate_bundled_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = keytrap(&["simulate", "--bundled", "unbound-single-shot", "--out-dir", "s"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let stall = json(&o)["longest_stall_seconds"].as_f64().unwrap();
    assert!((760.5..=1267.5).contains(&stall), "{stall}");
    let csv = std::fs::read_to_string(p.join("s/timeline.csv")).unwrap();
    assert!(csv.starts_with("time,sent,answered,lost,busy_threads,thread_0_busy\n"));

    let o = keytrap(&["replay", "s/manifest.json"], p);
    assert!(o.status.success(), "{}", stderr(&o));

    // tampering with an output is detected
    std::fs::write(p.join("s/timeline.csv"), "x").unwrap();
    let manifest = p.join("s/manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][1]["sha256"] = "00".into();
    std::fs::write(&manifest, m.to_string()).unwrap();
    let o = keytrap(&["replay", "s/manifest.json"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_empty_attack() {
    let dir = tempfile::tempdir().unwrap();
    let o = keytrap(&["simulate", "--bundled", "empty-attack"], dir.path());
    assert_eq!(json(&o)["loss_fraction"], 0.0);
}

#[test]
fn simulate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.json");
    std::fs::write(&f, "{\"profile\": \"Unbound\", \"duration\": 10,\n \"schedule\": [{\"time\": 1, \"count\": -1}]}").unwrap();
    let o = keytrap(&["simulate", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("schedule[0].count") && err.contains("line 2"), "{err}");
}

#[test]
fn notice_is_printed_without_quiet() {
    let o = Command::new(env!("CARGO_BIN_EXE_keytrap"))
        .args(["forge", "--alg", "13", "--tag", "7", "--count", "1"])
        .output()
        .unwrap();
    assert!(stderr(&o).contains("lab analysis only"));
}

#[test]
fn docs_match_generated_output() {
    let root = repo_root();
    let dir = tempfile::tempdir().unwrap();
    let check = |args: &[&str], file: &str| {
        let o = keytrap(args, dir.path());
        let on_disk = std::fs::read_to_string(root.join(file)).unwrap();
        assert_eq!(stdout(&o), on_disk, "{file} is stale; regenerate with keytrap {}", args.join(" "));
    };
    check(&["ciphers"], "docs/ciphers.md");
    check(&["ciphers", "--json"], "docs/ciphers.json");
    for w in ["spec", "scenario", "report", "outcome", "profile", "policy", "manifest"] {
        check(&["schema", w], &format!("docs/schemas/{w}.json"));
    }
}
