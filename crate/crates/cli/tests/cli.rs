use fuzzdx_core::dsl::parse_lexicon;
use fuzzdx_core::kb::{KnowledgeSnapshot, SnapshotDiff};
use fuzzdx_core::learning::{read_log, replay};
use serde_json::Value;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fuzzdx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzdx")).args(args).env_remove("FUZZDX_CONFIG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = fuzzdx(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn diagnose_angina(extra: &[&str]) -> Value {
    let (kb, note, index) = (fixture("angina.kb"), fixture("angina_note.txt"), fixture("angina_index.jsonl"));
    let mut args = vec!["diagnose", "--kb", p(&kb), "--note", p(&note), "--index", p(&index), "--age", "58", "--sex", "male"];
    args.extend_from_slice(extra);
    json(&args)
}

#[test]
fn parse_reports_counts() {
    let out = fuzzdx(&["parse", p(&fixture("angina.kb"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("3 rules, 6 facts"));
    let report = json(&["parse", p(&fixture("angina.kb"))]);
    assert_eq!((report["rules"].as_u64(), report["facts"].as_u64()), (Some(3), Some(6)));

    let canonical = fuzzdx(&["parse", "--canonical", p(&fixture("respiratory.kb"))]);
    assert!(stdout(&canonical).contains("diagnosis(asthma) :- "));
}

#[test]
fn exit_codes() {
    let missing = fuzzdx(&["parse", "/nonexistent"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kb");
    std::fs::write(&bad, "diagnosis(x) :- symptom(a)@1.5.\n").unwrap();
    assert_eq!(fuzzdx(&["parse", p(&bad)]).status.code(), Some(1));

    assert_eq!(fuzzdx(&[]).status.code(), Some(2));
    assert_eq!(fuzzdx(&["parse", "--frobnicate", "x.kb"]).status.code(), Some(2));
    assert_eq!(fuzzdx(&["eval", "--kb", "a", "--data", "b", "--mode", "nope"]).status.code(), Some(2));
    assert_eq!(fuzzdx(&["diagnose", "--kb", "a"]).status.code(), Some(2));
    assert_eq!(fuzzdx(&["--help"]).status.code(), Some(0));
}

#[test]
fn diagnose_motivating_note() {
    let d = diagnose_angina(&["--priors-in-kb"]);
    let top = &d["candidates"][0];
    assert_eq!(top["disease"], "stable_angina");
    assert!((top["activation"].as_f64().unwrap() - 0.72).abs() < 1e-12);
    let total: f64 = d["candidates"].as_array().unwrap().iter().map(|c| c["posterior"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let no_priors = diagnose_angina(&[]);
    assert!(no_priors["candidates"][0].get("posterior").is_none());

    let human = fuzzdx(&[
        "diagnose",
        "--kb",
        p(&fixture("angina.kb")),
        "--note",
        p(&fixture("angina_note.txt")),
        "--explain",
    ]);
    assert!(human.status.success());
    assert!(stdout(&human).contains("Why stable angina?"));
}

#[test]
fn diagnose_with_separate_priors_and_symptoms() {
    let dir = tempfile::tempdir().unwrap();
    let priors = dir.path().join("priors.kb");
    std::fs::write(&priors, "prior(stable_angina, _, _, _, 0.01).\nprior(noncardiac_chest_pain, _, _, _, 0.09).\n").unwrap();
    let d = diagnose_angina(&["--priors", p(&priors)]);
    assert_eq!(d["candidates"][0]["disease"], "noncardiac_chest_pain");

    let s = json(&["diagnose", "--kb", p(&fixture("triage.kb")), "--symptoms", "fever, myalgia:0.9"]);
    assert_eq!(s["candidates"][0]["disease"], "influenza");
    assert!(s.get("extraction").is_none());
}

#[test]
fn config_file_sets_engine_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fuzzdx.toml");
    std::fs::write(&config, "[engine]\ntnorm = \"minimum\"\n").unwrap();
    let d = diagnose_angina(&["--config", p(&config)]);
    assert!((d["candidates"][0]["activation"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    let flag = diagnose_angina(&["--config", p(&config), "--tnorm", "product"]);
    assert!((flag["candidates"][0]["activation"].as_f64().unwrap() - 0.72).abs() < 1e-12);

    std::fs::write(&config, "[engine]\ncolour = 1\n").unwrap();
    let out = fuzzdx(&["--config", p(&config), "parse", p(&fixture("angina.kb"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_obeys_single_label_identities() {
    let (kb, data) = (fixture("triage.kb"), fixture("triage_cases.jsonl"));
    let report = json(&["eval", "--kb", p(&kb), "--data", p(&data), "--mode", "full_hybrid"]);
    assert_eq!(report["mode"], "full_hybrid");
    for m in report["metrics"]["metrics"].as_array().unwrap() {
        let k = m["k"].as_f64().unwrap();
        let acc = m["accuracy"].as_f64().unwrap();
        assert!((m["precision"].as_f64().unwrap() - acc / k).abs() < 1e-12);
        assert!((m["recall"].as_f64().unwrap() - acc).abs() < 1e-12);
        assert!((m["f1"].as_f64().unwrap() - 2.0 * acc / (k + 1.0)).abs() < 1e-12);
    }
    let again = json(&["eval", "--kb", p(&kb), "--data", p(&data), "--mode", "full_hybrid"]);
    assert_eq!(report, again);
    let all = json(&["eval", "--kb", p(&kb), "--data", p(&data), "--mode", "all"]);
    assert_eq!(all.as_array().unwrap().len(), 5);
}

#[test]
fn learn_writes_a_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("learned");
    let kb = fixture("triage.kb");
    let report = json(&["learn", "--kb", p(&kb), "--stream", p(&fixture("triage_cases.jsonl")), "--out", p(&out), "--passes", "3"]);
    assert_eq!(report["passes"].as_array().unwrap().len(), 3);

    let start = KnowledgeSnapshot::from_kb_text(&std::fs::read_to_string(&kb).unwrap(), Default::default(), 1).unwrap();
    let log = read_log(&std::fs::read_to_string(out.join("update_log.jsonl")).unwrap()).unwrap();
    assert_eq!(log.len() as u64, report["events"].as_u64().unwrap());
    let lexicon = parse_lexicon(&std::fs::read_to_string(out.join("snapshot.lexicon.tsv")).unwrap()).unwrap();
    let written =
        KnowledgeSnapshot::from_kb_text(&std::fs::read_to_string(out.join("snapshot.kb")).unwrap(), lexicon.clone(), 2).unwrap();
    let start = KnowledgeSnapshot::new(1, 0, start.rules().to_vec(), lexicon, start.priors().to_vec()).unwrap();
    assert_eq!(replay(&start, &log, 2).unwrap().content_hash(), written.content_hash());
    assert_eq!(written.content_hash(), report["content_hash"]);
}

#[test]
fn diff_files_and_store_audit() {
    let kb = fixture("angina.kb");
    let same: SnapshotDiff = serde_json::from_value(json(&["diff", p(&kb), p(&kb)])).unwrap();
    assert!(same.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let edited = dir.path().join("edited.kb");
    let text = std::fs::read_to_string(&kb).unwrap().replace("symptom(chest_pain)@0.8", "symptom(chest_pain)@0.5");
    std::fs::write(&edited, text).unwrap();
    std::fs::copy(fixture("angina.lexicon.tsv"), dir.path().join("edited.lexicon.tsv")).unwrap();
    let d: SnapshotDiff = serde_json::from_value(json(&["diff", p(&kb), p(&edited)])).unwrap();
    assert_eq!(d.weight_deltas.len(), 1);
    assert!(stdout(&fuzzdx(&["diff", p(&kb), p(&edited)])).contains("0.8 → 0.5"));

    let store = dir.path().join("store");
    json(&["init", "--kb", p(&kb), "--store", p(&store)]);
    let case = fixture("angina_case.json");
    let audit = json(&["audit", "--store", p(&store), "--case", p(&case), "--t1", "1", "--t2", "1"]);
    assert!(audit["changes"].as_array().unwrap().iter().all(|c| c["delta"].as_f64() == Some(0.0)));
    let stored: SnapshotDiff = serde_json::from_value(json(&["diff", "1", "1", "--store", p(&store)])).unwrap();
    assert!(stored.is_empty());
    let missing = fuzzdx(&["audit", "--store", p(&store), "--case", p(&case), "--t1", "1", "--t2", "4"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn index_round_trips_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("index.jsonl");
    let r = json(&["index", "--cases", p(&fixture("angina_cases.jsonl")), "--out", p(&out)]);
    assert_eq!(r["cases"], 10);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), std::fs::read_to_string(fixture("angina_index.jsonl")).unwrap());
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    json(&["init", "--kb", p(&fixture("angina.kb")), "--store", p(&store)]);
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_fuzzdx"))
        .args(["serve", "--store", p(&store), "--listen", &format!("127.0.0.1:{port}")])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut reply = None;
    while Instant::now() < deadline {
        if let Some(r) = http_get(port, "/snapshots") {
            reply = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let reply = reply.expect("server did not answer");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"head\":1"));
}
