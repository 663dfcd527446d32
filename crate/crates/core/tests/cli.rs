use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dectext(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dectext"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_agnews(dir: &Path) {
    let topics = [
        ["world", "war", "election", "minister"],
        ["sports", "match", "team", "goal"],
        ["stock", "market", "shares", "profit"],
        ["software", "chip", "internet", "phone"],
    ];
    let mut csv = String::from("\"Class Index\",\"Title\",\"Description\"\n");
    for i in 0..80 {
        let w = &topics[i % 4];
        let title = format!("{} {} {} {} Today!", w[i % 4], w[(i / 4) % 4], w[(i / 16) % 4], w[(i + 1) % 4]);
        csv += &format!("\"{}\",\"{title}\",\"desc {i}\"\n", i % 4 + 1);
    }
    // an exact duplicate title, removed by preprocessing
    csv += "\"1\",\"world world world world Today!\",\"dup\"\n";
    fs::write(dir.join("ag.csv"), csv).unwrap();
}

#[test]
fn preprocess_embed_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_agnews(d);
    let o = dectext(
        &["preprocess", "--input", "ag.csv", "--format", "agnews", "--lowercase", "--strip-punctuation", "--out", "clean.jsonl"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let clean = fs::read_to_string(d.join("clean.jsonl")).unwrap();
    assert!(clean.lines().nth(1).unwrap().contains("today"));
    assert!(!clean.contains('!'));
    let docs = clean.lines().count() - 1;
    assert!(docs < 81, "duplicate kept");

    let o = dectext(&["embed", "--corpus", "clean.jsonl", "--dim", "32", "--out", "v.emb"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(&fs::read(d.join("v.emb")).unwrap()[..4], b"EMB1");

    fs::write(
        d.join("c.toml"),
        "[train]\nepochs = 3\nbatch_size = 40\nhead = \"kmeans\"\n[data]\nembeddings = \"v.emb\"\ncorpus = \"clean.jsonl\"\n",
    )
    .unwrap();
    let run = |out: &str| {
        let o = dectext(&["train", "--config", "c.toml", "--seed", "7", "--out", out, "--labels-out", "pred.txt"], d);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(d.join(out)).unwrap()
    };
    let strip = |s: String| s.lines().filter(|l| !l.contains("wall_time_secs")).collect::<Vec<_>>().join("\n");
    let a = strip(run("r1.json"));
    let b = strip(run("r2.json"));
    assert_eq!(a, b);

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r1.json")).unwrap()).unwrap();
    assert_eq!(json["trace"].as_array().unwrap().len(), 3);
    assert_eq!(json["config"]["seed"], 7);
    // echoed config re-parses to the config that ran
    let echoed: dectext::trainer::TrainConfig = serde_json::from_value(json["config"].clone()).unwrap();
    assert_eq!(echoed.epochs, 3);
    assert_eq!(echoed.seed, 7);

    let o = dectext(&["evaluate", "--pred", "pred.txt", "--truth", "pred.txt"], d);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["acc"], 1.0);
    assert_eq!(report["nmi"], 1.0);
}

#[test]
fn json_keys_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "0\n1\n1\n0\n").unwrap();
    fs::write(dir.path().join("t.txt"), "1\n0\n0\n0\n").unwrap();
    let o = dectext(&["evaluate", "--pred", "p.txt", "--truth", "t.txt"], dir.path());
    let s = String::from_utf8(o.stdout).unwrap();
    let keys = ["\"acc\"", "\"confusion\"", "\"mapping\"", "\"n\"", "\"nmi\""];
    let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
}

#[test]
fn sweep_over_the_temperature_grid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "[train]\ndataset = \"blobs\"\nepochs = 2\nbatch_size = 100\n[data.blobs]\nn = 100\n",
    )
    .unwrap();
    let o = dectext(
        &["sweep", "--config", "c.toml", "--axis", "tau", "--values", "0.4,0.5,0.6,0.7,0.8,0.9", "--jobs", "2", "--out", "t.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dataset,head,metric,0.4,0.5,0.6,0.7,0.8,0.9");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("blobs,SOM,NMI,"));
    assert!(lines[8].starts_with("blobs,KmeansR,ACC,"));
    assert!(!csv.contains('\r'));
    let table = dectext::trainer::SweepTable::from_csv(&csv).unwrap();
    assert_eq!(table.rows.len(), 8);
    assert!(table.rows.iter().all(|r| r.values.len() == 6));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = dectext(&["train", "--no-such-flag"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(dectext(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(dectext(&[], d).status.code(), Some(2));

    let o = dectext(&["evaluate", "--pred", "missing.txt", "--truth", "missing.txt"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.txt"));

    let o = dectext(&["train", "--config", "nope.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.toml"));

    fs::write(d.join("bad.toml"), "[train]\nepochz = 1\n").unwrap();
    let o = dectext(&["train", "--config", "bad.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epochz"), "{}", stderr(&o));

    fs::write(d.join("c.toml"), "[data.blobs]\nn = 40\n").unwrap();
    let o = dectext(&["sweep", "--config", "c.toml", "--axis", "tau", "--values", "0.5,1.5"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau"));

    assert_eq!(dectext(&["--help"], d).status.code(), Some(0));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dectext(&["selftest"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{out}");
}

#[test]
fn run_command_in_process() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dectext::cli::run_command(["dectext", "evaluate"], &mut out, &mut err);
    assert_eq!(code, 2);
    assert!(String::from_utf8_lossy(&err).contains("--pred"));
}
