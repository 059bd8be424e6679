use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const BIN: &str = env!("CARGO_BIN_EXE_trecdl");

fn trecdl(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = trecdl(args);
    assert!(
        out.status.success(),
        "trecdl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One small generated collection shared by every test in this file.
fn collection() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("collection");
        ok(&["-o", s(&dir), "synth", "--docs", "300", "--topics", "6"]);
        (tmp, dir)
    })
    .1
}

fn runs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .collect();
    v.sort();
    v
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn synth_writes_a_complete_collection_with_manifest() {
    let c = collection();
    for f in ["corpus.tsv", "topics.tsv", "oracle.qrels", "sparse.qrels", "official.qrels", "runs.meta"] {
        assert!(c.join(f).is_file(), "{f} missing");
    }
    assert_eq!(runs(c).len(), 5);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "synth");
    assert_eq!(m["parameters"]["docs"], 300);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.contains(&"official.qrels"));
    assert!(outputs.contains(&"runs/bm25_base.run"));
    assert!(m["outputs"].as_array().unwrap().iter().all(|o| o["sha256"].as_str().unwrap().len() == 64));
}

#[test]
fn lou_writes_one_row_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lou");
    ok(&["-o", s(&out), "lou", "--collection", s(collection()), "--seeds", "10"]);
    let rows = lines(&out.join("lou.tsv"));
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("trial\tseed\tall_map_tau"));
    for (i, row) in rows[1..].iter().enumerate() {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(cols[0], (i + 1).to_string());
        assert_eq!(cols[1], (i + 1).to_string());
        for tau in [cols[2], cols[4], cols[6]] {
            let v: f64 = tau.parse().unwrap();
            assert!((-1.0..=1.0).contains(&v));
        }
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"], serde_json::json!([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]));
}

#[test]
fn budgets_rows_follow_the_official_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    ok(&[
        "-o",
        s(&out),
        "budgets",
        "--collection",
        s(collection()),
        "--criterion",
        "heuristic",
        "--criterion",
        "budget",
        "--budget",
        "40",
        "--seeds",
        "2",
    ]);
    let rows = lines(&out.join("budgets.tsv"));
    assert_eq!(rows.len(), 4);
    let cell = |r: usize, c: usize| rows[r].split('\t').nth(c).unwrap().to_owned();
    assert_eq!(cell(1, 0), "official");
    assert_eq!(cell(1, 5), "-");
    assert_eq!(cell(2, 0), "heuristic");
    assert_eq!(cell(3, 0), "budget_40");
    let official: usize = lines(&collection().join("official.qrels")).len();
    assert_eq!(cell(1, 1), format!("{official}.0"));
    // six topics, at least 40 judgments each
    assert!(cell(3, 2).parse::<usize>().unwrap() >= 240);
}

#[test]
fn evaluate_reads_runs_and_writes_the_report() {
    let c = collection();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let topics = tmp.path().join("eval.txt");
    let first: String = lines(&c.join("official.qrels"))[0].split_whitespace().next().unwrap().to_owned();
    std::fs::write(&topics, format!("# one topic\n{first}\n")).unwrap();
    let qrels = c.join("official.qrels");
    let mut args = vec!["-o", s(&out), "--json", "evaluate", "--qrels", s(&qrels), "--eval-topics", s(&topics)];
    let rs = runs(c);
    args.push("--run");
    args.extend(rs.iter().map(String::as_str));
    let stdout = ok(&args);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["topics"], serde_json::json!([first]));
    assert_eq!(json["means"].as_object().unwrap().len(), 5);
    let report = lines(&out.join("report.tsv"));
    assert!(report.iter().any(|l| l.contains("bm25_rm3")));
    // duplicated run scores the same as the run it copies
    assert_eq!(json["means"]["bm25_base"], json["means"]["bm25_copy"]);
}

#[test]
fn compare_and_plot_data_write_their_tables() {
    let c = collection();
    let tmp = tempfile::tempdir().unwrap();
    let qrels = c.join("official.qrels");
    let out = tmp.path().join("cmp");
    let stdout = ok(&[
        "-o",
        s(&out),
        "--json",
        "compare",
        "--run-a",
        s(&c.join("runs/bm25_rm3.run")),
        "--run-b",
        s(&c.join("runs/bm25_base.run")),
        "--qrels",
        s(&qrels),
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let n = json["wins"].as_u64().unwrap() + json["losses"].as_u64().unwrap() + json["ties"].as_u64().unwrap();
    assert_eq!(lines(&out.join("deltas.tsv")).len() as u64, n + 1);

    let out = tmp.path().join("plots");
    let rs = runs(c);
    let mut args = vec!["-o", s(&out), "plot-data", "--qrels", s(&qrels), "--pair", "bm25_rm3", "bm25_base", "--run"];
    args.extend(rs.iter().map(String::as_str));
    ok(&args);
    for f in ["heatmap.tsv", "scatter.tsv", "agreement.tsv", "per_query.tsv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(lines(&out.join("scatter.tsv")).len(), 6);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["-o", s(&out), "simulate", "--collection", s(collection()), "--criterion", "heuristic", "--seed", "4", "--traces"]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["trial.json", "trial.qrels", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn index_search_and_pool_chain_together() {
    let c = collection();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ix");
    ok(&["-o", s(&out), "index", "--corpus", s(&c.join("corpus.tsv"))]);
    ok(&["-o", s(&out), "search", "--index", s(&out.join("index.json")), "--topics", s(&c.join("topics.tsv")), "--tag", "mine", "--k", "50"]);
    let run = lines(&out.join("mine.run"));
    let topics: BTreeSet<&str> = run.iter().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(topics.len(), 6);
    // only documents sharing a query term are retrieved
    assert!(run.len() <= 6 * 50);
    assert!(run[0].ends_with(" mine"));

    let pool_out = tmp.path().join("pool");
    ok(&["-o", s(&pool_out), "pool", "--run", s(&out.join("mine.run")), "--sparse", s(&c.join("sparse.qrels")), "--all-topics", "--depth", "5"]);
    let pools: BTreeSet<(String, String)> = lines(&pool_out.join("pools.tsv"))[1..]
        .iter()
        .map(|l| {
            let (t, d) = l.split_once('\t').unwrap();
            (t.to_owned(), d.to_owned())
        })
        .collect();
    // the run is written best first, so its first five lines per topic are the top five
    let mut expected = BTreeSet::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for l in &run {
        let f: Vec<&str> = l.split(' ').collect();
        let n = seen.entry(f[0].to_owned()).or_default();
        if *n < 5 {
            expected.insert((f[0].to_owned(), f[2].to_owned()));
        }
        *n += 1;
    }
    let sparse: Vec<(String, String)> = lines(&c.join("sparse.qrels"))
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_owned(), f[2].to_owned())
        })
        .collect();
    // --all-topics pools the topics that have sparse labels
    let labelled: BTreeSet<&String> = sparse.iter().map(|(t, _)| t).collect();
    expected.retain(|(t, _)| labelled.contains(t));
    expected.extend(sparse.iter().cloned());
    assert_eq!(pools, expected);
    assert_eq!(lines(&pool_out.join("median_rr.tsv")).len(), labelled.len() + 1);
}

#[test]
fn exit_codes_separate_usage_from_bad_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(trecdl(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(trecdl(&["-o", s(&out), "lou", "--collection", s(collection()), "--seeds", "0"]).status.code(), Some(2));
    assert_eq!(trecdl(&["-o", s(&out), "simulate", "--collection", s(collection()), "--criterion", "budget"]).status.code(), Some(2));

    let bad = tmp.path().join("bad.qrels");
    std::fs::write(&bad, "1000 0 D00003\n").unwrap();
    let v = trecdl(&["-o", s(&out), "validate", "--qrels", s(&bad)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&v.stdout).contains("FAIL"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["ok"], false);

    let e = trecdl(&["-o", s(&out), "evaluate", "--run", s(&tmp.path().join("missing.run")), "--qrels", s(&bad)]);
    assert_eq!(e.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&e.stderr).contains("missing.run"));
}
