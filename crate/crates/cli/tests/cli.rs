//! End-to-end runs of the `alphaloop` binary on small synthetic panels.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"
[paths]
panel = "data/panel.csv"
benchmark = "data/benchmark.csv"
out = "out"

[split]
is_start = "2016-01-01"
is_end = "2016-12-31"
oos_start = "2017-01-01"
oos_end = "2017-12-31"

[synth]
n_stocks = 40
n_days = 480
junk_stocks = 4

[campaign]
rounds = 2

[aggregation.gbdt]
n_trees = 10

[aggregation.walk_forward]
train_window = 100
refit_every = 60
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Workspace { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_alphaloop"))
            .current_dir(self.dir.path())
            .args(args)
            .args(["--config", "run.toml"])
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    /// The column header of a stamped table.
    fn header(&self, rel: &str) -> String {
        let text = self.read(rel);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# alphaloop config_hash="), "{rel} is not stamped");
        lines.next().unwrap().to_string()
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn column(ws: &Workspace, rel: &str, name: &str) -> Vec<String> {
    let text = ws.read(rel);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().to_string()).collect()
}

#[test]
fn full_pipeline_writes_every_table() {
    let ws = Workspace::new(CONFIG);
    for cmd in ["synth", "ingest", "discover", "backtest", "aggregate", "attribute"] {
        ws.ok(&[cmd]);
    }
    assert_eq!(ws.header("out/table1.csv"), "Screen,Obs,Stocks");
    assert_eq!(ws.header("out/table3.csv"), "Factor,Sharpe,IC,ICIR,ICL,ICLIR,Sortino,Calmar,Annual Ret,Max DD");
    assert_eq!(ws.header("out/table4.csv"), "Factor,CAPM α,FF3 α,FF5 α,FF6 α");
    assert_eq!(ws.header("out/table5.csv"), "Portfolio,Period Ret. (%),Ann. Ret. (%),Ann. Vol. (%),Sharpe,Max DD (%),N");
    assert_eq!(ws.header("out/table6.csv"), "Portfolio,CAPM α,FF3 α,FF5 α,FF6 α");
    assert_eq!(ws.header("out/table7.csv"), "Portfolio,Period Return (%),Ann. Sharpe,N Days");
    assert!(ws.header("out/table8.csv").starts_with("Portfolio,H1,H2,"));
    assert_eq!(
        ws.header("out/table9.csv"),
        "Quarter,Avg Turnover (%),Gross Ret (%),Net Ret (%),Gross Sharpe,Net Sharpe"
    );
    for f in ["library.json", "state.json", "experiments.jsonl", "factors.svg", "models.svg", "attribution.json"] {
        assert!(ws.path(&format!("out/{f}")).exists(), "missing {f}");
    }
    let table6 = ws.read("out/table6.csv");
    assert!(table6.contains("Long-Short,") && table6.contains("Long-Only,"));
    assert!(!table6.lines().skip(2).any(|l| l.starts_with("Long") && l.contains("NA")), "{table6}");
}

#[test]
fn reruns_are_byte_identical() {
    let a = Workspace::new(CONFIG);
    let b = Workspace::new(CONFIG);
    for ws in [&a, &b] {
        for cmd in ["synth", "ingest", "discover", "backtest"] {
            ws.ok(&[cmd]);
        }
    }
    for f in ["data/panel.csv", "out/experiments.jsonl", "out/library.json", "out/table3.csv", "out/table7.csv"] {
        assert!(a.read(f) == b.read(f), "{f} differs between runs");
    }
}

#[test]
fn resume_matches_uninterrupted_run() {
    let full = Workspace::new(CONFIG);
    let split = Workspace::new(&CONFIG.replace("rounds = 2", "rounds = 1"));
    for ws in [&full, &split] {
        ws.ok(&["synth"]);
        ws.ok(&["ingest"]);
        ws.ok(&["discover"]);
    }
    fs::write(split.path("run.toml"), CONFIG).unwrap();
    split.ok(&["discover", "--resume"]);
    let body = |ws: &Workspace, f: &str| ws.read(f).lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&full, "out/experiments.jsonl"), body(&split, "out/experiments.jsonl"));
}

#[test]
fn replay_reproduces_the_library() {
    let ws = Workspace::new(CONFIG);
    ws.ok(&["synth"]);
    ws.ok(&["ingest"]);
    ws.ok(&["discover"]);
    let first = ws.read("out/library.json");
    fs::copy(ws.path("out/experiments.jsonl"), ws.path("recorded.jsonl")).unwrap();
    ws.ok(&["discover", "--replay", "recorded.jsonl"]);
    assert_eq!(first, ws.read("out/library.json"));
}

#[test]
fn missing_config_names_the_path() {
    let ws = Workspace::new(CONFIG);
    let out = Command::new(env!("CARGO_BIN_EXE_alphaloop"))
        .current_dir(ws.dir.path())
        .args(["ingest", "--config", "nowhere.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.toml"), "{}", stderr(&out));
}

#[test]
fn missing_panel_names_the_path() {
    let ws = Workspace::new(CONFIG);
    let out = ws.run(&["ingest"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("panel.csv"), "{}", stderr(&out));
}

#[test]
fn missing_benchmark_fails_attribution() {
    let ws = Workspace::new(CONFIG);
    for cmd in ["synth", "ingest", "discover", "backtest"] {
        ws.ok(&[cmd]);
    }
    fs::remove_file(ws.path("data/benchmark.csv")).unwrap();
    let out = ws.run(&["attribute"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("benchmark.csv"), "{}", stderr(&out));
}

#[test]
fn zero_rounds_give_an_empty_library() {
    let ws = Workspace::new(&CONFIG.replace("rounds = 2", "rounds = 0"));
    ws.ok(&["synth"]);
    ws.ok(&["ingest"]);
    ws.ok(&["discover"]);
    let lib: serde_json::Value = serde_json::from_str(&ws.read("out/library.json")).unwrap();
    assert_eq!(lib["data"].as_array().map(Vec::len), Some(0));
    ws.ok(&["backtest"]);
    assert_eq!(ws.read("out/table3.csv").lines().count(), 2);
    assert!(!ws.run(&["aggregate"]).status.success());
}

#[test]
fn zero_cost_leaves_net_equal_to_gross() {
    let ws = Workspace::new(CONFIG);
    for cmd in ["synth", "ingest", "discover"] {
        ws.ok(&[cmd]);
    }
    ws.ok(&["aggregate", "--cost-bps", "0"]);
    let gross = column(&ws, "out/composite_returns.csv", "long_short");
    let net = column(&ws, "out/composite_returns.csv", "net");
    assert!(!gross.is_empty());
    assert_eq!(gross, net);

    ws.ok(&["aggregate", "--cost-bps", "10"]);
    let net = column(&ws, "out/composite_returns.csv", "net");
    assert_ne!(gross, net);
}

#[test]
fn overrides_are_validated() {
    let ws = Workspace::new(CONFIG);
    for bad in [
        vec!["synth", "--cost-bps", "-1"],
        vec!["synth", "--model", "forest"],
        vec!["synth", "--split", "2017-01-01,2016-01-01,2018-01-01,2019-01-01"],
    ] {
        let out = ws.run(&bad);
        assert!(!out.status.success(), "{bad:?} was accepted");
        assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
    }
}

#[test]
fn seed_override_changes_outputs() {
    let ws = Workspace::new(CONFIG);
    ws.ok(&["synth"]);
    let a = ws.read("data/panel.csv");
    ws.ok(&["synth", "--seed", "9"]);
    let b = ws.read("data/panel.csv");
    assert_ne!(a, b);
    assert!(Path::new(&ws.path("data/benchmark.csv")).exists());
}

#[test]
fn api_key_never_reaches_outputs() {
    const SECRET: &str = "sk-test-4f1c9b0e";
    let ws = Workspace::new(CONFIG);
    ws.ok(&["synth"]);
    ws.ok(&["ingest"]);
    let out = Command::new(env!("CARGO_BIN_EXE_alphaloop"))
        .current_dir(ws.dir.path())
        .env("ALPHALOOP_LLM_API_KEY", SECRET)
        .args(["discover", "--config", "run.toml", "--llm-endpoint", "http://127.0.0.1:9/v1/chat"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!String::from_utf8_lossy(&out.stdout).contains(SECRET));
    assert!(!stderr(&out).contains(SECRET));
    for entry in fs::read_dir(ws.path("out")).unwrap() {
        let bytes = fs::read(entry.unwrap().path()).unwrap();
        assert!(!String::from_utf8_lossy(&bytes).contains(SECRET));
    }
}

#[test]
fn shipped_config_is_valid() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.toml");
    let cfg = alphaloop_core::config::RunConfig::load(&path).unwrap();
    cfg.validate().unwrap();
}
