use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::process::{Child, ChildStderr, Command, Output, Stdio};

fn spim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spim"))
}

fn run(args: &[&str]) -> Output {
    spim().args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

struct Server {
    child: Child,
    addr: String,
    stderr: BufReader<ChildStderr>,
}

impl Server {
    fn start(config: &Path) -> Server {
        let mut child = spim()
            .args(["serve", "--config"])
            .arg(config)
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        let mut stderr = BufReader::new(child.stderr.take().unwrap());
        let mut line = String::new();
        stderr.read_line(&mut line).unwrap();
        let addr = line
            .strip_prefix("listening on ")
            .and_then(|rest| rest.split_whitespace().next())
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_owned();
        Server { child, addr, stderr }
    }

    /// Sends SIGTERM and returns the exit status and remaining stderr.
    fn stop(mut self) -> (std::process::ExitStatus, String) {
        Command::new("kill")
            .args(["-TERM", &self.child.id().to_string()])
            .status()
            .unwrap();
        let status = self.child.wait().unwrap();
        let mut rest = String::new();
        self.stderr.read_to_string(&mut rest).unwrap();
        (status, rest)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn setup(dir: &Path, mode: &str) -> (Server, std::path::PathBuf) {
    write(dir, "people.csv", "key,name,city\n1,ann,oslo\n2,bo,rome\n3,cy,lima\n");
    let server_cfg = write(
        dir,
        "server.conf",
        &format!("listen=127.0.0.1:0\ntokens=s3cret\nstore=people.csv\nmode={mode}\ninstrumentation=on\n"),
    );
    let server = Server::start(&server_cfg);
    let client_cfg = write(
        dir,
        "client.conf",
        &format!(
            "server={}\nclient_id=t\ntoken=s3cret\ncache=dc.txt\nmode={mode}\nreplica_store=people.csv\n",
            server.addr
        ),
    );
    (server, client_cfg)
}

#[test]
fn version_is_one_line() {
    let out = run(&["--version"]);
    assert!(out.status.success());
    let v = text(&out.stdout);
    assert_eq!(v.lines().count(), 1);
    assert!(v.trim().ends_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    for args in [&["frobnicate"][..], &["query", "--bogus"], &[], &["query", "--config", "x", "--table", "t", "--from", "a", "--to", "1"]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_fixtures_passes() {
    let out = run(&["verify-fixtures"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn query_against_dead_server() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = write(dir.path(), "c.conf", &format!("server=127.0.0.1:{port}\ntoken=x\n"));
    let out = spim()
        .args(["query", "--table", "records", "--from", "1", "--to", "5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(text(&out.stderr).contains("CONNECTION_FAILED"));
}

#[test]
fn serve_query_trace_and_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let (server, client_cfg) = setup(dir.path(), "spim");
    let query = |render: &str| {
        spim()
            .args(["query", "--table", "people", "--from", "1", "--to", "2", "--trace", "--render", render, "--config"])
            .arg(&client_cfg)
            .output()
            .unwrap()
    };

    let first = query("text");
    assert_eq!(first.status.code(), Some(0), "{}", text(&first.stderr));
    assert_eq!(text(&first.stdout), "key  name  city\n1    ann   oslo\n2    bo    rome\n");
    let steps: Vec<String> = text(&first.stderr).lines().map(str::to_owned).collect();
    assert_eq!(steps, ["S01", "S02", "S03", "S04", "S08", "S09", "S10", "S11", "S12", "S13", "S14", "S15"]);

    // Second run reads the persisted cache file and never reaches the server.
    let second = query("json");
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(text(&second.stderr).lines().count(), 7);
    assert!(text(&second.stdout).starts_with("[{\"key\":1,\"fields\":{\"name\":\"ann\""));

    let html = query("html");
    assert!(text(&html.stdout).starts_with("<table><thead>"));

    let (status, rest) = server.stop();
    assert!(status.success());
    assert!(rest.contains("sc_requests=1 "), "{rest}");
    assert!(rest.contains("cost_units="), "{rest}");
}

#[test]
fn query_error_responses_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client_cfg) = setup(dir.path(), "spim");
    let out = spim()
        .args(["query", "--table", "nope", "--from", "1", "--to", "2", "--config"])
        .arg(&client_cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(text(&out.stderr).contains("NOT_FOUND"));

    let bad = write(dir.path(), "bad.conf", &format!("server={}\ntoken=wrong\n", _server.addr));
    let out = spim()
        .args(["query", "--table", "people", "--from", "1", "--to", "2", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("UNAUTHORIZED"));
}

#[test]
fn dmvc_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client_cfg) = setup(dir.path(), "dmvc");
    let out = spim()
        .args(["query", "--table", "people", "--from", "2", "--to", "3", "--config"])
        .arg(&client_cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout).lines().count(), 3);
}

#[test]
fn mashup_across_two_servers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (sa, _) = setup(a.path(), "spim");
    let (sb, _) = setup(b.path(), "spim");
    let cfg = write(
        a.path(),
        "mashup.conf",
        &format!(
            "token=s3cret\nrender=json\npart.east={},people,1,2\npart.west={},people,2,3\n",
            sa.addr, sb.addr
        ),
    );
    let out = spim().args(["mashup", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert_eq!(body.matches("\"key\":").count(), 4);
    assert_eq!(body.matches("\"_source\":\"east\"").count(), 2);
    assert_eq!(body.matches("\"_source\":\"west\"").count(), 2);

    let out = spim().args(["mashup", "--render", "text", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(text(&out.stdout).lines().count(), 5);
}

#[test]
fn mashup_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", "token=x\npart.a=127.0.0.1:1,people,1\n");
    let out = spim().args(["mashup", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn stats_prints_counters() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "people.csv", "key,name\n1,a\n2,b\n");
    let cfg = write(dir.path(), "s.conf", "store=people.csv\nmode=dmvc\n");
    let out = spim()
        .args(["stats", "--table", "people", "--from", "1", "--to", "2", "--repeat", "3", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    for line in [
        "mode=dmvc",
        "requests=3",
        "cache_hits=2",
        "cm_cache_scans=3",
        "cm_ds_scans=1",
        "sm_cache_scans=1",
        "sm_ds_scans=1",
        "sync_messages=1",
    ] {
        assert!(body.lines().any(|l| l == line), "missing {line} in\n{body}");
    }
}

#[test]
fn bench_small_sweep_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.conf", "from=100\nto=300\nstep=100\nseed=3\noutdir=out\n");
    let out = spim().args(["bench", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for f in ["table1.csv", "table2.csv", "plotdata.tsv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let t1 = std::fs::read_to_string(dir.path().join("out/table1.csv")).unwrap();
    assert!(t1.contains("store_fetch,300,600,300,50.00"));

    let bad = write(dir.path(), "bad.conf", "from=10\nto=5\n");
    let out = spim().args(["bench", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.conf", "listen=127.0.0.1:0\nstore=missing.csv\n");
    let out = spim().args(["serve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("tokens"));
}
