use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sanim::ingest::{save_graph, SynthConfig};
use sanim::{build_graph, NodeId};

fn sanim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sanim"))
        .current_dir(dir)
        .env_remove("SANIM_THREADS")
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sanim(dir, args);
    assert!(
        out.status.success(),
        "sanim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    sanim(dir, args).status.code().expect("exited normally")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn triangle(dir: &Path) -> PathBuf {
    let g = build_graph(
        3,
        [
            (NodeId(0), NodeId(1)),
            (NodeId(1), NodeId(2)),
            (NodeId(2), NodeId(0)),
        ],
        [],
        false,
    )
    .unwrap();
    let path = dir.join("triangle.graph");
    save_graph(&g, &path).unwrap();
    path
}

fn fixture_40(dir: &Path) -> PathBuf {
    let g = SynthConfig::new(40, 0.1, 30, 0.08, 17)
        .activity_types(2)
        .generate()
        .unwrap();
    let path = dir.join("forty.graph");
    save_graph(&g, &path).unwrap();
    path
}

#[test]
fn ingest_writes_graph_ids_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("social.tsv"),
        "alice\tbob\nbob\tcarol\ncarol\tdave\ndave\terin\n",
    )
    .unwrap();
    fs::write(
        d.join("ratings.tsv"),
        "alice\tbook\t5\nbob\tbook\t4\ncarol\tbook\t1\ncarol\tfilm\t4\nerin\tfilm\t3\nbroken line\n",
    )
    .unwrap();
    let out = sanim(
        d,
        &[
            "ingest",
            "--social",
            "social.tsv",
            "--ratings",
            "ratings.tsv",
            "--lenient",
            "--out",
            "g.graph",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "g.graph",
        "g.graph.ids.tsv",
        "g.graph.report.txt",
        "g.graph.manifest.json",
    ] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let ids = fs::read_to_string(d.join("g.graph.ids.tsv")).unwrap();
    assert_eq!(ids.lines().count(), 5);
    let report = fs::read_to_string(d.join("g.graph.report.txt")).unwrap();
    assert!(report.lines().all(|l| l.contains(" = ")));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("g.graph.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "ingest");
    assert_eq!(manifest["argv"][0], "ingest");

    // The low rating is filtered, so each product links exactly two users.
    let graph = sanim::ingest::load_graph(&d.join("g.graph")).unwrap();
    assert_eq!(graph.node_count(), 5);
    assert_eq!(graph.edge_count(), 4);
    assert_eq!(graph.hyperedge_count(), 2);

    // Malformed input without --lenient is a usage/input error.
    assert_eq!(
        code(
            d,
            &[
                "ingest",
                "--social",
                "social.tsv",
                "--ratings",
                "ratings.tsv",
                "--out",
                "h.graph"
            ]
        ),
        2
    );

    ok(
        d,
        &[
            "ingest",
            "--social",
            "social.tsv",
            "--extract-bfs",
            "3",
            "--bfs-start",
            "0",
            "--out",
            "b.graph",
        ],
    );
    assert_eq!(
        sanim::ingest::load_graph(&d.join("b.graph"))
            .unwrap()
            .node_count(),
        3
    );
    assert!(fs::read_to_string(d.join("b.graph.report.txt"))
        .unwrap()
        .contains("bfs_nodes = 3"));
}

#[test]
fn three_cycle_centrality() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = triangle(d);
    fs::write(d.join("seeds.txt"), "0\n").unwrap();
    for method in ["exact", "truncated"] {
        let stdout = ok(
            d,
            &[
                "estimate",
                "--graph",
                s(&g),
                "--seeds",
                "seeds.txt",
                "--method",
                method,
                "-L",
                "60",
                "--out",
                "h.csv",
            ],
        );
        assert!(stdout.starts_with("centrality "), "{stdout}");
        let rows = csv_rows(&d.join("h.csv"));
        let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        assert_eq!(h[0], 1.0);
        assert!((h[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((h.iter().sum::<f64>() - 5.0 / 3.0).abs() < 1e-12);
    }
    ok(
        d,
        &[
            "estimate",
            "--graph",
            s(&g),
            "--seeds",
            "seeds.txt",
            "-L",
            "30",
            "-R",
            "20000",
            "--out",
            "mc.csv",
        ],
    );
    let h1: f64 = csv_rows(&d.join("mc.csv"))[1][1].parse().unwrap();
    assert!((h1 - 1.0 / 3.0).abs() < 0.02, "{h1}");
}

#[test]
fn baseline_and_optimized_select_the_same_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = fixture_40(d);
    let common = [
        "--graph",
        s(&g),
        "--k",
        "5",
        "--alpha",
        "0.3,0.2",
        "-L",
        "6",
        "-R",
        "30",
        "--seed",
        "9",
    ];
    let mut base = vec!["select", "--algorithm", "baseline", "--out", "base.csv"];
    base.extend(common);
    let mut opt = vec!["select", "--algorithm", "optimized", "--out", "opt.csv"];
    opt.extend(common);
    ok(d, &base);
    ok(d, &opt);
    let a = csv_rows(&d.join("base.csv"));
    let b = csv_rows(&d.join("opt.csv"));
    assert_eq!(a.len(), 5);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x[0], y[0]);
        assert_eq!(x[1], y[1]);
        let (gx, gy): (f64, f64) = (x[2].parse().unwrap(), y[2].parse().unwrap());
        assert!((gx - gy).abs() < 1e-9);
    }
    // A select CSV is accepted as a seed list.
    ok(
        d,
        &[
            "simulate",
            "--graph",
            s(&g),
            "--seeds",
            "opt.csv",
            "--alpha",
            "0.3,0.2",
            "--simulations",
            "200",
            "--out",
            "sim.csv",
        ],
    );
    let rows = csv_rows(&d.join("sim.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2].parse::<f64>().unwrap() >= 5.0);
}

#[test]
fn simulate_compare_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = fixture_40(d);
    fs::write(d.join("a.txt"), "0\n1\n").unwrap();
    fs::write(d.join("b.txt"), "2\n").unwrap();
    let stdout = ok(
        d,
        &[
            "simulate",
            "--graph",
            s(&g),
            "--seeds",
            "a.txt",
            "--compare",
            "b.txt",
            "--simulations",
            "500",
            "--out",
            "cmp.csv",
        ],
    );
    assert!(stdout.contains("improvement ratio"));
    let rows = csv_rows(&d.join("cmp.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "compare");

    ok(
        d,
        &[
            "export-weighted",
            "--graph",
            s(&g),
            "--alpha",
            "0.5",
            "--out",
            "w.tsv",
        ],
    );
    let text = fs::read_to_string(d.join("w.tsv")).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 3);
        let w: f64 = f[2].parse().unwrap();
        assert!(w > 0.0 && w <= 0.5 + 1e-12);
    }
}

#[test]
fn bench_rows_and_empty_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "bench",
            "--sizes",
            "50,100",
            "--alphas",
            "0,0.5",
            "--ks",
            "3",
            "-R",
            "10",
            "--simulations",
            "50",
            "--out",
            "b.csv",
        ],
    );
    let rows = csv_rows(&d.join("b.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 7 && !r[6].is_empty()));
    ok(d, &["bench", "--sizes", "--out", "empty.csv"]);
    assert_eq!(
        fs::read_to_string(d.join("empty.csv")).unwrap(),
        "n,alpha,k,algorithm,wall_time_seconds,estimated_centrality,spread\n"
    );
}

#[test]
fn replay_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = fixture_40(d);
    fs::write(d.join("seeds.txt"), "3\n7\n").unwrap();
    let runs: [&[&str]; 3] = [
        &[
            "select",
            "--graph",
            s(&g),
            "--k",
            "4",
            "--alpha",
            "0.4",
            "--epsilon",
            "0.4",
            "--out",
            "sel.csv",
        ],
        &[
            "estimate",
            "--graph",
            s(&g),
            "--seeds",
            "seeds.txt",
            "--out",
            "est.csv",
        ],
        &[
            "simulate",
            "--graph",
            s(&g),
            "--seeds",
            "seeds.txt",
            "--simulations",
            "300",
            "--seed",
            "4",
            "--out",
            "sim.csv",
        ],
    ];
    for args in runs {
        ok(d, args);
        let out = d.join(args[args.len() - 1]);
        let first = fs::read(&out).unwrap();
        fs::remove_file(&out).unwrap();
        let manifest = format!("{}.manifest.json", out.display());
        ok(d, &["replay", &manifest]);
        assert_eq!(
            fs::read(&out).unwrap(),
            first,
            "{:?} differs on replay",
            out
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = triangle(d);
    fs::write(d.join("seeds.txt"), "0\n").unwrap();
    // Parameter domain errors, before any data is read.
    assert_eq!(
        code(
            d,
            &[
                "select",
                "--graph",
                "missing.graph",
                "--k",
                "1",
                "--c",
                "1.5",
                "--out",
                "x.csv"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "select",
                "--graph",
                "missing.graph",
                "--k",
                "1",
                "--alpha",
                "0.7,0.6",
                "--out",
                "x.csv"
            ]
        ),
        2
    );
    // Clap parse errors.
    assert_eq!(
        code(
            d,
            &["select", "--graph", s(&g), "--k", "0", "--out", "x.csv"]
        ),
        2
    );
    assert_eq!(code(d, &["no-such-command"]), 2);
    // Input problems.
    assert_eq!(
        code(
            d,
            &[
                "select",
                "--graph",
                "missing.graph",
                "--k",
                "1",
                "--out",
                "x.csv"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &["select", "--graph", s(&g), "--k", "4", "--out", "x.csv"]
        ),
        2
    );
    fs::write(d.join("bad.txt"), "zero\n").unwrap();
    assert_eq!(
        code(
            d,
            &[
                "estimate",
                "--graph",
                s(&g),
                "--seeds",
                "bad.txt",
                "--out",
                "x.csv"
            ]
        ),
        2
    );
    // Output and resource failures.
    assert_eq!(
        code(
            d,
            &[
                "select",
                "--graph",
                s(&g),
                "--k",
                "1",
                "--out",
                "no/such/dir/x.csv"
            ]
        ),
        1
    );
    assert_eq!(
        code(
            d,
            &[
                "select",
                "--graph",
                s(&g),
                "--k",
                "1",
                "--memory-budget",
                "8",
                "--out",
                "x.csv"
            ]
        ),
        1
    );
}

#[test]
fn threads_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = fixture_40(d);
    ok(
        d,
        &[
            "--threads",
            "2",
            "select",
            "--graph",
            s(&g),
            "--k",
            "2",
            "--out",
            "a.csv",
        ],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_sanim"))
        .current_dir(d)
        .env("SANIM_THREADS", "1")
        .args(["select", "--graph", s(&g), "--k", "2", "--out", "b.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(d.join("a.csv")).unwrap(),
        fs::read(d.join("b.csv")).unwrap()
    );
}
