use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use xclick_core::evaluation::{load_manifest, ManifestEntry};
use xclick_core::geometry::{infer_roles, iou_masks, simulate_extreme_clicks, BinaryMask, Point};
use xclick_core::protocol::{Event, EventSink};
use xclick_core::synthetic::{square_scene, write_demo_dataset, write_scene};

fn xclick(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xclick")).args(args).output().unwrap()
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into(), String::from_utf8_lossy(&o.stderr).into())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn segment_modes_and_missing_edges() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = square_scene(64, 16, 47);
    write_scene(d, "sq", "square", &scene).unwrap();
    let clicks = serde_json::to_string(&simulate_extreme_clicks(&scene.mask).unwrap()).unwrap();
    let (img, edges, out) = (d.join("sq.png"), d.join("sq_edges.png"), d.join("out.png"));

    let o = xclick(&["segment", "--image", s(&img), "--clicks", &clicks, "--edges", s(&edges), "--mode", "clicks", "--out", s(&out)]);
    assert!(o.status.success(), "{:?}", text(&o));
    let mask = BinaryMask::load_png(&out).unwrap();
    assert!(iou_masks(&mask, &scene.mask).unwrap() >= 0.95);
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out.json")).unwrap()).unwrap();
    assert_eq!(side["mode"], "clicks");
    assert!(side["iterations"].as_u64().unwrap() >= 1);
    let first = std::fs::read(d.join("out.json")).unwrap();
    xclick(&["segment", "--image", s(&img), "--clicks", &clicks, "--edges", s(&edges), "--mode", "clicks", "--out", s(&out)]);
    assert_eq!(std::fs::read(d.join("out.json")).unwrap(), first, "reruns are byte-identical");

    let boxed = d.join("box.png");
    let o = xclick(&["segment", "--image", s(&img), "--box", "16,16,47,47", "--mode", "box", "--out", s(&boxed)]);
    assert!(o.status.success(), "{:?}", text(&o));
    assert!(BinaryMask::load_png(&boxed).unwrap().object_count() > 0);

    let o = xclick(&["segment", "--image", s(&img), "--clicks", &clicks, "--mode", "clicks", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("--edges"), "{:?}", text(&o));

    let o = xclick(&["segment", "--image", s(&img), "--box", "1,2,3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = xclick(&["segment", "--image", s(&img), "--bogus", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "unknown flags are rejected");
}

#[test]
fn simulate_clicks_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let masks = dir.path().join("masks");
    std::fs::create_dir(&masks).unwrap();
    for (i, lo) in [(0, 3), (1, 5), (2, 8)] {
        square_scene(32, lo, 20).mask.save_png(masks.join(format!("m{i}_mask.png"))).unwrap();
    }
    let out = dir.path().join("clicks.jsonl");
    let o = xclick(&["simulate-clicks", "--masks", s(&masks), "--out", s(&out), "--class", "sq"]);
    assert!(o.status.success(), "{:?}", text(&o));
    let first = std::fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().count(), 3);
    let e: ManifestEntry = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(e.id.as_deref(), Some("m0"));
    assert_eq!(e.bbox.unwrap().to_array(), [3, 3, 20, 20]);
    assert!(e.clicks.is_some());

    xclick(&["simulate-clicks", "--masks", s(&masks), "--out", s(&out), "--class", "sq"]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);

    std::fs::write(masks.join("zz_mask.png"), b"not a png").unwrap();
    let o = xclick(&["simulate-clicks", "--masks", s(&masks), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "a skipped mask is a partial failure");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = xclick(&["simulate-clicks", "--masks", s(&empty), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = write_demo_dataset(d).unwrap();
    let config = d.join("cfg.json");
    std::fs::write(&config, r#"{"lambda": 5.0, "max_iterations": 5, "mode": "clicks"}"#).unwrap();

    let run = |mode: &str, out: &str, jobs: &str| {
        let o = xclick(&[
            "evaluate", "--manifest", s(&manifest), "--mode", mode, "--config", s(&config), "--report", s(&d.join(out)), "--jobs", jobs,
        ]);
        assert!(o.status.success(), "{:?}", text(&o));
        assert!(text(&o).0.contains("macro mIoU"));
        let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join(out).join("report.json")).unwrap()).unwrap();
        report
    };
    let clicks = run("clicks", "r_clicks", "2");
    let boxed = run("box", "r_box", "2");
    let class_iou = |r: &serde_json::Value, c: &str| -> f64 {
        r["quality"]["classes"].as_array().unwrap().iter().find(|x| x["class"] == c).unwrap()["mean_iou"].as_f64().unwrap()
    };
    assert!(class_iou(&clicks, "ell") >= class_iou(&boxed, "ell"));
    assert!(class_iou(&clicks, "square") >= 0.95 && class_iou(&boxed, "square") >= 0.95);

    run("clicks", "r_again", "1");
    let csv = std::fs::read_to_string(d.join("r_clicks/entries.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(d.join("r_again/entries.csv")).unwrap());
    assert!(csv.lines().next().unwrap().contains("error_rate"));
    assert!(d.join("r_again/timings.csv").is_file());

    // Without edge maps click mode fails per entry: exit 1.
    let m = load_manifest(&manifest).unwrap();
    let stripped: Vec<ManifestEntry> = m.entries.into_iter().map(|e| ManifestEntry { edges: None, ..e }).collect();
    let noedges = d.join("noedges.jsonl");
    xclick_core::evaluation::write_manifest(&stripped, std::fs::File::create(&noedges).unwrap()).unwrap();
    let o = xclick(&["evaluate", "--manifest", s(&noedges), "--mode", "clicks", "--report", s(&d.join("r_fail"))]);
    assert_eq!(o.status.code(), Some(1), "{:?}", text(&o));

    let o = xclick(&["evaluate", "--manifest", s(&d.join("missing.jsonl")), "--report", s(&d.join("r_x"))]);
    assert_eq!(o.status.code(), Some(2));
}

fn posted(worker: &str, batch: usize, pos: usize, shown: u64) -> Event {
    let c = infer_roles(&[Point::new(1, 5), Point::new(5, 1), Point::new(9, 5), Point::new(5, 9)])
        .unwrap()
        .with_timestamps([shown + 2500, shown + 4000, shown + 5500, shown + 7000]);
    Event::ClicksPosted {
        worker: worker.into(),
        task: format!("{worker}-b{batch}-{pos}"),
        shown_ms: Some(shown),
        clicks: c,
    }
}

#[test]
fn report_on_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let mut sink = EventSink::open(&log).unwrap();
    sink.append(&Event::WorkerRegistered { worker: "w".into() }).unwrap();
    for pos in 0..10 {
        sink.append(&posted("w", 1, pos, 20_000 * pos as u64)).unwrap();
    }
    let o = xclick(&["report", "--log", s(&log)]);
    assert!(o.status.success());
    let out = text(&o).0;
    assert!(out.contains("mean 7.0 s/instance"), "{out}");
    assert!(out.contains("first click 2.5 s, later clicks 1.5 s"), "{out}");
    assert!(out.contains("cost $0.15"), "{out}");
    let o = xclick(&["report", "--log", s(&log), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["timing"]["instances"], 10);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = xclick(&["report", "--log", s(&empty)]);
    assert!(o.status.success());
    assert!(text(&o).0.contains("instances: 0"));
    assert_eq!(xclick(&["report", "--log", s(&dir.path().join("nope"))]).status.code(), Some(2));
}

#[test]
fn voc_conversion() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("Annotations");
    std::fs::create_dir(&ann).unwrap();
    std::fs::write(
        ann.join("2007_000001.xml"),
        "<annotation><filename>2007_000001.jpg</filename><size><width>50</width><height>40</height><depth>3</depth></size>\
         <object><name>cat</name><difficult>0</difficult><bndbox><xmin>1</xmin><ymin>2</ymin><xmax>30</xmax><ymax>20</ymax></bndbox></object>\
         <object><name>dog</name><difficult>1</difficult><bndbox><xmin>5</xmin><ymin>5</ymin><xmax>9</xmax><ymax>9</ymax></bndbox></object>\
         </annotation>",
    )
    .unwrap();
    let out = dir.path().join("voc.jsonl");
    let o = xclick(&["voc-to-manifest", "--voc", s(dir.path()), "--out", s(&out)]);
    assert!(o.status.success(), "{:?}", text(&o));
    let lines = std::fs::read_to_string(&out).unwrap();
    assert_eq!(lines.lines().count(), 1);
    let e: ManifestEntry = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!((e.class.as_str(), e.bbox.unwrap().to_array()), ("cat", [0, 1, 29, 19]));
    xclick(&["voc-to-manifest", "--voc", s(dir.path()), "--out", s(&out), "--include-difficult"]);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn help_documents_every_flag() {
    let expect: &[(&str, &[&str])] = &[
        ("segment", &["--image", "--clicks", "--box", "--edges", "--mode", "--out", "--config", "--seed", "--lambda", "--beta", "--gmm-components", "--max-iterations", "--search-margin"]),
        ("simulate-clicks", &["--masks", "--out", "--class", "--images"]),
        ("evaluate", &["--manifest", "--mode", "--report", "--jobs", "--config", "--seed"]),
        ("serve", &["--config", "--port", "--bind"]),
        ("report", &["--log", "--config", "--json"]),
        ("voc-to-manifest", &["--voc", "--out", "--image-set", "--masks-out", "--include-difficult"]),
    ];
    let top = xclick(&["--help"]);
    assert!(top.status.success());
    for (sub, flags) in expect {
        assert!(text(&top).0.contains(sub), "top-level help lists {sub}");
        let o = xclick(&[sub, "--help"]);
        assert!(o.status.success(), "{sub} --help");
        let help = text(&o).0;
        for f in *flags {
            assert!(help.contains(f), "{sub} --help is missing {f}");
        }
    }
}

fn http(port: u16, req: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    s.write_all(req.as_bytes()).unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[test]
fn serve_port_busy_and_clean_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("service.json");
    let data = dir.path().join("data");
    std::fs::write(
        &cfg,
        serde_json::json!({"data_dir": data, "protocol": {"qualification_images": 0}}).to_string(),
    )
    .unwrap();

    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port();
    let o = xclick(&["serve", "--config", s(&cfg), "--port", &port.to_string()]);
    assert_eq!(o.status.code(), Some(2), "{:?}", text(&o));
    drop(busy);

    let free = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_xclick"))
        .args(["serve", "--config", s(&cfg), "--port", &free.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    while TcpStream::connect(("127.0.0.1", free)).is_err() {
        assert!(start.elapsed() < Duration::from_secs(20), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    }
    let resp = http(
        free,
        "POST /api/worker/w1/register HTTP/1.1\r\nHost: x\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
    );
    assert!(resp.starts_with("HTTP/1.1 201"), "{resp}");
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let code = child.wait().unwrap();
    assert!(code.success(), "{code:?}");
    let log = std::fs::read_to_string(data.join("events.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert_eq!(Event::from_line(log.trim()).unwrap(), Event::WorkerRegistered { worker: "w1".into() });
}

#[test]
fn written_manifests_load_from_any_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir_all(d.join("data/Annotations")).unwrap();
    std::fs::create_dir_all(d.join("data/JPEGImages")).unwrap();
    std::fs::create_dir_all(d.join("out")).unwrap();
    let scene = square_scene(24, 4, 15);
    write_scene(&d.join("data"), "a", "sq", &scene).unwrap();
    std::fs::write(
        d.join("data/Annotations/x.xml"),
        "<annotation><filename>x.jpg</filename><size><width>24</width><height>24</height></size><object><name>cat</name>\
         <bndbox><xmin>2</xmin><ymin>2</ymin><xmax>9</xmax><ymax>9</ymax></bndbox></object></annotation>",
    )
    .unwrap();
    std::fs::write(d.join("data/JPEGImages/x.jpg"), b"").unwrap();

    let run = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_xclick")).current_dir(d).args(args).output().unwrap();
        assert!(o.status.success(), "{:?}", text(&o));
    };
    run(&["simulate-clicks", "--masks", "data", "--out", "out/sim.jsonl"]);
    run(&["voc-to-manifest", "--voc", "data", "--out", "out/voc.jsonl"]);
    let sim = load_manifest(d.join("out/sim.jsonl")).unwrap();
    assert!(sim.entries[0].image.ends_with("data/a.png") && sim.entries[0].image.is_file());
    assert!(sim.entries[0].edges.as_ref().unwrap().is_file());
    let voc = load_manifest(d.join("out/voc.jsonl")).unwrap();
    assert!(voc.entries[0].image.is_file());
}
