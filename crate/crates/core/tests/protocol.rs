mod support;

use support::world::*;
use xclick_core::evaluation::ManifestEntry;
use xclick_core::geometry::{infer_roles, simulate_extreme_clicks, Point, Role};
use xclick_core::protocol::{
    accepted_areas, build_batch, log_timing, submit_batch, AnnotationService, DistanceMetric, ErrorCode, PostStatus,
    PostedPoint, ProtocolConfig, QualificationStatus, SubmitOutcome, TaskKind, TaskView, BATCH_SIZE,
};
use xclick_core::synthetic::square_scene;

#[test]
fn qualification_all_or_nothing_with_retakes() {
    let w = world(9, ProtocolConfig::default());
    let mut svc = AnnotationService::new(w.setup.clone());
    svc.register("ann").unwrap();
    assert_eq!(svc.register("ann").unwrap_err().code, ErrorCode::AlreadyRegistered);

    let v = svc.next_task("ann").unwrap();
    let p = points(perfect(&svc, &w, "ann", &v), 0);
    svc.post_clicks("ann", &v.task_id, Some(0), &p).unwrap();
    let err = svc.feedback("ann").unwrap_err();
    assert_eq!(err.code, ErrorCode::Incomplete);
    assert!(err.message.contains("[1, 2, 3, 4]"), "{}", err.message);

    // Four perfect images and a right click 11 px outside on the last.
    for i in 1..5 {
        let v = svc.next_task("ann").unwrap();
        let mut c = perfect(&svc, &w, "ann", &v);
        if i == 4 {
            c[2].x += 11;
        }
        let r = svc.post_clicks("ann", &v.task_id, Some(0), &points(c, 0)).unwrap();
        assert_eq!(r.qualification.as_ref().unwrap().remaining, 4 - i);
    }
    let fb = svc.feedback("ann").unwrap();
    assert_eq!(fb.status, QualificationStatus::Failed);
    assert_eq!(fb.attempt, 1);
    assert_eq!(fb.failing().len(), 1);
    assert_eq!(fb.images.len(), 5);
    assert_eq!(fb.images[4].overlays.len(), 4);
    assert!(fb.images[4].overlays[0].starts_with("/api/overlay/ann-q1-4/"));
    assert!(!svc.state().workers["ann"].qualified());

    // Overlay only after clicking; PNG bytes.
    let png = svc.overlay_png("ann-q1-4", Role::Left).unwrap();
    assert_eq!(&png[1..4], b"PNG");
    assert_eq!(
        svc.overlay_png("ann-q2-0", Role::Left).unwrap_err().code,
        ErrorCode::NotFound
    );

    let v = svc.next_task("ann").unwrap();
    assert_eq!(v.task_id, "ann-q2-0");
    qualify(&mut svc, &w, "ann");
    let fb = svc.feedback("ann").unwrap();
    assert_eq!((fb.status, fb.attempt), (QualificationStatus::Passed, 2));
    assert!(svc.state().workers["ann"].qualified());
    assert_eq!(svc.next_task("ann").unwrap().kind, TaskKind::Annotation);
}

#[test]
fn error_codes() {
    let w = world(9, ProtocolConfig::default());
    let mut svc = AnnotationService::new(w.setup.clone());
    assert_eq!(svc.next_task("ghost").unwrap_err().code, ErrorCode::UnknownWorker);
    assert_eq!(svc.register("bad-id").unwrap_err().code, ErrorCode::InvalidInput);
    svc.register("a").unwrap();
    let v = svc.next_task("a").unwrap();
    assert_eq!(svc.next_task("a").unwrap(), v, "next_task is idempotent");
    let good = points(perfect(&svc, &w, "a", &v), 100);

    let post = |svc: &mut AnnotationService, task: &str, p: &[PostedPoint]| {
        svc.post_clicks("a", task, Some(100), p).unwrap_err().code
    };
    assert_eq!(post(&mut svc, &v.task_id, &good[..3]), ErrorCode::ClickCount);
    assert_eq!(post(&mut svc, "a-q1-3", &good), ErrorCode::StaleTask);
    let mut off = good.clone();
    off[2].x = 48;
    assert_eq!(post(&mut svc, &v.task_id, &off), ErrorCode::OutOfBounds);
    let mut back = good.clone();
    back[3].t_ms = Some(1);
    assert_eq!(post(&mut svc, &v.task_id, &back), ErrorCode::BadTimestamps);
    let mut partial = good.clone();
    partial[0].t_ms = None;
    assert_eq!(post(&mut svc, &v.task_id, &partial), ErrorCode::BadTimestamps);
    assert_eq!(
        svc.post_clicks("ghost", &v.task_id, None, &good).unwrap_err().code,
        ErrorCode::UnknownWorker
    );
    assert_eq!(svc.events().len(), 1, "rejected posts leave no events");

    svc.post_clicks("a", &v.task_id, Some(100), &good).unwrap();
    assert_eq!(post(&mut svc, &v.task_id, &good), ErrorCode::StaleTask);

    // One batch worth of tasks: the second batch has nothing to draw from.
    qualify_rest(&mut svc, &w, "a");
    run_batch(&mut svc, &w, "a", 0);
    assert_eq!(svc.next_task("a").unwrap_err().code, ErrorCode::NoTask);
}

#[test]
fn golden_miss_blocks_and_pass_looks_ordinary() {
    let w = world(9, ProtocolConfig::default());
    let mut svc = AnnotationService::new(w.setup.clone());
    svc.register("g").unwrap();
    qualify(&mut svc, &w, "g");
    let mut plain = None;
    let mut golden = None;
    for _ in 0..BATCH_SIZE {
        let v = svc.next_task("g").unwrap();
        let good = points(perfect(&svc, &w, "g", &v), 0);
        if is_golden(&svc, "g", &v) {
            let mut bad = good.clone();
            let c = perfect(&svc, &w, "g", &v);
            for p in bad.iter_mut() {
                *p = PostedPoint { x: c[0].x, y: c[1].y, ..*p };
            }
            let r = svc.post_clicks("g", &v.task_id, Some(0), &bad).unwrap();
            assert_eq!(r.status, PostStatus::Blocked);
            assert!(r.retry);
            assert_eq!(svc.next_task("g").unwrap(), v, "blocked image stays current");
            golden = Some(svc.post_clicks("g", &v.task_id, Some(0), &good).unwrap());
        } else {
            let r = svc.post_clicks("g", &v.task_id, Some(0), &good).unwrap();
            if plain.is_none() {
                plain = Some(r);
            }
        }
    }
    let (plain, golden) = (plain.unwrap(), golden.unwrap());
    // The golden response may only differ by batch_complete when it is last.
    assert_eq!(golden.status, plain.status);
    assert_eq!(golden.retry, plain.retry);
    assert_eq!(golden.qualification, plain.qualification);
    let m = svc.metrics();
    assert_eq!(m.golden_blocked, 1);
    assert_eq!(m.batches_submitted, 1);
    assert_eq!(m.annotations, BATCH_SIZE);
    let ann = svc.annotations();
    assert_eq!(ann.iter().filter(|a| a.golden).count(), 1);
}

#[test]
fn worker_facing_output_never_names_golden() {
    let w = world(27, ProtocolConfig::default());
    let mut svc = AnnotationService::new(w.setup.clone());
    let mut seen = String::new();
    for worker in ["x", "y", "z"] {
        svc.register(worker).unwrap();
        for _ in 0..5 {
            let v = svc.next_task(worker).unwrap();
            seen += &serde_json::to_string(&v).unwrap();
            let p = points(perfect(&svc, &w, worker, &v), 0);
            seen += &serde_json::to_string(&svc.post_clicks(worker, &v.task_id, Some(0), &p).unwrap()).unwrap();
        }
        seen += &serde_json::to_string(&svc.feedback(worker).unwrap()).unwrap();
        let mut views = Vec::new();
        for _ in 0..BATCH_SIZE {
            let v = svc.next_task(worker).unwrap();
            seen += &serde_json::to_string(&v).unwrap();
            let p = points(perfect(&svc, &w, worker, &v), 0);
            seen += &serde_json::to_string(&svc.post_clicks(worker, &v.task_id, Some(0), &p).unwrap()).unwrap();
            views.push(v);
        }
        // Same shape, same class, same dims for every image of the batch.
        let keys = |v: &TaskView| {
            let j = serde_json::to_value(v).unwrap();
            j.as_object().unwrap().keys().cloned().collect::<Vec<_>>()
        };
        assert!(views.iter().all(|v| keys(v) == keys(&views[0]) && v.class == views[0].class));
    }
    for needle in ["gold", "golden"] {
        assert!(!seen.contains(needle), "worker output mentions {needle:?}");
    }
    // The log, which is private, does record them.
    let log: String = svc.events().iter().map(|e| e.to_line()).collect();
    assert!(log.contains("gold_"));
}

#[test]
fn interleaved_workers_replay_to_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let w = world(45, ProtocolConfig::default());
    let mut svc = AnnotationService::open(w.setup.clone(), &log).unwrap();
    let run = interleave(&mut svc, &w, &["w1", "w2", "w3"], 40, 99);
    let state = svc.state().clone();
    let metrics = svc.metrics();
    let events = svc.events().to_vec();
    drop(svc);

    let reopened = AnnotationService::open(w.setup.clone(), &log).unwrap();
    assert_eq!(reopened.events(), &events[..]);
    assert_eq!(reopened.state(), &state);
    assert_eq!(reopened.metrics(), metrics);
    assert!(metrics.qualified >= 1);
    assert!(metrics.batches_submitted >= 1, "{metrics:?}");
    assert!(metrics.quality.macro_mean_iou > 0.7);
    assert!(run.golden_blocks >= 1 && run.golden_blocks == metrics.golden_blocked);
    let sessions: usize = reopened.state().workers.values().map(|w| w.sessions.len()).sum();
    assert!(sessions > 3, "some worker had to retake");
    assert!(!run.payloads.contains("gold"));

    assert_eq!(log_timing(&events, 0.15), metrics.timing);
    let replayed = AnnotationService::replay(w.setup.clone(), events).unwrap();
    assert_eq!(replayed.state(), &state);
}

#[test]
fn timing_metrics_follow_click_times() {
    let w = world(9, ProtocolConfig::default());
    let mut svc = AnnotationService::new(w.setup.clone());
    svc.register("t").unwrap();
    qualify(&mut svc, &w, "t");
    run_batch(&mut svc, &w, "t", 5_000);
    let m = svc.metrics();
    assert_eq!(m.timing.instances, BATCH_SIZE);
    assert!((m.timing.mean_total_s - 7.0).abs() < 1e-9);
    assert!((m.timing.mean_first_click_s - 2.5).abs() < 1e-9);
    assert!((m.timing.mean_later_click_s - 1.5).abs() < 1e-9);
    assert!((m.timing.cost - 0.15).abs() < 1e-12);
    // Perfect clicks on squares reproduce the reference boxes.
    assert!((m.quality.macro_mean_iou - 1.0).abs() < 1e-12);
    assert_eq!(m.quality.classes[0].count, BATCH_SIZE - 1);
}

#[test]
fn build_batch_rules() {
    let cats: Vec<ManifestEntry> = (0..9).map(|i| entry(&format!("c{i}"), "cat")).collect();
    let mut gold = entry("g", "cat");
    gold.mask = Some("/data/g_mask.png".into());
    let golden = vec![gold.clone()];
    let mut positions = [0usize; BATCH_SIZE];
    for seed in 0..500 {
        let b = build_batch(&cats, &golden, seed).unwrap();
        assert_eq!(b.items.len(), BATCH_SIZE);
        assert_eq!(b.golden(), &gold);
        positions[b.golden_index] += 1;
    }
    assert!(positions.iter().all(|&n| n > 20), "{positions:?}");
    assert_eq!(build_batch(&cats, &golden, 4).unwrap(), build_batch(&cats, &golden, 4).unwrap());

    let mut mixed = cats.clone();
    mixed[5].class = "dog".into();
    assert_eq!(build_batch(&mixed, &golden, 0).unwrap_err().code, ErrorCode::MixedClass);
    assert_eq!(build_batch(&cats[..8], &golden, 0).unwrap_err().code, ErrorCode::InsufficientPool);
    let dog_gold = vec![ManifestEntry { class: "dog".into(), ..gold }];
    assert_eq!(build_batch(&cats, &dog_gold, 0).unwrap_err().code, ErrorCode::InsufficientPool);
}

#[test]
fn submit_batch_checks_only_the_golden_item() {
    let cats: Vec<ManifestEntry> = (0..9).map(|i| entry(&format!("c{i}"), "cat")).collect();
    let golden = vec![entry("g", "cat")];
    let batch = build_batch(&cats, &golden, 7).unwrap();
    let gt = square_scene(64, 20, 40).mask;
    let areas = accepted_areas(&gt, 10, DistanceMetric::Euclidean).unwrap();
    let good = simulate_extreme_clicks(&gt).unwrap();
    // Non-golden items are never checked, so any clicks will do there.
    let sloppy = simulate_extreme_clicks(&square_scene(64, 0, 5).mask).unwrap();
    let mut clicks: Vec<_> = (0..BATCH_SIZE).map(|_| Some(sloppy.clone())).collect();
    clicks[batch.golden_index] = Some(good);
    assert_eq!(submit_batch(&batch, &clicks, &areas).unwrap(), SubmitOutcome::Accepted);

    // Top and right land beyond the accepted band but keep their roles.
    let bad = [Point::new(20, 30), Point::new(30, 2), Point::new(55, 30), Point::new(30, 40)];
    clicks[batch.golden_index] = Some(infer_roles(&bad).unwrap());
    match submit_batch(&batch, &clicks, &areas).unwrap() {
        SubmitOutcome::Blocked { failed } => assert_eq!(failed, vec![Role::Top, Role::Right]),
        other => panic!("{other:?}"),
    }

    clicks[3] = None;
    assert_eq!(submit_batch(&batch, &clicks, &areas).unwrap_err().code, ErrorCode::Incomplete);
    assert_eq!(submit_batch(&batch, &clicks[..5], &areas).unwrap_err().code, ErrorCode::Incomplete);
}
