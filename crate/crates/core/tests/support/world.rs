//! A small in-memory annotation world and scripted workers.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xclick_core::evaluation::ManifestEntry;
use xclick_core::geometry::{simulate_extreme_clicks, BinaryMask, Point, Role};
use xclick_core::protocol::{
    AnnotationService, ErrorCode, GtImage, ItemRef, PostStatus, PostedPoint, ProtocolConfig, ServiceSetup, TaskImage,
    TaskKind, TaskView, BATCH_SIZE,
};
use xclick_core::synthetic::square_scene;

pub struct World {
    pub setup: ServiceSetup,
    pub task_masks: HashMap<String, BinaryMask>,
}

pub fn entry(id: &str, class: &str) -> ManifestEntry {
    let mut e = ManifestEntry::new(format!("/data/{id}.png"), class);
    e.id = Some(id.to_string());
    e
}

/// Five qualification squares, `n_tasks` task squares of class `cat`, and
/// two golden squares.
pub fn world(n_tasks: usize, config: ProtocolConfig) -> World {
    let gt = |id: &str, lo: u32, hi: u32| {
        let s = square_scene(48, lo, hi);
        GtImage::new(entry(id, "cat"), s.mask, &config).unwrap()
    };
    let qualification = (0..5).map(|i| gt(&format!("qual{i}"), 5 + i, 30 + i)).collect();
    let golden = vec![gt("gold_a", 8, 40), gt("gold_b", 12, 33)];
    let mut task_masks = HashMap::new();
    let tasks = (0..n_tasks as u32)
        .map(|i| {
            let s = square_scene(48, 4 + i % 9, 30 + i % 11);
            let id = format!("task{i}");
            task_masks.insert(id.clone(), s.mask);
            TaskImage {
                entry: entry(&id, "cat"),
                width: 48,
                height: 48,
                gt_box: Some(s.bbox),
            }
        })
        .collect();
    World {
        setup: ServiceSetup::new(config, qualification, tasks, golden).unwrap(),
        task_masks,
    }
}

pub fn points(clicks: [Point; 4], t0: u64) -> Vec<PostedPoint> {
    let gaps = [2500, 1500, 1500, 1500];
    let mut t = t0;
    clicks
        .iter()
        .zip(gaps)
        .map(|(p, g)| {
            t += g;
            PostedPoint {
                x: p.x,
                y: p.y,
                t_ms: Some(t),
            }
        })
        .collect()
}

/// Exact extreme clicks for whatever image `view` shows, in role order.
pub fn perfect(svc: &AnnotationService, w: &World, worker: &str, view: &TaskView) -> [Point; 4] {
    let mask = match view.kind {
        TaskKind::Qualification => &svc.setup().qualification[view.index].mask,
        TaskKind::Annotation => {
            let b = svc.state().workers[worker].batches.last().unwrap();
            match b.items[view.index] {
                ItemRef::Task(i) => &w.task_masks[&svc.setup().tasks[i].entry.id()],
                ItemRef::Golden(g) => &svc.setup().golden[g].mask,
            }
        }
    };
    let c = simulate_extreme_clicks(mask).unwrap();
    Role::ALL.map(|r| c.get(r))
}

pub fn is_golden(svc: &AnnotationService, worker: &str, view: &TaskView) -> bool {
    view.kind == TaskKind::Annotation
        && matches!(
            svc.state().workers[worker].batches.last().unwrap().items[view.index],
            ItemRef::Golden(_)
        )
}

pub fn qualify(svc: &mut AnnotationService, w: &World, worker: &str) {
    for _ in 0..5 {
        let v = svc.next_task(worker).unwrap();
        let p = points(perfect(svc, w, worker, &v), 0);
        svc.post_clicks(worker, &v.task_id, Some(0), &p).unwrap();
    }
}

pub fn qualify_rest(svc: &mut AnnotationService, w: &World, worker: &str) {
    while svc.next_task(worker).unwrap().kind == TaskKind::Qualification {
        let v = svc.next_task(worker).unwrap();
        let p = points(perfect(svc, w, worker, &v), 0);
        svc.post_clicks(worker, &v.task_id, Some(0), &p).unwrap();
    }
}

pub fn run_batch(svc: &mut AnnotationService, w: &World, worker: &str, t0: u64) {
    for i in 0..BATCH_SIZE {
        let v = svc.next_task(worker).unwrap();
        let p = points(perfect(svc, w, worker, &v), t0 + 10_000 * i as u64);
        let r = svc.post_clicks(worker, &v.task_id, Some(t0 + 10_000 * i as u64), &p).unwrap();
        assert_eq!(r.batch_complete, i == BATCH_SIZE - 1);
    }
}


/// What a scripted interleaving did.
#[derive(Debug, Default)]
pub struct Interleaving {
    /// Every worker-facing payload, serialized.
    pub payloads: String,
    pub failed_qualification_clicks: usize,
    pub golden_misses: usize,
    pub golden_blocks: u32,
}

/// Drives `workers` through qualification and batches in an order shuffled
/// by `seed`, one post per step. Qualification clicks occasionally miss; the
/// first visit to every golden item misses and is retried on a later step.
pub fn interleave(svc: &mut AnnotationService, w: &World, workers: &[&str], steps_each: usize, seed: u64) -> Interleaving {
    let mut out = Interleaving::default();
    for worker in workers {
        let r = svc.register(worker);
        assert!(r.is_ok() || r.unwrap_err().code == ErrorCode::AlreadyRegistered);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schedule: Vec<&str> = workers.iter().flat_map(|w| std::iter::repeat_n(*w, steps_each)).collect();
    schedule.shuffle(&mut rng);
    let mut missed = std::collections::HashSet::new();
    let mut clock = 0u64;
    for (step, worker) in schedule.into_iter().enumerate() {
        let v = match svc.next_task(worker) {
            Ok(v) => v,
            Err(e) if e.code == ErrorCode::NoTask => continue,
            Err(e) => panic!("{e}"),
        };
        out.payloads += &serde_json::to_string(&v).unwrap();
        let mut c = perfect(svc, w, worker, &v);
        let golden = is_golden(svc, worker, &v);
        if golden && missed.insert(v.task_id.clone()) {
            c[Role::Right as usize] = Point::new(0, 47);
            out.golden_misses += 1;
        } else if v.kind == TaskKind::Qualification && (v.task_id.ends_with("-q1-2") || step % 13 == 5) {
            c[Role::Right as usize] = Point::new(47, 0);
            out.failed_qualification_clicks += 1;
        }
        clock += 1000;
        let r = svc.post_clicks(worker, &v.task_id, Some(clock), &points(c, clock)).unwrap();
        if r.status == PostStatus::Blocked {
            out.golden_blocks += 1;
        }
        out.payloads += &serde_json::to_string(&r).unwrap();
        if let Ok(f) = svc.feedback(worker) {
            out.payloads += &serde_json::to_string(&f).unwrap();
        }
        clock += 10_000;
    }
    out
}
