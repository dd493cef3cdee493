use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::area::{accepted_areas, AcceptedArea};
use super::batch::{build_batch, BATCH_SIZE};
use super::events::{read_log, Event, EventSink};
use super::qualification::{check_clicks, QualificationFeedback, QualificationSession, QualificationStatus};
use super::timing::{timing_report, InstanceTiming, TimingReport};
use super::{ErrorCode, ProtocolConfig, ProtocolError};
use crate::evaluation::{quality_from_ious, DatasetManifest, ManifestEntry, QualityReport};
use crate::geometry::{
    box_from_clicks, infer_roles, iou_boxes, tight_box_from_mask, BinaryMask, BoundingBox, ExtremeClicks, Point, Role,
};

/// An image with a ground-truth mask: used for qualification and as golden.
#[derive(Clone, Debug)]
pub struct GtImage {
    pub entry: ManifestEntry,
    pub mask: BinaryMask,
    pub areas: [AcceptedArea; 4],
}

impl GtImage {
    pub fn new(entry: ManifestEntry, mask: BinaryMask, config: &ProtocolConfig) -> Result<Self, ProtocolError> {
        let areas = accepted_areas(&mask, config.tolerance, config.metric)?;
        Ok(Self { entry, mask, areas })
    }

    fn load(entry: &ManifestEntry, config: &ProtocolConfig) -> Result<Self, ProtocolError> {
        let path = entry.mask.as_ref().ok_or_else(|| {
            ProtocolError::new(ErrorCode::InvalidInput, format!("entry {:?} needs a ground-truth mask", entry.id()))
        })?;
        let mask = BinaryMask::load_png(path)
            .map_err(|e| ProtocolError::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
        Self::new(entry.clone(), mask, config)
    }
}

/// An image to annotate.
#[derive(Clone, Debug)]
pub struct TaskImage {
    pub entry: ManifestEntry,
    pub width: u32,
    pub height: u32,
    /// Reference box for quality metrics, when known.
    pub gt_box: Option<BoundingBox>,
}

impl TaskImage {
    fn load(entry: &ManifestEntry) -> Result<Self, ProtocolError> {
        let (width, height) = image::image_dimensions(&entry.image)
            .map_err(|e| ProtocolError::new(ErrorCode::Io, format!("{}: {e}", entry.image.display())))?;
        let gt_box = match (&entry.bbox, &entry.mask) {
            (Some(b), _) => Some(*b),
            (None, Some(m)) => {
                let mask = BinaryMask::load_png(m)
                    .map_err(|e| ProtocolError::new(ErrorCode::Io, format!("{}: {e}", m.display())))?;
                tight_box_from_mask(&mask).ok()
            }
            (None, None) => None,
        };
        Ok(Self {
            entry: entry.clone(),
            width,
            height,
            gt_box,
        })
    }
}

/// Fixed inputs of a service: never changes after construction.
#[derive(Clone)]
pub struct ServiceSetup {
    pub config: ProtocolConfig,
    pub qualification: Vec<GtImage>,
    pub tasks: Vec<TaskImage>,
    pub golden: Vec<GtImage>,
    task_index: HashMap<String, usize>,
    golden_index: HashMap<String, usize>,
    /// Task indices grouped into batch-sized runs of one class.
    chunks: Vec<Vec<usize>>,
}

impl ServiceSetup {
    pub fn new(
        config: ProtocolConfig,
        mut qualification: Vec<GtImage>,
        tasks: Vec<TaskImage>,
        golden: Vec<GtImage>,
    ) -> Result<Self, ProtocolError> {
        if qualification.len() < config.qualification_images {
            return Err(ProtocolError::new(
                ErrorCode::InsufficientPool,
                format!(
                    "need {} qualification images, have {}",
                    config.qualification_images,
                    qualification.len()
                ),
            ));
        }
        qualification.truncate(config.qualification_images);
        let index = |ids: Vec<String>, what: &str| -> Result<HashMap<String, usize>, ProtocolError> {
            let mut m = HashMap::new();
            for (i, id) in ids.into_iter().enumerate() {
                if m.insert(id.clone(), i).is_some() {
                    return Err(ProtocolError::new(ErrorCode::InvalidInput, format!("duplicate {what} id {id:?}")));
                }
            }
            Ok(m)
        };
        let task_index = index(tasks.iter().map(|t| t.entry.id()).collect(), "task")?;
        let golden_index = index(golden.iter().map(|g| g.entry.id()).collect(), "golden")?;
        let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            by_class.entry(t.entry.class.as_str()).or_default().push(i);
        }
        let chunks = by_class
            .into_values()
            .flat_map(|v| {
                v.chunks_exact(BATCH_SIZE - 1)
                    .map(<[usize]>::to_vec)
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            config,
            qualification,
            tasks,
            golden,
            task_index,
            golden_index,
            chunks,
        })
    }

    /// Loads images and masks named by three manifests.
    pub fn from_manifests(
        config: ProtocolConfig,
        qualification: &DatasetManifest,
        tasks: &DatasetManifest,
        golden: &DatasetManifest,
    ) -> Result<Self, ProtocolError> {
        let q = qualification
            .entries
            .iter()
            .map(|e| GtImage::load(e, &config))
            .collect::<Result<Vec<_>, _>>()?;
        let t = tasks.entries.iter().map(TaskImage::load).collect::<Result<Vec<_>, _>>()?;
        let g = golden
            .entries
            .iter()
            .map(|e| GtImage::load(e, &config))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(config, q, t, g)
    }

    /// How many batches the task pool can fill.
    pub fn batch_capacity(&self) -> usize {
        self.chunks.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemRef {
    Task(usize),
    Golden(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Posted {
    pub shown_ms: Option<u64>,
    pub clicks: ExtremeClicks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchState {
    pub class: String,
    pub items: Vec<ItemRef>,
    pub golden_index: usize,
    pub posted: Vec<Option<Posted>>,
    pub blocked: u32,
}

impl BatchState {
    pub fn is_complete(&self) -> bool {
        self.posted.iter().all(Option::is_some)
    }

    fn next_position(&self) -> Option<usize> {
        self.posted.iter().position(Option::is_none)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkerState {
    pub sessions: Vec<QualificationSession>,
    pub batches: Vec<BatchState>,
}

impl WorkerState {
    pub fn qualified(&self) -> bool {
        self.sessions.iter().any(|s| s.status() == QualificationStatus::Passed)
    }
}

/// Everything the event log determines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ServiceState {
    pub workers: BTreeMap<String, WorkerState>,
    pub batches_opened: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qualification,
    Annotation,
}

/// What a worker sees for the next image. Golden images are
/// indistinguishable from ordinary ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub kind: TaskKind,
    pub class: String,
    pub image_url: String,
    pub width: u32,
    pub height: u32,
    /// Zero-based position within the qualification test or batch.
    pub index: usize,
    pub total: usize,
    pub instruction: String,
}

fn instruction(class: &str) -> String {
    format!(
        "Click the left-most, top, right-most and bottom points of the {class}, in any order. \
         Aim for about 10 s for all four clicks."
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedPoint {
    pub x: u32,
    pub y: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ms: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostStatus {
    Recorded,
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualificationProgress {
    pub attempt: u32,
    pub image_passed: bool,
    /// Per role, in left, top, right, bottom order.
    pub accepted: [bool; 4],
    /// Accepted-area images per role, same order.
    pub overlays: Vec<String>,
    pub remaining: usize,
    pub status: QualificationStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostResponse {
    pub status: PostStatus,
    /// Set when the same image has to be clicked again.
    pub retry: bool,
    pub batch_complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualification: Option<QualificationProgress>,
}

/// One recorded annotation, for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub worker: String,
    pub task: String,
    pub id: String,
    pub class: String,
    pub image: PathBuf,
    pub golden: bool,
    pub clicks: ExtremeClicks,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdminMetrics {
    pub workers: usize,
    pub qualified: usize,
    pub annotations: usize,
    pub golden_blocked: u32,
    pub batches_submitted: usize,
    /// Box IoU of annotations against reference boxes, golden excluded.
    pub quality: QualityReport,
    /// Over every image of submitted batches, golden included.
    pub timing: TimingReport,
}

enum Slot {
    Qualification { attempt: u32, image: usize },
    Batch { batch: usize, position: usize },
}

fn task_id(worker: &str, slot: &Slot) -> String {
    match slot {
        Slot::Qualification { attempt, image } => format!("{worker}-q{attempt}-{image}"),
        Slot::Batch { batch, position } => format!("{worker}-b{}-{position}", batch + 1),
    }
}

fn parse_task_id(id: &str) -> Option<(&str, Slot)> {
    let (rest, pos) = id.rsplit_once('-')?;
    let (worker, kind) = rest.rsplit_once('-')?;
    let pos: usize = pos.parse().ok()?;
    let slot = if let Some(a) = kind.strip_prefix('q') {
        Slot::Qualification {
            attempt: a.parse().ok()?,
            image: pos,
        }
    } else {
        let b: usize = kind.strip_prefix('b')?.parse().ok()?;
        Slot::Batch {
            batch: b.checked_sub(1)?,
            position: pos,
        }
    };
    Some((worker, slot))
}

/// Timing aggregates straight from a log, without the images behind it.
/// Agrees with [`AnnotationService::metrics`] on the same log.
pub fn log_timing(events: &[Event], pay_per_batch: f64) -> TimingReport {
    let mut batches: BTreeMap<(&str, usize), BTreeMap<usize, InstanceTiming>> = BTreeMap::new();
    for ev in events {
        let Event::ClicksPosted {
            worker,
            task,
            shown_ms,
            clicks,
        } = ev
        else {
            continue;
        };
        if let Some((_, Slot::Batch { batch, position })) = parse_task_id(task) {
            batches.entry((worker.as_str(), batch)).or_default().insert(
                position,
                InstanceTiming {
                    shown_ms: shown_ms.unwrap_or(0),
                    clicks_ms: match (shown_ms, clicks.timestamps()) {
                        (Some(_), Some(t)) => t.to_vec(),
                        _ => Vec::new(),
                    },
                },
            );
        }
    }
    let instances: Vec<InstanceTiming> = batches
        .into_values()
        .filter(|b| b.len() == BATCH_SIZE)
        .flat_map(BTreeMap::into_values)
        .collect();
    timing_report(&instances, BATCH_SIZE, pay_per_batch)
}

fn overlay_urls(task: &str) -> Vec<String> {
    Role::ALL.iter().map(|r| format!("/api/overlay/{task}/{r}")).collect()
}

fn not_found(what: impl std::fmt::Display) -> ProtocolError {
    ProtocolError::new(ErrorCode::NotFound, format!("{what} not found"))
}

/// The annotation service. State changes only through events: every
/// operation validates its input, builds an event, applies it and appends
/// it to the log, so replaying the log rebuilds the same state.
#[derive(Debug)]
pub struct AnnotationService {
    setup: ServiceSetup,
    state: ServiceState,
    events: Vec<Event>,
    sink: Option<EventSink>,
}

impl std::fmt::Debug for ServiceSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceSetup")
            .field("qualification", &self.qualification.len())
            .field("tasks", &self.tasks.len())
            .field("golden", &self.golden.len())
            .finish()
    }
}

impl AnnotationService {
    /// In-memory service without a log file.
    pub fn new(setup: ServiceSetup) -> Self {
        Self {
            setup,
            state: ServiceState::default(),
            events: Vec::new(),
            sink: None,
        }
    }

    /// Rebuilds state from `events`.
    pub fn replay(setup: ServiceSetup, events: impl IntoIterator<Item = Event>) -> Result<Self, ProtocolError> {
        let mut s = Self::new(setup);
        for (i, ev) in events.into_iter().enumerate() {
            s.apply(&ev)
                .map_err(|e| ProtocolError::new(ErrorCode::BadLog, format!("event {}: {}", i + 1, e.message)))?;
            s.events.push(ev);
        }
        Ok(s)
    }

    /// Replays the log at `path` (if any) and appends new events to it.
    pub fn open(setup: ServiceSetup, path: impl AsRef<Path>) -> Result<Self, ProtocolError> {
        let path = path.as_ref();
        let mut s = Self::replay(setup, read_log(path)?)?;
        s.sink = Some(EventSink::open(path)?);
        Ok(s)
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn setup(&self) -> &ServiceSetup {
        &self.setup
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn commit(&mut self, event: Event) -> Result<(), ProtocolError> {
        self.apply(&event).expect("validated events apply");
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&event)?;
        }
        self.events.push(event);
        Ok(())
    }

    fn worker(&self, worker: &str) -> Result<&WorkerState, ProtocolError> {
        self.state
            .workers
            .get(worker)
            .ok_or_else(|| ProtocolError::new(ErrorCode::UnknownWorker, format!("unknown worker {worker:?}")))
    }

    /// The only place state changes.
    fn apply(&mut self, event: &Event) -> Result<(), ProtocolError> {
        let n_qual = self.setup.qualification.len();
        match event {
            Event::WorkerRegistered { worker } => {
                if self.state.workers.contains_key(worker) {
                    return Err(ProtocolError::new(ErrorCode::AlreadyRegistered, worker.clone()));
                }
                let ws = WorkerState {
                    sessions: vec![QualificationSession::new(worker.clone(), 1, n_qual)],
                    batches: Vec::new(),
                };
                self.state.workers.insert(worker.clone(), ws);
            }
            Event::BatchOpened {
                worker,
                entries,
                golden,
                golden_index,
            } => {
                let mut items = entries
                    .iter()
                    .map(|id| self.setup.task_index.get(id).map(|&i| ItemRef::Task(i)).ok_or_else(|| not_found(id)))
                    .collect::<Result<Vec<_>, _>>()?;
                let g = *self.setup.golden_index.get(golden).ok_or_else(|| not_found(golden))?;
                if *golden_index > items.len() {
                    return Err(ProtocolError::new(ErrorCode::InvalidInput, "golden index past batch end"));
                }
                items.insert(*golden_index, ItemRef::Golden(g));
                let class = self.setup.golden[g].entry.class.clone();
                let ws = self.state.workers.get_mut(worker).ok_or_else(|| not_found(worker))?;
                ws.batches.push(BatchState {
                    class,
                    posted: vec![None; items.len()],
                    items,
                    golden_index: *golden_index,
                    blocked: 0,
                });
                self.state.batches_opened += 1;
            }
            Event::ClicksPosted {
                worker,
                task,
                shown_ms,
                clicks,
            } => {
                let (w, slot) = parse_task_id(task).ok_or_else(|| not_found(task))?;
                if w != worker {
                    return Err(not_found(task));
                }
                let ws = self.state.workers.get_mut(worker).ok_or_else(|| not_found(worker))?;
                match slot {
                    Slot::Qualification { attempt, image } => {
                        if attempt as usize == ws.sessions.len() + 1 {
                            let retake = ws.sessions.last().expect("registered workers have a session").retake();
                            ws.sessions.push(retake);
                        }
                        let session = ws
                            .sessions
                            .get_mut(attempt as usize - 1)
                            .filter(|_| image < n_qual)
                            .ok_or_else(|| not_found(task))?;
                        session.record(image, clicks.clone(), &self.setup.qualification[image].areas);
                    }
                    Slot::Batch { batch, position } => {
                        let slot = ws
                            .batches
                            .get_mut(batch)
                            .and_then(|b| b.posted.get_mut(position))
                            .ok_or_else(|| not_found(task))?;
                        *slot = Some(Posted {
                            shown_ms: *shown_ms,
                            clicks: clicks.clone(),
                        });
                    }
                }
            }
            Event::GoldenBlocked { worker, task, .. } => {
                let (_, slot) = parse_task_id(task).ok_or_else(|| not_found(task))?;
                let ws = self.state.workers.get_mut(worker).ok_or_else(|| not_found(worker))?;
                match slot {
                    Slot::Batch { batch, .. } if batch < ws.batches.len() => ws.batches[batch].blocked += 1,
                    _ => return Err(not_found(task)),
                }
            }
        }
        Ok(())
    }

    /// Where the worker is now; `None` means a new batch has to be opened.
    fn current_slot(&self, ws: &WorkerState) -> Option<Slot> {
        let s = ws.sessions.last().expect("registered workers have a session");
        match s.status() {
            QualificationStatus::InProgress => Some(Slot::Qualification {
                attempt: s.attempt,
                image: s.next_image().expect("in progress"),
            }),
            QualificationStatus::Failed => Some(Slot::Qualification {
                attempt: s.attempt + 1,
                image: 0,
            }),
            QualificationStatus::Passed => {
                let b = ws.batches.last().filter(|b| !b.is_complete())?;
                Some(Slot::Batch {
                    batch: ws.batches.len() - 1,
                    position: b.next_position().expect("incomplete"),
                })
            }
        }
    }

    pub fn register(&mut self, worker: &str) -> Result<(), ProtocolError> {
        let valid = !worker.is_empty()
            && worker.len() <= 64
            && worker.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        if !valid {
            return Err(ProtocolError::new(
                ErrorCode::InvalidInput,
                "worker ids are 1 to 64 characters from [A-Za-z0-9_.]",
            ));
        }
        if self.state.workers.contains_key(worker) {
            return Err(ProtocolError::new(
                ErrorCode::AlreadyRegistered,
                format!("worker {worker:?} is already registered"),
            ));
        }
        self.commit(Event::WorkerRegistered {
            worker: worker.to_string(),
        })
    }

    /// The image the worker should click next. Calling it again without
    /// posting returns the same task.
    pub fn next_task(&mut self, worker: &str) -> Result<TaskView, ProtocolError> {
        let ws = self.worker(worker)?;
        if self.current_slot(ws).is_none() {
            let event = self.open_batch(worker)?;
            self.commit(event)?;
        }
        let ws = self.worker(worker)?;
        let slot = self.current_slot(ws).expect("batch just opened");
        Ok(self.view(worker, &slot))
    }

    fn open_batch(&self, worker: &str) -> Result<Event, ProtocolError> {
        let n = self.state.batches_opened;
        let chunk = self
            .setup
            .chunks
            .get(n)
            .ok_or_else(|| ProtocolError::new(ErrorCode::NoTask, "no images left to annotate"))?;
        let pool: Vec<ManifestEntry> = chunk.iter().map(|&i| self.setup.tasks[i].entry.clone()).collect();
        let golden_pool: Vec<ManifestEntry> = self.setup.golden.iter().map(|g| g.entry.clone()).collect();
        let batch = build_batch(&pool, &golden_pool, self.setup.config.seed.wrapping_add(n as u64))?;
        Ok(Event::BatchOpened {
            worker: worker.to_string(),
            entries: pool.iter().map(ManifestEntry::id).collect(),
            golden: batch.golden().id(),
            golden_index: batch.golden_index,
        })
    }

    fn view(&self, worker: &str, slot: &Slot) -> TaskView {
        let id = task_id(worker, slot);
        let (kind, index, total, class, (width, height)) = match *slot {
            Slot::Qualification { image, .. } => {
                let g = &self.setup.qualification[image];
                (TaskKind::Qualification, image, self.setup.qualification.len(), &g.entry.class, g.mask.dims())
            }
            Slot::Batch { batch, position } => {
                let b = &self.state.workers[worker].batches[batch];
                let dims = self.item_dims(b.items[position]);
                (TaskKind::Annotation, position, b.items.len(), &b.class, dims)
            }
        };
        TaskView {
            image_url: format!("/api/images/{id}"),
            task_id: id,
            kind,
            class: class.clone(),
            width,
            height,
            index,
            total,
            instruction: instruction(class),
        }
    }

    fn item_dims(&self, item: ItemRef) -> (u32, u32) {
        match item {
            ItemRef::Task(i) => (self.setup.tasks[i].width, self.setup.tasks[i].height),
            ItemRef::Golden(g) => self.setup.golden[g].mask.dims(),
        }
    }

    /// Records the four clicks for `task`. Golden clicks are checked at
    /// once; a miss is answered with `blocked` and the image stays current.
    pub fn post_clicks(
        &mut self,
        worker: &str,
        task: &str,
        shown_ms: Option<u64>,
        points: &[PostedPoint],
    ) -> Result<PostResponse, ProtocolError> {
        let ws = self.worker(worker)?;
        let current = self.current_slot(ws).map(|s| task_id(worker, &s));
        if current.as_deref() != Some(task) {
            return Err(ProtocolError::new(
                ErrorCode::StaleTask,
                format!("{task:?} is not the current task; fetch the next task first"),
            ));
        }
        if points.len() != 4 {
            return Err(ProtocolError::new(
                ErrorCode::ClickCount,
                format!("expected 4 clicks, got {}", points.len()),
            ));
        }
        let (_, slot) = parse_task_id(task).expect("current ids parse");
        let (w, h) = match slot {
            Slot::Qualification { image, .. } => self.setup.qualification[image].mask.dims(),
            Slot::Batch { batch, position } => self.item_dims(ws.batches[batch].items[position]),
        };
        if let Some(p) = points.iter().find(|p| p.x >= w || p.y >= h) {
            return Err(ProtocolError::new(
                ErrorCode::OutOfBounds,
                format!("click ({}, {}) is outside the {w}x{h} image", p.x, p.y),
            ));
        }
        let times: Option<Vec<u64>> = points.iter().map(|p| p.t_ms).collect();
        if times.is_none() && points.iter().any(|p| p.t_ms.is_some()) {
            return Err(ProtocolError::new(ErrorCode::BadTimestamps, "give t_ms for all clicks or none"));
        }
        if let Some(t) = &times {
            let start = shown_ms.unwrap_or(0);
            if t[0] < start || t.windows(2).any(|p| p[1] < p[0]) {
                return Err(ProtocolError::new(
                    ErrorCode::BadTimestamps,
                    "click times must not decrease and must not precede the image",
                ));
            }
        }
        let pts: Vec<Point> = points.iter().map(|p| Point::new(p.x, p.y)).collect();
        let mut clicks = infer_roles(&pts).map_err(|e| ProtocolError::new(ErrorCode::ClickCount, e.to_string()))?;
        if let Some(t) = times {
            clicks = clicks.with_timestamps([t[0], t[1], t[2], t[3]]);
        }

        if let Slot::Batch { batch, position } = slot {
            if let ItemRef::Golden(g) = ws.batches[batch].items[position] {
                let checks = check_clicks(&clicks, &self.setup.golden[g].areas);
                let failed: Vec<Role> = Role::ALL.into_iter().filter(|r| !checks[*r as usize].accepted()).collect();
                if !failed.is_empty() {
                    self.commit(Event::GoldenBlocked {
                        worker: worker.to_string(),
                        task: task.to_string(),
                        clicks,
                        failed,
                    })?;
                    return Ok(PostResponse {
                        status: PostStatus::Blocked,
                        retry: true,
                        batch_complete: false,
                        qualification: None,
                    });
                }
            }
        }

        self.commit(Event::ClicksPosted {
            worker: worker.to_string(),
            task: task.to_string(),
            shown_ms,
            clicks,
        })?;
        let ws = &self.state.workers[worker];
        Ok(match slot {
            Slot::Qualification { attempt, image } => {
                let s = &ws.sessions[attempt as usize - 1];
                let r = s.results[image].as_ref().expect("just recorded");
                PostResponse {
                    status: PostStatus::Recorded,
                    retry: false,
                    batch_complete: false,
                    qualification: Some(QualificationProgress {
                        attempt,
                        image_passed: r.passed(),
                        accepted: r.checks.map(|c| c.accepted()),
                        overlays: overlay_urls(task),
                        remaining: s.missing().len(),
                        status: s.status(),
                    }),
                }
            }
            Slot::Batch { batch, .. } => PostResponse {
                status: PostStatus::Recorded,
                retry: false,
                batch_complete: ws.batches[batch].is_complete(),
                qualification: None,
            },
        })
    }

    /// Feedback on the worker's latest qualification attempt, with links to
    /// the accepted areas.
    pub fn feedback(&self, worker: &str) -> Result<QualificationFeedback, ProtocolError> {
        let ws = self.worker(worker)?;
        let s = ws.sessions.last().expect("registered workers have a session");
        let mut fb = s.feedback()?;
        for img in &mut fb.images {
            let id = task_id(
                worker,
                &Slot::Qualification {
                    attempt: s.attempt,
                    image: img.image,
                },
            );
            img.overlays = overlay_urls(&id);
        }
        Ok(fb)
    }

    /// Image file behind a task id handed out to a worker.
    pub fn image_path(&self, task: &str) -> Result<&Path, ProtocolError> {
        let (worker, slot) = parse_task_id(task).ok_or_else(|| not_found(task))?;
        let ws = self.state.workers.get(worker).ok_or_else(|| not_found(task))?;
        match slot {
            Slot::Qualification { attempt, image } => {
                if attempt == 0 || attempt as usize > ws.sessions.len() + 1 || image >= self.setup.qualification.len() {
                    return Err(not_found(task));
                }
                Ok(&self.setup.qualification[image].entry.image)
            }
            Slot::Batch { batch, position } => {
                let item = ws
                    .batches
                    .get(batch)
                    .and_then(|b| b.items.get(position))
                    .ok_or_else(|| not_found(task))?;
                Ok(match *item {
                    ItemRef::Task(i) => &self.setup.tasks[i].entry.image,
                    ItemRef::Golden(g) => &self.setup.golden[g].entry.image,
                })
            }
        }
    }

    /// Accepted area of a qualification image as a PNG, available once the
    /// worker has clicked that image.
    pub fn overlay_png(&self, task: &str, role: Role) -> Result<Vec<u8>, ProtocolError> {
        let (worker, slot) = parse_task_id(task).ok_or_else(|| not_found(task))?;
        let ws = self.state.workers.get(worker).ok_or_else(|| not_found(task))?;
        match slot {
            Slot::Qualification { attempt, image } => {
                let clicked = attempt >= 1
                    && ws
                        .sessions
                        .get(attempt as usize - 1)
                        .and_then(|s| s.results.get(image))
                        .is_some_and(Option::is_some);
                if !clicked {
                    return Err(not_found(task));
                }
                Ok(self.setup.qualification[image].areas[role as usize].to_png_bytes())
            }
            Slot::Batch { .. } => Err(not_found(task)),
        }
    }

    /// Every annotation of every batch in log order; golden ones flagged.
    pub fn annotations(&self) -> Vec<Annotation> {
        let mut out = Vec::new();
        for (worker, ws) in &self.state.workers {
            for (bi, b) in ws.batches.iter().enumerate() {
                for (pos, p) in b.posted.iter().enumerate() {
                    let Some(p) = p else { continue };
                    let entry = match b.items[pos] {
                        ItemRef::Task(i) => &self.setup.tasks[i].entry,
                        ItemRef::Golden(g) => &self.setup.golden[g].entry,
                    };
                    out.push(Annotation {
                        worker: worker.clone(),
                        task: task_id(worker, &Slot::Batch { batch: bi, position: pos }),
                        id: entry.id(),
                        class: entry.class.clone(),
                        image: entry.image.clone(),
                        golden: matches!(b.items[pos], ItemRef::Golden(_)),
                        bbox: box_from_clicks(&p.clicks),
                        clicks: p.clicks.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn metrics(&self) -> AdminMetrics {
        let mut ious = Vec::new();
        let mut annotations = 0;
        let mut blocked = 0;
        let mut submitted = 0;
        for ws in self.state.workers.values() {
            for b in &ws.batches {
                blocked += b.blocked;
                for (item, p) in b.items.iter().zip(&b.posted) {
                    let Some(p) = p else { continue };
                    annotations += 1;
                    if let ItemRef::Task(i) = *item {
                        if let Some(gt) = &self.setup.tasks[i].gt_box {
                            ious.push((b.class.as_str(), iou_boxes(&box_from_clicks(&p.clicks), gt)));
                        }
                    }
                }
                if b.is_complete() {
                    submitted += 1;
                }
            }
        }
        let timing = log_timing(&self.events, self.setup.config.pay_per_batch);
        AdminMetrics {
            workers: self.state.workers.len(),
            qualified: self.state.workers.values().filter(|w| w.qualified()).count(),
            annotations,
            golden_blocked: blocked,
            batches_submitted: submitted,
            quality: quality_from_ious(&ious),
            timing,
        }
    }
}
