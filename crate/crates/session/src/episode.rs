//! Fixed-tick closed-loop episodes: simulator, tracker, servo and an
//! operator, with a complete per-tick log.
//!
//! Each tick runs in this order:
//! 1. the operator sees the current state and may issue commands, which
//!    take effect after `operator_delay_ticks` ticks;
//! 2. due commands are applied (a box (re)initializes the tracker on the
//!    current frame);
//! 3. sensors are read and dead reckoning advances;
//! 4. the tracker processes the current frame;
//! 5. the servo turns the observation into a command;
//! 6. the simulator advances by one tick under that command.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use reefloop_core::geometry::iou;
use reefloop_core::tracker::{Frame, TrackStatus, Tracker};
use reefloop_core::BBox;
use reefloop_sim::{
    dead_reckon, AnimalState, ControlCommand, ModeTransition, NavEstimate, Observation, OperatorAction, Scenario,
    SensorPacket, ServoConfig, ServoController, ServoInput, Simulation, TrackerMode, VehicleState, MIN_TICK_HZ,
};
use serde::{Deserialize, Serialize};

use crate::trackers::TrackerSpec;
use crate::{io_err, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pacing {
    /// Run as fast as possible.
    SimTime,
    /// Hold each tick to its wall-clock slot.
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    /// Control rate; the scenario's frame rate when unset.
    pub tick_hz: Option<f64>,
    pub servo: ServoConfig,
    pub tracker: TrackerSpec,
    pub operator_delay_ticks: usize,
    pub pacing: Pacing,
    /// Stop early after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            tick_hz: None,
            servo: ServoConfig::default(),
            tracker: TrackerSpec::NccScale,
            operator_delay_ticks: 0,
            pacing: Pacing::SimTime,
            max_ticks: None,
        }
    }
}

/// What an operator can issue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    InitBox {
        bbox: BBox,
    },
    /// Re-acquire; without a box the tracker restarts on its last box.
    Reinit {
        bbox: Option<BBox>,
    },
    /// Take the controls with this stick; held until the next override or
    /// a release.
    Override {
        command: ControlCommand,
    },
    Release,
}

/// The state an operator sees before acting.
#[derive(Debug, Clone, Copy)]
pub struct OperatorView<'a> {
    pub tick: u64,
    pub t: f64,
    pub mode: TrackerMode,
    /// Box the tracker reported on the previous tick.
    pub tracker_box: Option<BBox>,
    pub gt: Option<BBox>,
    pub frame: Option<&'a Frame>,
}

pub trait Operator {
    fn name(&self) -> String;

    fn poll(&mut self, view: &OperatorView) -> Vec<OperatorCommand>;

    /// The finished tick and the frame it was tracked on, if rendered.
    fn observe(&mut self, _record: &TickRecord, _frame: Option<&Frame>) {}

    /// Whether the operator needs rendered frames even when the tracker does not.
    fn wants_frames(&self) -> bool {
        false
    }

    /// Ask the episode to end before the scenario does.
    fn stop_requested(&self) -> bool {
        false
    }
}

/// Draws the ground-truth box at the start and re-draws it after the
/// target has been lost for `reinit_after_s` while visible.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    pub reinit_after_s: Option<f64>,
    /// Extra commands issued at fixed times.
    pub script: Vec<(f64, OperatorCommand)>,
    initialized: bool,
    lost_since: Option<f64>,
}

impl Default for ScriptedOperator {
    fn default() -> Self {
        Self::new(Some(2.0))
    }
}

impl ScriptedOperator {
    pub fn new(reinit_after_s: Option<f64>) -> Self {
        Self { reinit_after_s, script: Vec::new(), initialized: false, lost_since: None }
    }

    pub fn with_script(mut self, mut script: Vec<(f64, OperatorCommand)>) -> Self {
        script.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.script = script;
        self
    }
}

impl Operator for ScriptedOperator {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn poll(&mut self, view: &OperatorView) -> Vec<OperatorCommand> {
        let mut out = Vec::new();
        if !self.initialized {
            if let Some(gt) = view.gt {
                out.push(OperatorCommand::InitBox { bbox: gt });
                self.initialized = true;
            }
        }
        if view.mode == TrackerMode::Lost {
            let since = *self.lost_since.get_or_insert(view.t);
            if let (Some(k), Some(gt)) = (self.reinit_after_s, view.gt) {
                if view.t - since >= k - 1e-9 {
                    out.push(OperatorCommand::Reinit { bbox: Some(gt) });
                    self.lost_since = None;
                }
            }
        } else {
            self.lost_since = None;
        }
        while self.script.first().is_some_and(|(t, _)| *t <= view.t + 1e-9) {
            out.push(self.script.remove(0).1);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerSample {
    pub bbox: BBox,
    pub confidence: f64,
    pub status: TrackStatus,
}

/// Everything that happened in one tick. Wall-clock timings are kept out
/// of the record so that equal seeds give equal logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub vehicle: VehicleState,
    pub animal: AnimalState,
    pub sensors: SensorPacket,
    pub nav: NavEstimate,
    pub tracker: Option<TrackerSample>,
    pub gt: Option<BBox>,
    /// IoU of the tracker box against the ground truth; zero without a
    /// tracker box, absent when the target is out of view.
    pub iou: Option<f64>,
    pub mode: TrackerMode,
    pub command: ControlCommand,
    pub floor_limited: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operator: Vec<OperatorCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub episode_id: String,
    pub scenario: Scenario,
    pub tracker: String,
    pub operator: String,
    pub tick_hz: f64,
    pub servo: ServoConfig,
    pub operator_delay_ticks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub ticks: Vec<TickRecord>,
    pub transitions: Vec<ModeTransition>,
}

/// One line of `log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(EpisodeHeader),
    Tick(TickRecord),
    Transition(ModeTransition),
}

impl EpisodeLog {
    /// Header first, then ticks with each transition after the tick it
    /// happened in.
    pub fn lines(&self) -> Vec<LogLine> {
        let mut out = Vec::with_capacity(1 + self.ticks.len() + self.transitions.len());
        out.push(LogLine::Header(self.header.clone()));
        let mut next = self.transitions.iter().peekable();
        for tick in &self.ticks {
            out.push(LogLine::Tick(tick.clone()));
            while let Some(tr) = next.next_if(|tr| tr.t <= tick.t) {
                out.push(LogLine::Transition(*tr));
            }
        }
        out.extend(next.map(|tr| LogLine::Transition(*tr)));
        out
    }

    pub fn from_lines(lines: Vec<LogLine>) -> Result<Self, SessionError> {
        let mut lines = lines.into_iter();
        let header = match lines.next() {
            Some(LogLine::Header(h)) => h,
            _ => return Err(SessionError::Corrupt("episode log does not start with a header".into())),
        };
        let mut log = EpisodeLog { header, ticks: Vec::new(), transitions: Vec::new() };
        for line in lines {
            match line {
                LogLine::Header(_) => return Err(SessionError::Corrupt("second header in episode log".into())),
                LogLine::Tick(t) => log.ticks.push(t),
                LogLine::Transition(t) => log.transitions.push(t),
            }
        }
        Ok(log)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.header.tick_hz
    }

    /// Maximal spans of ticks in which the operator was in charge or had
    /// been called (Manual or Lost).
    pub fn intervention_intervals(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut open: Option<f64> = None;
        for tick in &self.ticks {
            match (tick.mode.needs_operator(), open) {
                (true, None) => open = Some(tick.t),
                (false, Some(start)) => {
                    out.push(Interval { start, end: tick.t });
                    open = None;
                }
                _ => {}
            }
        }
        if let (Some(start), Some(last)) = (open, self.ticks.last()) {
            out.push(Interval { start, end: last.t + self.dt() });
        }
        out
    }

    pub fn summary(&self) -> EpisodeSummary {
        let ticks = self.ticks.len();
        let autonomous = self.ticks.iter().filter(|t| t.mode == TrackerMode::Tracking).count();
        let ious: Vec<f64> = self.ticks.iter().filter_map(|t| t.iou).collect();
        EpisodeSummary {
            episode_id: self.header.episode_id.clone(),
            scenario: self.header.scenario.id.clone(),
            tracker: self.header.tracker.clone(),
            duration_s: ticks as f64 * self.dt(),
            ticks,
            autonomous_ticks: autonomous,
            percent_autonomous: if ticks == 0 { 0.0 } else { 100.0 * autonomous as f64 / ticks as f64 },
            mean_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
            track_losses: self.transitions.iter().filter(|t| t.to == TrackerMode::Lost).count(),
            interventions: self.intervention_intervals(),
            min_altitude: self
                .ticks
                .iter()
                .map(|t| t.vehicle.altitude(self.header.scenario.seafloor_depth))
                .fold(f64::INFINITY, f64::min),
            floor_limited_ticks: self.ticks.iter().filter(|t| t.floor_limited).count(),
        }
    }

    /// `depth.csv`, `modes.csv` and `interventions.csv` in `dir`.
    pub fn write_exports(&self, dir: &Path) -> Result<(), SessionError> {
        let mut depth = String::from("timestamp,depth\n");
        let mut modes = String::from("timestamp,mode\n");
        for t in &self.ticks {
            depth.push_str(&format!("{},{}\n", t.t, t.vehicle.depth()));
            modes.push_str(&format!("{},{}\n", t.t, mode_name(t.mode)));
        }
        let mut spans = String::from("start,end\n");
        for i in self.intervention_intervals() {
            spans.push_str(&format!("{},{}\n", i.start, i.end));
        }
        for (name, text) in [("depth.csv", depth), ("modes.csv", modes), ("interventions.csv", spans)] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

pub fn mode_name(mode: TrackerMode) -> &'static str {
    match mode {
        TrackerMode::Manual => "manual",
        TrackerMode::Initializing => "initializing",
        TrackerMode::Tracking => "tracking",
        TrackerMode::Lost => "lost",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode_id: String,
    pub scenario: String,
    pub tracker: String,
    pub duration_s: f64,
    pub ticks: usize,
    pub autonomous_ticks: usize,
    pub percent_autonomous: f64,
    /// Over ticks with the target in view.
    pub mean_iou: Option<f64>,
    pub track_losses: usize,
    pub interventions: Vec<Interval>,
    pub min_altitude: f64,
    pub floor_limited_ticks: usize,
}

/// Wall-clock cost per tick, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTiming {
    /// Whole tick, excluding pacing sleeps.
    pub tick_ms: Vec<f64>,
    pub track_ms: Vec<f64>,
    pub servo_ms: Vec<f64>,
    /// Time between consecutive tick starts.
    pub interval_ms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: EpisodeLog,
    pub summary: EpisodeSummary,
    pub timing: EpisodeTiming,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Run one episode to the end of the scenario (or `max_ticks`, or until
/// the operator asks to stop).
pub fn run_episode(
    scenario: Scenario,
    config: &EpisodeConfig,
    operator: &mut dyn Operator,
) -> Result<EpisodeOutcome, SessionError> {
    let tick_hz = config.tick_hz.unwrap_or(scenario.frame_rate);
    if !(tick_hz >= MIN_TICK_HZ) {
        return Err(SessionError::TickRate(tick_hz));
    }
    let mut sim = Simulation::with_tick_rate(scenario, tick_hz)?;
    let mut servo = ServoController::new(config.servo)?;
    let oracle = config.tracker == TrackerSpec::Oracle;
    let mut tracker: Option<Box<dyn Tracker>> = if oracle { None } else { Some(config.tracker.instantiate(None)?) };
    let render = !oracle || operator.wants_frames();

    let header = EpisodeHeader {
        episode_id: format!("{}-{}", sim.scenario().id, config.tracker.id()),
        scenario: sim.scenario().clone(),
        tracker: config.tracker.id(),
        operator: operator.name(),
        tick_hz,
        servo: config.servo,
        operator_delay_ticks: config.operator_delay_ticks,
    };
    let dt = sim.scenario().dt();
    let dims = (sim.scenario().camera.width, sim.scenario().camera.height);
    let mut nav = NavEstimate::new(sim.vehicle().position);
    let mut pending: VecDeque<(u64, OperatorCommand)> = VecDeque::new();
    let mut stick: Option<ControlCommand> = None;
    let mut initialized = false;
    let mut last_box: Option<BBox> = None;
    let mut ticks = Vec::with_capacity(sim.scenario().frame_count());
    let mut timing = EpisodeTiming::default();
    let started = Instant::now();
    let mut last_start: Option<Instant> = None;

    while !sim.is_finished() && config.max_ticks.is_none_or(|m| sim.tick() < m) && !operator.stop_requested() {
        let tick_start = Instant::now();
        if let Some(prev) = last_start {
            timing.interval_ms.push(ms(tick_start - prev));
        }
        last_start = Some(tick_start);
        let tick = sim.tick();
        let t = sim.time();
        let gt = sim.gt_bbox();
        let frame = render.then(|| sim.render());

        let view = OperatorView { tick, t, mode: servo.mode(), tracker_box: last_box, gt, frame: frame.as_ref() };
        let issued = operator.poll(&view);
        pending.extend(issued.iter().map(|c| (tick + config.operator_delay_ticks as u64, *c)));

        let mut init_obs: Option<Observation> = None;
        while pending.front().is_some_and(|(due, _)| *due <= tick) {
            let (_, cmd) = pending.pop_front().expect("checked above");
            match cmd {
                OperatorCommand::InitBox { bbox } | OperatorCommand::Reinit { bbox: Some(bbox) } => {
                    let ok = match (&mut tracker, &frame) {
                        (Some(tr), Some(f)) => tr
                            .init(f, bbox)
                            .inspect_err(|e| log::warn!("tick {tick}: tracker init failed: {e}"))
                            .is_ok(),
                        _ => true,
                    };
                    let action = if matches!(cmd, OperatorCommand::InitBox { .. }) {
                        OperatorAction::InitBox { bbox }
                    } else {
                        OperatorAction::Reinit { bbox }
                    };
                    servo.operator(action, t);
                    initialized = ok;
                    last_box = Some(bbox);
                    init_obs = ok.then_some(Observation { bbox, confidence: 1.0, ready: false });
                }
                OperatorCommand::Reinit { bbox: None } => match last_box {
                    Some(bbox) => pending.push_front((tick, OperatorCommand::Reinit { bbox: Some(bbox) })),
                    None => log::warn!("tick {tick}: reinit without a box before any box was drawn"),
                },
                OperatorCommand::Override { command } => {
                    stick = Some(command);
                    servo.operator(OperatorAction::Override, t);
                }
                OperatorCommand::Release => {
                    stick = None;
                    servo.operator(OperatorAction::Release, t);
                }
            }
        }

        let sensors = sim.sense();
        nav = dead_reckon(&nav, &sensors)?;

        let track_start = Instant::now();
        let sample = if let Some(obs) = init_obs {
            Some(TrackerSample { bbox: obs.bbox, confidence: obs.confidence, status: TrackStatus::Initializing })
        } else if !initialized {
            None
        } else if oracle {
            gt.map(|bbox| TrackerSample { bbox, confidence: 1.0, status: TrackStatus::Ready })
        } else {
            let tr = tracker.as_mut().expect("non-oracle episodes own a tracker");
            match tr.track(frame.as_ref().expect("pixel trackers get frames")) {
                Ok(out) => Some(TrackerSample { bbox: out.bbox, confidence: out.confidence, status: out.status }),
                Err(e) => {
                    log::warn!("tick {tick}: tracker failed: {e}");
                    None
                }
            }
        };
        timing.track_ms.push(ms(track_start.elapsed()));
        if let Some(s) = &sample {
            last_box = Some(s.bbox);
        }
        let observation = init_obs.or(sample.map(|s| Observation {
            bbox: s.bbox,
            confidence: s.confidence,
            ready: s.status == TrackStatus::Ready,
        }));

        let servo_start = Instant::now();
        let input = ServoInput { observation, frame_dims: dims, altitude: sensors.dvl_altitude, operator: stick };
        let out = servo.step(&input, dt, t);
        timing.servo_ms.push(ms(servo_start.elapsed()));

        let record = TickRecord {
            tick,
            t,
            vehicle: *sim.vehicle(),
            animal: *sim.animal(),
            sensors,
            nav,
            tracker: sample,
            gt,
            iou: gt.map(|g| sample.map_or(0.0, |s| iou(&g, &s.bbox))),
            mode: out.mode,
            command: out.command,
            floor_limited: out.floor_limited,
            operator: issued,
        };
        operator.observe(&record, frame.as_ref());
        ticks.push(record);
        sim.step(&out.command)?;
        timing.tick_ms.push(ms(tick_start.elapsed()));

        if config.pacing == Pacing::WallClock {
            let slot = started + Duration::from_secs_f64((tick + 1) as f64 * dt);
            let now = Instant::now();
            if slot > now {
                std::thread::sleep(slot - now);
            }
        }
    }

    let log = EpisodeLog { header, ticks, transitions: servo.transitions().to_vec() };
    let summary = log.summary();
    Ok(EpisodeOutcome { log, summary, timing })
}
