//! Visual servoing: keep the target centered with yaw and heave and hold its
//! box width with surge. Also owns the operator / tracker mode machine and
//! the altitude floor.

use reefloop_core::BBox;
use serde::{Deserialize, Serialize};

use crate::vehicle::ControlCommand;
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 1.2, ki: 0.05, kd: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID update. The integral is clamped to `±integral_clamp`; the
/// derivative term is zero on the first step after a reset.
pub fn pid_step(gains: &PidGains, state: &mut PidState, error: f64, dt: f64, integral_clamp: f64) -> f64 {
    state.integral = (state.integral + error * dt).clamp(-integral_clamp, integral_clamp);
    let derivative = state.prev_error.map_or(0.0, |p| (error - p) / dt);
    state.prev_error = Some(error);
    gains.kp * error + gains.ki * state.integral + gains.kd * derivative
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisGains {
    pub yaw: PidGains,
    pub heave: PidGains,
    pub surge: PidGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    /// Box width to hold, px. Taken from the initialization box when unset.
    pub reference_width: Option<f64>,
    pub gains: AxisGains,
    /// Minimum altitude above the seafloor, m.
    pub altitude_floor: f64,
    /// Upward command per meter of altitude below the floor. Above the floor
    /// it limits the descent command to this gain times the margin, which
    /// brakes the vehicle before it reaches the floor.
    pub floor_gain: f64,
    pub loss_confidence_threshold: f64,
    /// Consecutive low-confidence frames before the target counts as lost.
    pub loss_patience: u32,
    /// Integral clamps for (yaw, heave, surge).
    pub integrator_clamp: [f64; 3],
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            reference_width: None,
            gains: AxisGains::default(),
            altitude_floor: 0.75,
            floor_gain: 0.3,
            loss_confidence_threshold: 0.4,
            loss_patience: 5,
            integrator_clamp: [5.0, 5.0, 10.0],
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidServo(m));
        if !(0.5..=1.0).contains(&self.altitude_floor) {
            return bad(format!("altitude floor {} m outside [0.5, 1.0]", self.altitude_floor));
        }
        let g = &self.gains;
        if [g.yaw, g.heave, g.surge].iter().any(|p| p.kp < 0.0 || p.ki < 0.0 || p.kd < 0.0) {
            return bad("PID gains must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.loss_confidence_threshold) {
            return bad("loss threshold must be in [0, 1]".into());
        }
        if self.loss_patience == 0 {
            return bad("loss patience must be at least one frame".into());
        }
        if self.floor_gain <= 0.0 || self.integrator_clamp.iter().any(|c| *c < 0.0) {
            return bad("floor gain must be positive and clamps non-negative".into());
        }
        if self.reference_width.is_some_and(|w| w <= 0.0) {
            return bad("reference width must be positive".into());
        }
        Ok(())
    }
}

/// Normalized image-space errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageErrors {
    /// Horizontal offset of the box center, positive right.
    pub e_x: f64,
    /// Vertical offset, positive down.
    pub e_y: f64,
    /// Width shortfall relative to the reference, positive when too small.
    pub e_w: f64,
}

pub fn compute_errors(bbox: &BBox, frame_dims: (u32, u32), reference_width: f64) -> ImageErrors {
    let (w, h) = (frame_dims.0 as f64, frame_dims.1 as f64);
    let c = bbox.center();
    ImageErrors {
        e_x: (c.u - w / 2.0) / w,
        e_y: (c.v - h / 2.0) / h,
        e_w: (reference_width - bbox.w) / reference_width,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerMode {
    Manual,
    Initializing,
    Tracking,
    Lost,
}

impl TrackerMode {
    pub const ALL: [TrackerMode; 4] =
        [TrackerMode::Manual, TrackerMode::Initializing, TrackerMode::Tracking, TrackerMode::Lost];

    /// Modes during which the operator is in charge or has been asked to be.
    pub fn needs_operator(&self) -> bool {
        matches!(self, TrackerMode::Manual | TrackerMode::Lost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ModeEvent {
    /// Operator drew the first box.
    InitBox,
    /// Operator drew a new box to re-acquire.
    Reinit,
    /// Operator took the controls.
    Override,
    /// Operator handed control back.
    Release,
    TrackerReady,
    Confidence {
        value: f64,
    },
    TrackerFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTransition {
    pub t: f64,
    pub from: TrackerMode,
    pub to: TrackerMode,
    pub event: ModeEvent,
}

/// Mode machine state besides the mode itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModeMemory {
    /// Consecutive sub-threshold confidence reports while tracking.
    pub low_streak: u32,
    /// A target has been initialized at least once.
    pub acquired: bool,
}

/// The transition table. Total over every (mode, event) pair.
pub fn mode_update(
    mode: TrackerMode,
    memory: ModeMemory,
    event: &ModeEvent,
    config: &ServoConfig,
) -> (TrackerMode, ModeMemory) {
    use TrackerMode::*;
    let reset = ModeMemory { low_streak: 0, ..memory };
    match (*event, mode) {
        (ModeEvent::Override, _) => (Manual, reset),
        (ModeEvent::InitBox | ModeEvent::Reinit, _) => (Initializing, ModeMemory { low_streak: 0, acquired: true }),
        (ModeEvent::Release, Manual) if memory.acquired => (Tracking, reset),
        (ModeEvent::Release, m) => (m, memory),
        (ModeEvent::TrackerReady, Initializing) => (Tracking, reset),
        (ModeEvent::TrackerReady, m) => (m, memory),
        (ModeEvent::Confidence { value }, Tracking) => {
            if value < config.loss_confidence_threshold {
                let streak = memory.low_streak + 1;
                if streak >= config.loss_patience {
                    (Lost, reset)
                } else {
                    (Tracking, ModeMemory { low_streak: streak, ..memory })
                }
            } else {
                (Tracking, reset)
            }
        }
        (ModeEvent::Confidence { .. }, m) => (m, memory),
        (ModeEvent::TrackerFailed, Tracking | Initializing) => (Lost, reset),
        (ModeEvent::TrackerFailed, m) => (m, memory),
    }
}

/// What the tracker reported this tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub bbox: BBox,
    pub confidence: f64,
    /// False while the tracker is still in its start-up phase.
    pub ready: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoInput {
    /// `None` when the tracker produced nothing (not started or failed).
    pub observation: Option<Observation>,
    pub frame_dims: (u32, u32),
    /// Altitude above the seafloor as measured by the DVL.
    pub altitude: f64,
    /// The operator's stick, used verbatim in manual mode.
    pub operator: Option<ControlCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoOutput {
    pub command: ControlCommand,
    pub mode: TrackerMode,
    pub errors: Option<ImageErrors>,
    /// True when the altitude floor changed the heave command.
    pub floor_limited: bool,
}

/// Operator actions that reach the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum OperatorAction {
    InitBox { bbox: BBox },
    Reinit { bbox: BBox },
    Override,
    Release,
}

/// Clamp the heave command so the vehicle never descends through the floor.
/// Returns the new heave and whether it changed.
pub fn enforce_altitude_floor(heave: f64, altitude: f64, config: &ServoConfig) -> (f64, bool) {
    let min_heave = config.floor_gain * (config.altitude_floor - altitude);
    let limited = heave.max(min_heave).clamp(-1.0, 1.0);
    (limited, limited != heave.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct ServoController {
    config: ServoConfig,
    mode: TrackerMode,
    memory: ModeMemory,
    reference_width: Option<f64>,
    pids: [PidState; 3],
    transitions: Vec<ModeTransition>,
}

impl ServoController {
    pub fn new(config: ServoConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self {
            reference_width: config.reference_width,
            config,
            mode: TrackerMode::Manual,
            memory: ModeMemory::default(),
            pids: [PidState::default(); 3],
            transitions: Vec::new(),
        })
    }

    pub fn config(&self) -> &ServoConfig {
        &self.config
    }

    pub fn mode(&self) -> TrackerMode {
        self.mode
    }

    pub fn reference_width(&self) -> Option<f64> {
        self.reference_width
    }

    pub fn pid_states(&self) -> &[PidState; 3] {
        &self.pids
    }

    /// Every transition so far, in order.
    pub fn transitions(&self) -> &[ModeTransition] {
        &self.transitions
    }

    fn apply(&mut self, event: ModeEvent, t: f64) {
        let (next, memory) = mode_update(self.mode, self.memory, &event, &self.config);
        self.memory = memory;
        if next != self.mode {
            if next == TrackerMode::Tracking {
                self.pids = [PidState::default(); 3];
            }
            self.transitions.push(ModeTransition { t, from: self.mode, to: next, event });
            self.mode = next;
        }
    }

    pub fn operator(&mut self, action: OperatorAction, t: f64) {
        match action {
            OperatorAction::InitBox { bbox } | OperatorAction::Reinit { bbox } => {
                if self.config.reference_width.is_none() {
                    self.reference_width = Some(bbox.w);
                }
                let event = if matches!(action, OperatorAction::InitBox { .. }) {
                    ModeEvent::InitBox
                } else {
                    ModeEvent::Reinit
                };
                self.apply(event, t);
            }
            OperatorAction::Override => self.apply(ModeEvent::Override, t),
            OperatorAction::Release => self.apply(ModeEvent::Release, t),
        }
    }

    /// One control tick, called at the tracker rate.
    pub fn step(&mut self, input: &ServoInput, dt: f64, t: f64) -> ServoOutput {
        match (self.mode, input.observation) {
            (TrackerMode::Initializing, Some(obs)) if obs.ready => self.apply(ModeEvent::TrackerReady, t),
            (TrackerMode::Initializing | TrackerMode::Tracking, None) => self.apply(ModeEvent::TrackerFailed, t),
            _ => {}
        }
        if let (TrackerMode::Tracking, Some(obs)) = (self.mode, input.observation) {
            self.apply(ModeEvent::Confidence { value: obs.confidence }, t);
        }

        let mut errors = None;
        let command = match self.mode {
            TrackerMode::Tracking => {
                let obs = input.observation.expect("tracking implies an observation");
                let reference = self.reference_width.unwrap_or(obs.bbox.w);
                let e = compute_errors(&obs.bbox, input.frame_dims, reference);
                errors = Some(e);
                let c = &self.config;
                let yaw = pid_step(&c.gains.yaw, &mut self.pids[0], e.e_x, dt, c.integrator_clamp[0]);
                // target low in the image: sink, i.e. negative (upward-positive) heave
                let heave = -pid_step(&c.gains.heave, &mut self.pids[1], e.e_y, dt, c.integrator_clamp[1]);
                let surge = pid_step(&c.gains.surge, &mut self.pids[2], e.e_w, dt, c.integrator_clamp[2]);
                ControlCommand::new(surge, 0.0, heave, yaw)
            }
            TrackerMode::Manual => input.operator.unwrap_or_default().clamped(),
            TrackerMode::Initializing | TrackerMode::Lost => ControlCommand::ZERO,
        };
        let (heave, floor_limited) = enforce_altitude_floor(command.heave, input.altitude, &self.config);
        ServoOutput { command: ControlCommand { heave, ..command }, mode: self.mode, errors, floor_limited }
    }
}
