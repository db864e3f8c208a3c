use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Engine, EngineError, GestureEvent};
use crate::config::{ConfigError, KvConfig};
use crate::dataset::{Frame, GestureKind, NOMINAL_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotCommand {
    Stop,
    MoveXPos,
    MoveXNeg,
    MoveYPos,
    MoveYNeg,
    MoveZPos,
    MoveZNeg,
    OpenGripper,
    CloseGripper,
}

impl RobotCommand {
    pub const ALL: [RobotCommand; 9] = [
        RobotCommand::Stop,
        RobotCommand::MoveXPos,
        RobotCommand::MoveXNeg,
        RobotCommand::MoveYPos,
        RobotCommand::MoveYNeg,
        RobotCommand::MoveZPos,
        RobotCommand::MoveZNeg,
        RobotCommand::OpenGripper,
        RobotCommand::CloseGripper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RobotCommand::Stop => "stop",
            RobotCommand::MoveXPos => "move_x_pos",
            RobotCommand::MoveXNeg => "move_x_neg",
            RobotCommand::MoveYPos => "move_y_pos",
            RobotCommand::MoveYNeg => "move_y_neg",
            RobotCommand::MoveZPos => "move_z_pos",
            RobotCommand::MoveZNeg => "move_z_neg",
            RobotCommand::OpenGripper => "open_gripper",
            RobotCommand::CloseGripper => "close_gripper",
        }
    }
}

impl fmt::Display for RobotCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RobotCommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RobotCommand::ALL
            .iter()
            .find(|c| c.name() == s.trim())
            .copied()
            .ok_or_else(|| format!("unknown robot command `{s}`"))
    }
}

/// Gesture `(kind, class)` to robot command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMap {
    pub entries: Vec<(GestureKind, u32, RobotCommand)>,
}

impl Default for CommandMap {
    fn default() -> Self {
        use RobotCommand::*;
        let mut entries = vec![
            (GestureKind::Static, 1, Stop),
            (GestureKind::Static, 2, OpenGripper),
            (GestureKind::Static, 3, CloseGripper),
        ];
        for (c, cmd) in [MoveXPos, MoveXNeg, MoveYPos, MoveYNeg, MoveZPos, MoveZNeg].into_iter().enumerate() {
            entries.push((GestureKind::Dynamic, c as u32 + 1, cmd));
        }
        Self { entries }
    }
}

impl CommandMap {
    pub fn get(&self, kind: GestureKind, class: u32) -> Option<RobotCommand> {
        self.entries
            .iter()
            .find(|(k, c, _)| *k == kind && *c == class)
            .map(|e| e.2)
    }

    /// Reads `command.SG<class> = <name>` / `command.DG<class> = <name>` keys.
    /// Any such key replaces the defaults entirely.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for key in cfg.keys() {
            let Some(tag) = key.strip_prefix("command.") else { continue };
            let invalid = |reason: String| ConfigError::Invalid {
                key: key.to_string(),
                value: cfg.get(key).unwrap_or_default().to_string(),
                reason,
            };
            let (kind, class) = if let Some(c) = tag.strip_prefix("SG") {
                (GestureKind::Static, c)
            } else if let Some(c) = tag.strip_prefix("DG") {
                (GestureKind::Dynamic, c)
            } else {
                return Err(invalid("expected command.SG<n> or command.DG<n>".into()));
            };
            let class: u32 = class.parse().map_err(|_| invalid("bad class number".into()))?;
            let cmd: RobotCommand = cfg.get(key).unwrap_or_default().parse().map_err(invalid)?;
            entries.push((kind, class, cmd));
        }
        Ok(if entries.is_empty() { Self::default() } else { Self { entries } })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub validations: usize,
    pub stop_validations: usize,
    /// Frames without an eligible event before the manager pauses.
    pub pause_timeout: usize,
    /// Let provisional DG events count once their completion reaches
    /// `anticipate_min_completion`.
    pub anticipate: bool,
    pub anticipate_min_completion: f64,
    pub commands: CommandMap,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            validations: 3,
            stop_validations: 1,
            pause_timeout: 3 * NOMINAL_RATE_HZ as usize,
            anticipate: false,
            anticipate_min_completion: 0.5,
            commands: CommandMap::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paused,
    Active,
}

/// Validation-count state machine from gated events to commands.
#[derive(Debug, Clone)]
pub struct TaskManager {
    config: TaskConfig,
    candidate: Option<(GestureKind, u32)>,
    count: usize,
    mode: Mode,
    last_event: Option<usize>,
    /// Segment whose events already produced a command.
    spent_segment: Option<(GestureKind, usize)>,
}

impl TaskManager {
    pub fn new(config: TaskConfig) -> Self {
        Self {
            config,
            candidate: None,
            count: 0,
            mode: Mode::Paused,
            last_event: None,
            spent_segment: None,
        }
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn candidate(&self) -> Option<(GestureKind, u32, usize)> {
        self.candidate.map(|(k, c)| (k, c, self.count))
    }

    pub fn eligible(&self, e: &GestureEvent) -> bool {
        !e.provisional || (self.config.anticipate && e.completion >= self.config.anticipate_min_completion)
    }

    /// Advances the pause timer to stream index `index`.
    pub fn tick(&mut self, index: usize) {
        if self.mode == Mode::Active {
            let idle = self.last_event.map(|l| index.saturating_sub(l)).unwrap_or(usize::MAX);
            if idle > self.config.pause_timeout {
                self.mode = Mode::Paused;
                self.candidate = None;
                self.count = 0;
            }
        }
    }

    pub fn step(&mut self, e: &GestureEvent) -> Option<RobotCommand> {
        if !self.eligible(e) {
            return None;
        }
        if e.kind == GestureKind::Dynamic && self.spent_segment == Some((e.kind, e.segment_start)) {
            return None;
        }
        self.mode = Mode::Active;
        self.last_event = Some(e.index);
        let key = (e.kind, e.class_id);
        if self.candidate == Some(key) {
            self.count += 1;
        } else {
            self.candidate = Some(key);
            self.count = 1;
        }
        let command = self.config.commands.get(e.kind, e.class_id);
        let needed = if command == Some(RobotCommand::Stop) {
            self.config.stop_validations
        } else {
            self.config.validations
        }
        .max(1);
        if self.count < needed {
            return None;
        }
        self.candidate = None;
        self.count = 0;
        if e.kind == GestureKind::Dynamic {
            self.spent_segment = Some((e.kind, e.segment_start));
        }
        if command.is_none() {
            tracing::info!(kind = %e.kind, class = e.class_id, "validated gesture has no command mapping");
        }
        command
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    /// Stream index at which the command was issued.
    pub index: usize,
    pub command: RobotCommand,
    /// Stream time from the triggering event's frame to issue, plus the
    /// wall time spent processing the frame that triggered it.
    pub latency_ms: f64,
}

/// Logging stand-in for a robot.
#[derive(Debug, Clone, Default)]
pub struct RobotLog {
    pub records: Vec<CommandRecord>,
}

impl RobotLog {
    pub fn send(&mut self, record: CommandRecord) {
        tracing::info!(index = record.index, command = %record.command, latency_ms = record.latency_ms, "robot command");
        self.records.push(record);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionOutput {
    pub events: Vec<GestureEvent>,
    pub commands: Vec<CommandRecord>,
}

/// Engine, task manager and robot log for one stream.
pub struct Session {
    pub engine: Engine,
    pub task: TaskManager,
    pub robot: RobotLog,
    rate: f64,
}

impl Session {
    pub fn new(engine: Engine, task: TaskConfig) -> Self {
        Self {
            engine,
            task: TaskManager::new(task),
            robot: RobotLog::default(),
            rate: NOMINAL_RATE_HZ,
        }
    }

    fn route(&mut self, events: Vec<GestureEvent>, at: usize, started: Instant) -> SessionOutput {
        let mut commands = Vec::new();
        for e in &events {
            if let Some(command) = self.task.step(e) {
                let stream_ms = at.saturating_sub(e.index) as f64 * 1000.0 / self.rate;
                let rec = CommandRecord {
                    index: at,
                    command,
                    latency_ms: stream_ms + started.elapsed().as_secs_f64() * 1000.0,
                };
                self.robot.send(rec.clone());
                commands.push(rec);
            }
        }
        self.task.tick(at);
        SessionOutput { events, commands }
    }

    pub fn push_frame(&mut self, frame: Frame) -> Result<SessionOutput, EngineError> {
        let started = Instant::now();
        let at = self.engine.frames_seen();
        let events = self.engine.push_frame(frame)?;
        Ok(self.route(events, at, started))
    }

    pub fn push_frame_with_motion(&mut self, frame: Frame, moving: bool) -> Result<SessionOutput, EngineError> {
        let started = Instant::now();
        let at = self.engine.frames_seen();
        let events = self.engine.push_frame_with_motion(frame, moving)?;
        Ok(self.route(events, at, started))
    }

    pub fn finish(&mut self) -> Result<SessionOutput, EngineError> {
        let started = Instant::now();
        let at = self.engine.frames_seen().saturating_sub(1);
        let events = self.engine.finish()?;
        Ok(self.route(events, at, started))
    }
}
