//! Session registry. Each session owns an engine on its own thread; every
//! other thread talks to it through a command queue and gets copies back.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, info, warn};

use proact_core::config::{Config, ConfigError, PolicyKind, ScriptEntry, ScriptFile};
use proact_core::engine::{Engine, EngineError, EngineSnapshot};
use proact_core::harness::{drive, RunOptions, Scripted};
use proact_core::log::{EventLog, LogRecord};
use proact_core::world::HumanInput;

use crate::protocol::{CloseReason, ConfigRef, Control, ErrorCode, OpenOptions, Pace, SessionId};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Engine(String),
    #[error("unknown session `{0}`")]
    UnknownSession(SessionId),
    #[error("session `{0}` is closed")]
    Closed(SessionId),
}

impl From<EngineError> for ServiceError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => ServiceError::Config(c),
            other => ServiceError::Engine(other.to_string()),
        }
    }
}

impl ServiceError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ServiceError::Config(_) | ServiceError::Engine(_) => ErrorCode::Config,
            ServiceError::UnknownSession(_) => ErrorCode::UnknownSession,
            ServiceError::Closed(_) => ErrorCode::Closed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Close a session after this long without any request. `None` keeps
    /// sessions open until closed.
    pub idle_timeout: Option<Duration>,
    pub heartbeat: Duration,
    /// Where closed sessions leave `<id>.trace.toml` and `<id>.replay.toml`.
    pub trace_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: Some(Duration::from_secs(600)),
            heartbeat: Duration::from_secs(5),
            trace_dir: None,
        }
    }
}

/// What a subscriber receives, in log order.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Event(LogRecord),
    Closed(CloseReason),
}

#[derive(Debug, Clone)]
pub struct Closed {
    pub reason: CloseReason,
    pub trace: ScriptFile,
    /// Ticks run when the session closed.
    pub ticks: u64,
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// The headless run equivalent to a live session: its config with the
/// recorded trace as the only partner.
pub fn replay_config(cfg: &Config, trace: &ScriptFile, ticks: u64) -> Config {
    let mut c = cfg.clone();
    c.ticks = ticks;
    c.policy.kind = PolicyKind::Script;
    c.policy.script = trace.inputs.clone();
    c.abm.dir = None;
    if let Some(t) = &mut c.task {
        t.stop_on_complete = false;
    }
    c
}

pub fn replay(cfg: &Config, trace: &ScriptFile, ticks: u64) -> Result<EventLog, ServiceError> {
    let c = replay_config(cfg, trace, ticks);
    let mut engine = Engine::new(c.clone())?;
    let mut policy = Scripted::new(&c.policy.script, c.tick_length);
    drive(&mut engine, &mut policy, c.ticks, RunOptions::default());
    Ok(engine.into_log())
}

// ---------------------------------------------------------------------------
// Worker
// ---------------------------------------------------------------------------

enum Cmd {
    Input(HumanInput, Sender<u64>),
    Snapshot(Sender<Box<EngineSnapshot>>),
    Subscribe(u64, Sender<StreamItem>, Sender<()>),
    Control(Control, Sender<u64>),
    Close(Sender<Closed>),
}

struct Worker {
    id: SessionId,
    engine: Engine,
    cfg: Config,
    rx: Receiver<Cmd>,
    subscribers: Vec<Sender<StreamItem>>,
    trace: Vec<ScriptEntry>,
    pace: Pace,
    paused: bool,
    period: Duration,
    next_due: Instant,
    idle_timeout: Option<Duration>,
    last_activity: Instant,
    trace_dir: Option<PathBuf>,
}

enum Flow {
    Continue,
    Stop,
}

impl Worker {
    fn running(&self) -> bool {
        !self.paused && self.engine.tick() < self.cfg.ticks
    }

    fn step(&mut self) {
        let fresh = self.engine.step().to_vec();
        self.subscribers
            .retain(|s| fresh.iter().all(|r| s.send(StreamItem::Event(r.clone())).is_ok()));
    }

    /// The tick of the next step, which is the first to see a queued input.
    fn boundary(&self) -> u64 {
        self.engine.tick() + 1
    }

    fn handle(&mut self, cmd: Cmd) -> Flow {
        self.last_activity = Instant::now();
        match cmd {
            Cmd::Input(input, ack) => {
                let due = self.boundary();
                self.trace.push(ScriptEntry::at_tick(due, input.clone()));
                self.engine.submit(input);
                let _ = ack.send(due);
            }
            Cmd::Snapshot(reply) => {
                let _ = reply.send(Box::new(self.engine.snapshot()));
            }
            Cmd::Subscribe(from, tx, done) => {
                let history = self.engine.log().since(from);
                if history.iter().all(|r| tx.send(StreamItem::Event(r.clone())).is_ok()) {
                    self.subscribers.push(tx);
                }
                let _ = done.send(());
            }
            Cmd::Control(c, ack) => {
                match c {
                    Control::Pause => self.paused = true,
                    Control::Resume => {
                        self.paused = false;
                        self.next_due = Instant::now() + self.period;
                    }
                    Control::Step { ticks } => {
                        for _ in 0..ticks {
                            self.step();
                        }
                    }
                }
                let _ = ack.send(self.engine.tick());
            }
            Cmd::Close(reply) => {
                let _ = reply.send(self.finish(CloseReason::Requested));
                return Flow::Stop;
            }
        }
        Flow::Continue
    }

    fn finish(&mut self, reason: CloseReason) -> Closed {
        for s in &self.subscribers {
            let _ = s.send(StreamItem::Closed(reason));
        }
        self.subscribers.clear();
        let closed = Closed {
            reason,
            trace: ScriptFile {
                inputs: std::mem::take(&mut self.trace),
            },
            ticks: self.engine.tick(),
        };
        if let Some(dir) = &self.trace_dir {
            if let Err(e) = self.write_trace(dir, &closed) {
                warn!("session {}: could not write trace: {e}", self.id);
            }
        }
        info!("session {} closed ({reason:?}) after {} ticks", self.id, closed.ticks);
        closed
    }

    fn write_trace(&self, dir: &std::path::Path, closed: &Closed) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.trace.toml", self.id)), closed.trace.to_toml())?;
        let replay = replay_config(&self.cfg, &closed.trace, closed.ticks);
        std::fs::write(dir.join(format!("{}.replay.toml", self.id)), replay.to_toml())
    }

    fn wait(&self) -> Duration {
        let now = Instant::now();
        let tick_wait = match (self.running(), self.pace) {
            (true, Pace::Fast) => Duration::ZERO,
            (true, Pace::Realtime) => self.next_due.saturating_duration_since(now),
            (false, _) => Duration::from_millis(250),
        };
        match self.idle_timeout {
            Some(t) => tick_wait.min((self.last_activity + t).saturating_duration_since(now)),
            None => tick_wait,
        }
    }

    fn run(mut self) {
        loop {
            match self.rx.recv_timeout(self.wait()) {
                Ok(cmd) => {
                    if let Flow::Stop = self.handle(cmd) {
                        return;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return,
            }
            // Everything queued so far lands on this boundary.
            while let Ok(cmd) = self.rx.try_recv() {
                if let Flow::Stop = self.handle(cmd) {
                    return;
                }
            }
            if self.idle_timeout.is_some_and(|t| self.last_activity.elapsed() >= t) {
                self.finish(CloseReason::IdleTimeout);
                return;
            }
            if self.running() && (self.pace == Pace::Fast || Instant::now() >= self.next_due) {
                self.step();
                self.next_due += self.period;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct Handle {
    tx: Sender<Cmd>,
    config: Config,
}

pub struct Service {
    cfg: ServiceConfig,
    sessions: Mutex<HashMap<SessionId, Handle>>,
    next_id: AtomicU64,
}

impl Service {
    pub fn new(cfg: ServiceConfig) -> Self {
        Self {
            cfg,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn resolve(r: &ConfigRef) -> Result<Config, ServiceError> {
        Ok(match r {
            ConfigRef::Default => Config::default(),
            ConfigRef::Path(p) => Config::load(p)?,
            ConfigRef::Toml(s) => Config::from_toml(s)?,
        })
    }

    pub fn open_ref(&self, r: &ConfigRef, opts: OpenOptions) -> Result<SessionId, ServiceError> {
        self.open(Self::resolve(r)?, opts)
    }

    pub fn open(&self, config: Config, opts: OpenOptions) -> Result<SessionId, ServiceError> {
        let engine = Engine::new(config.clone())?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let (tx, rx) = unbounded();
        let period = Duration::from_secs_f64(config.tick_length);
        let worker = Worker {
            id: id.clone(),
            engine,
            cfg: config.clone(),
            rx,
            subscribers: Vec::new(),
            trace: Vec::new(),
            pace: opts.pace,
            paused: opts.paused,
            period,
            next_due: Instant::now() + period,
            idle_timeout: self.cfg.idle_timeout,
            last_activity: Instant::now(),
            trace_dir: self.cfg.trace_dir.clone(),
        };
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || worker.run())
            .expect("spawn session thread");
        debug!("opened session {id} ({})", config.name);
        self.sessions
            .lock()
            .expect("registry lock")
            .insert(id.clone(), Handle { tx, config });
        Ok(id)
    }

    fn sender(&self, id: &str) -> Result<Sender<Cmd>, ServiceError> {
        self.sessions
            .lock()
            .expect("registry lock")
            .get(id)
            .map(|h| h.tx.clone())
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn request<T>(&self, id: &str, make: impl FnOnce(Sender<T>) -> Cmd) -> Result<T, ServiceError> {
        let tx = self.sender(id)?;
        let (reply, rx) = bounded(1);
        tx.send(make(reply)).map_err(|_| ServiceError::Closed(id.to_string()))?;
        rx.recv().map_err(|_| ServiceError::Closed(id.to_string()))
    }

    /// Queues `input` for the next tick boundary; returns the tick that
    /// first sees it.
    pub fn submit(&self, id: &str, input: HumanInput) -> Result<u64, ServiceError> {
        self.request(id, |r| Cmd::Input(input, r))
    }

    pub fn snapshot(&self, id: &str) -> Result<EngineSnapshot, ServiceError> {
        self.request(id, Cmd::Snapshot).map(|b| *b)
    }

    /// Log records from `from_seq` on, then every later one as it happens.
    pub fn subscribe(&self, id: &str, from_seq: u64) -> Result<Receiver<StreamItem>, ServiceError> {
        let (tx, rx) = unbounded();
        self.request(id, |done| Cmd::Subscribe(from_seq, tx, done))?;
        Ok(rx)
    }

    /// Applies `control`; returns the tick count afterwards.
    pub fn control(&self, id: &str, control: Control) -> Result<u64, ServiceError> {
        self.request(id, |r| Cmd::Control(control, r))
    }

    pub fn close(&self, id: &str) -> Result<Closed, ServiceError> {
        self.request(id, Cmd::Close)
    }

    /// The config a session was opened with.
    pub fn session_config(&self, id: &str) -> Result<Config, ServiceError> {
        self.sessions
            .lock()
            .expect("registry lock")
            .get(id)
            .map(|h| h.config.clone())
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn sessions(&self) -> Vec<SessionId> {
        let mut v: Vec<SessionId> = self.sessions.lock().expect("registry lock").keys().cloned().collect();
        v.sort();
        v
    }
}

impl Default for Service {
    fn default() -> Self {
        Self::new(ServiceConfig::default())
    }
}
