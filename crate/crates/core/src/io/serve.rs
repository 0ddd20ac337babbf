//! Live event feed over TCP, one JSON message per line.
//!
//! Server to client: `hello`, then `snapshot`, then `gaze` and `event`
//! messages; `error` just before the server drops a misbehaving client.
//! Client to server: `layout`, `mouse_gaze`, `blink`.
//!
//! With a dataset source one shared session replays the recording, paced at
//! the container rate, and every client sees the same stream; the replay
//! starts when the first client connects. With the live source each client
//! drives its own session from `mouse_gaze` and `blink` messages.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::replay::FramePipeline;
use super::IoError;
use crate::events::{
    GazeSample, KeyboardLayout, Lexicon, Session, SessionConfig, SessionSnapshot, UIEvent,
};
use crate::screen::{ScreenPoint, ScreenSize};

const POLL: Duration = Duration::from_millis(20);
const MAX_LINE: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { w: u32, h: u32, fps: f64 },
    Snapshot { state: SessionSnapshot },
    Gaze { t: f64, x: f64, y: f64, valid: bool },
    Event(UIEvent),
    Error { message: String },
}

impl ServerMessage {
    pub fn gaze(s: &GazeSample) -> Self {
        ServerMessage::Gaze {
            t: s.t,
            x: s.point.x,
            y: s.point.y,
            valid: s.valid,
        }
    }

    fn line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("message serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Layout(KeyboardLayout),
    MouseGaze { t: f64, x: f64, y: f64 },
    Blink { t: f64, dur: f64 },
}

pub enum ServeSource {
    /// Replays a dataset through the full pipeline.
    Replay {
        dataset: Dataset,
        pipeline: FramePipeline,
        pacing: bool,
    },
    /// Each client feeds its own session.
    Live { fps: f64 },
}

pub struct ServeConfig {
    pub screen: ScreenSize,
    pub layout: Option<KeyboardLayout>,
    pub lexicon: Lexicon,
    pub session: SessionConfig,
    pub source: ServeSource,
}

enum Out {
    Line(String),
    Close,
}

struct Hub {
    clients: Vec<Sender<Out>>,
    snapshot: SessionSnapshot,
    layout: Option<Option<KeyboardLayout>>,
    started: bool,
}

struct Shared {
    cfg: ServeConfig,
    shutdown: Arc<AtomicBool>,
    hub: Mutex<Hub>,
}

impl Shared {
    fn fps(&self) -> f64 {
        match &self.cfg.source {
            ServeSource::Replay { dataset, .. } => {
                f64::from(dataset.manifest.fps_num) / f64::from(dataset.manifest.fps_den.max(1))
            }
            ServeSource::Live { fps } => *fps,
        }
    }

    fn new_session(&self) -> Session {
        Session::new(
            self.cfg.session,
            self.cfg.screen,
            self.cfg.layout.clone(),
            self.cfg.lexicon.clone(),
        )
        .expect("config validated at bind")
    }

    fn hello(&self) -> ServerMessage {
        ServerMessage::Hello {
            w: self.cfg.screen.w,
            h: self.cfg.screen.h,
            fps: self.fps(),
        }
    }
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// Running server; dropping it without [`ServerHandle::shutdown`] leaves the
/// threads running.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    join: Option<JoinHandle<Result<(), IoError>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) -> Result<(), IoError> {
        self.shutdown.store(true, Ordering::SeqCst);
        match self.join.take() {
            Some(j) => j.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Server {
    /// Binds `addr` (port 0 picks a free port). Fails with [`IoError::Bind`].
    pub fn bind(addr: &str, cfg: ServeConfig) -> Result<Self, IoError> {
        cfg.session.validate().map_err(|e| IoError::Config(e.to_string()))?;
        if let ServeSource::Replay { dataset, pipeline, .. } = &cfg.source {
            if dataset.manifest.screen != cfg.screen || pipeline.model.screen() != cfg.screen {
                return Err(IoError::Mismatch("model, dataset and screen disagree".into()));
            }
        }
        if let ServeSource::Live { fps } = cfg.source {
            if !(fps > 0.0 && fps.is_finite()) {
                return Err(IoError::Config(format!("fps must be positive, got {fps}")));
            }
        }
        let listener = TcpListener::bind(addr).map_err(|e| IoError::Bind(format!("{addr}: {e}")))?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let snapshot = Session::new(cfg.session, cfg.screen, cfg.layout.clone(), cfg.lexicon.clone())
            .map_err(|e| IoError::Config(e.to_string()))?
            .snapshot();
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                cfg,
                shutdown,
                hub: Mutex::new(Hub {
                    clients: Vec::new(),
                    snapshot,
                    layout: None,
                    started: false,
                }),
            }),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, IoError> {
        Ok(self.listener.local_addr()?)
    }

    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        self.shared.shutdown.clone()
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<ServerHandle, IoError> {
        let addr = self.local_addr()?;
        let shutdown = self.shutdown_flag();
        let join = thread::spawn(move || self.run());
        Ok(ServerHandle {
            addr,
            shutdown,
            join: Some(join),
        })
    }

    /// Accepts clients until the shutdown flag is set.
    pub fn run(self) -> Result<(), IoError> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !self.shared.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let shared = self.shared.clone();
                    if let Some(j) = start_client(shared, stream, &mut workers) {
                        workers.push(j);
                    }
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => return Err(IoError::Io(e)),
            }
            workers.retain(|w| !w.is_finished());
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }
}

/// Starts writer and reader threads for a client; may also start the replay
/// thread, which is pushed onto `workers`.
fn start_client(shared: Arc<Shared>, stream: TcpStream, workers: &mut Vec<JoinHandle<()>>) -> Option<JoinHandle<()>> {
    stream.set_nonblocking(false).ok()?;
    stream.set_nodelay(true).ok()?;
    stream.set_read_timeout(Some(POLL)).ok()?;
    let write_half = stream.try_clone().ok()?;
    let (tx, rx) = mpsc::channel::<Out>();

    let shutdown = shared.shutdown.clone();
    workers.push(thread::spawn(move || writer(write_half, rx, shutdown)));

    let hello = shared.hello().line();
    match &shared.cfg.source {
        ServeSource::Replay { .. } => {
            let mut hub = shared.hub.lock().unwrap();
            let snap = ServerMessage::Snapshot {
                state: hub.snapshot.clone(),
            };
            let _ = tx.send(Out::Line(hello));
            let _ = tx.send(Out::Line(snap.line()));
            hub.clients.push(tx.clone());
            if !hub.started {
                hub.started = true;
                let s = shared.clone();
                workers.push(thread::spawn(move || replay_feed(s)));
            }
        }
        ServeSource::Live { .. } => {
            let _ = tx.send(Out::Line(hello));
        }
    }
    Some(thread::spawn(move || reader(shared, stream, tx)))
}

fn writer(mut stream: TcpStream, rx: mpsc::Receiver<Out>, shutdown: Arc<AtomicBool>) {
    loop {
        match rx.recv_timeout(POLL) {
            Ok(Out::Line(l)) => {
                if stream.write_all(l.as_bytes()).is_err() {
                    break;
                }
            }
            Ok(Out::Close) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {
                if shutdown.load(Ordering::SeqCst) {
                    break;
                }
            }
        }
    }
    let _ = stream.flush();
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

fn reader(shared: Arc<Shared>, stream: TcpStream, tx: Sender<Out>) {
    let mut live = match shared.cfg.source {
        ServeSource::Live { .. } => {
            let s = shared.new_session();
            let snap = ServerMessage::Snapshot { state: s.snapshot() };
            let _ = tx.send(Out::Line(snap.line()));
            Some(s)
        }
        ServeSource::Replay { .. } => None,
    };
    let mut r = BufReader::new(stream);
    let mut buf = Vec::new();
    while !shared.shutdown.load(Ordering::SeqCst) {
        match r.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) if buf.ends_with(b"\n") => {
                let line = std::mem::take(&mut buf);
                let text = String::from_utf8_lossy(&line);
                if text.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ClientMessage>(text.trim()) {
                    Ok(msg) => handle(&shared, live.as_mut(), msg, &tx),
                    Err(e) => {
                        let err = ServerMessage::Error {
                            message: format!("malformed message: {e}"),
                        };
                        let _ = tx.send(Out::Line(err.line()));
                        break;
                    }
                }
            }
            // Partial line at end of stream.
            Ok(_) => break,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        if buf.len() > MAX_LINE {
            let err = ServerMessage::Error {
                message: "line too long".into(),
            };
            let _ = tx.send(Out::Line(err.line()));
            break;
        }
    }
    if let Some(s) = live.as_mut() {
        for e in s.finish() {
            let _ = tx.send(Out::Line(ServerMessage::Event(e).line()));
        }
    }
    let _ = tx.send(Out::Close);
}

fn handle(shared: &Shared, live: Option<&mut Session>, msg: ClientMessage, tx: &Sender<Out>) {
    let send_events = |events: Vec<UIEvent>| {
        for e in events {
            let _ = tx.send(Out::Line(ServerMessage::Event(e).line()));
        }
    };
    match (msg, live) {
        (ClientMessage::Layout(l), Some(s)) => s.set_layout(Some(l)),
        (ClientMessage::Layout(l), None) => shared.hub.lock().unwrap().layout = Some(Some(l)),
        (ClientMessage::MouseGaze { t, x, y }, Some(s)) => {
            let p = shared.cfg.screen.clamp(ScreenPoint::new(x, y));
            let sample = GazeSample::valid(t, p.x, p.y);
            // Samples that go back in time are dropped.
            if let Ok(ev) = s.step(sample) {
                let _ = tx.send(Out::Line(ServerMessage::gaze(&sample).line()));
                send_events(ev);
            }
        }
        (ClientMessage::Blink { t, dur }, Some(s)) => {
            if let Ok(ev) = s.blink(t, dur) {
                send_events(ev);
            }
        }
        // The replay stream is not steerable by gaze input.
        (ClientMessage::MouseGaze { .. } | ClientMessage::Blink { .. }, None) => {}
    }
}

fn broadcast(shared: &Shared, lines: &[String], snapshot: Option<SessionSnapshot>) {
    let mut hub = shared.hub.lock().unwrap();
    if let Some(s) = snapshot {
        hub.snapshot = s;
    }
    hub.clients.retain(|c| lines.iter().all(|l| c.send(Out::Line(l.clone())).is_ok()));
}

fn replay_feed(shared: Arc<Shared>) {
    let ServeSource::Replay {
        dataset,
        pipeline,
        pacing,
    } = &shared.cfg.source
    else {
        return;
    };
    let Ok(frames) = dataset.frames() else {
        return;
    };
    let header = *frames.header();
    let mut session = shared.new_session();
    let mut last = ScreenPoint::new(
        f64::from(shared.cfg.screen.w) / 2.0,
        f64::from(shared.cfg.screen.h) / 2.0,
    );
    let start = Instant::now();
    for (i, frame) in frames.enumerate() {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let Ok(frame) = frame else {
            break;
        };
        let t = header.frame_time_ms(i as u64);
        if *pacing {
            let due = start + Duration::from_secs_f64(t / 1000.0);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        if let Some(l) = shared.hub.lock().unwrap().layout.take() {
            session.set_layout(l);
        }
        let (_, p) = pipeline.process(&frame);
        let sample = match p {
            Some(p) => {
                last = p;
                GazeSample::valid(t, p.x, p.y)
            }
            None => GazeSample {
                t,
                point: last,
                valid: false,
            },
        };
        let mut lines = vec![ServerMessage::gaze(&sample).line()];
        if let Ok(ev) = session.step(sample) {
            lines.extend(ev.into_iter().map(|e| ServerMessage::Event(e).line()));
        }
        broadcast(&shared, &lines, Some(session.snapshot()));
    }
    let lines: Vec<String> = session
        .finish()
        .into_iter()
        .map(|e| ServerMessage::Event(e).line())
        .collect();
    broadcast(&shared, &lines, Some(session.snapshot()));
}
