use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use iscreen::calibrate::DEFAULT_DWELL_WINDOW;
use iscreen::detect::DetectorConfig;
use iscreen::events::{KeyboardLayout, Lexicon, LexiconEntry, SessionConfig};
use iscreen::io::serve::{ServeConfig, ServeSource, Server, ServerHandle};
use iscreen::io::{calibrate_dataset, generate, FramePipeline, GazeModel, GenerateConfig, IoError, PlanSegment};
use iscreen::screen::ScreenSize;

const SCREEN: ScreenSize = ScreenSize::new(1080, 1920);
const DT: f64 = 1000.0 / 30.0;

struct Client {
    r: BufReader<TcpStream>,
    w: TcpStream,
}

impl Client {
    fn connect(h: &ServerHandle) -> Self {
        let s = TcpStream::connect(h.addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        Self {
            w: s.try_clone().unwrap(),
            r: BufReader::new(s),
        }
    }

    fn recv(&mut self) -> Option<Value> {
        let mut line = String::new();
        match self.r.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(&line).unwrap()),
        }
    }

    fn send(&mut self, v: &Value) {
        writeln!(self.w, "{v}").unwrap();
    }

    fn send_raw(&mut self, s: &str) {
        self.w.write_all(s.as_bytes()).unwrap();
    }
}

fn live_server() -> ServerHandle {
    live_server_with(Lexicon::english_1000())
}

fn live_server_with(lexicon: Lexicon) -> ServerHandle {
    let cfg = ServeConfig {
        screen: SCREEN,
        layout: None,
        lexicon,
        session: SessionConfig::default(),
        source: ServeSource::Live { fps: 30.0 },
    };
    Server::bind("127.0.0.1:0", cfg).unwrap().spawn().unwrap()
}

/// Scripted stand-in for the UI's mouse fallback.
struct Pointer {
    t: f64,
    events: Vec<Value>,
    gaze: usize,
}

impl Pointer {
    fn new() -> Self {
        Self {
            t: 0.0,
            events: Vec::new(),
            gaze: 0,
        }
    }

    /// Sends one sample and collects everything it triggers, reading until
    /// the echoed gaze message.
    fn sample(&mut self, c: &mut Client, x: f64, y: f64) {
        c.send(&json!({"type": "mouse_gaze", "t": self.t, "x": x, "y": y}));
        self.t += DT;
        loop {
            let m = c.recv().unwrap_or_else(|| panic!("server replies at t={} after {:?}", self.t, self.events));
            match m["type"].as_str().unwrap() {
                "gaze" => {
                    self.gaze += 1;
                    break;
                }
                "event" => self.events.push(m),
                other => panic!("unexpected {other}"),
            }
        }
    }

    fn hold(&mut self, c: &mut Client, x: f64, y: f64, frames: usize) {
        for _ in 0..frames {
            self.sample(c, x, y);
        }
    }

    fn glide(&mut self, c: &mut Client, from: (f64, f64), to: (f64, f64), frames: usize) {
        for k in 1..=frames {
            let f = k as f64 / frames as f64;
            self.sample(c, from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f);
        }
    }

    /// Hotkey held for `ms`; events it causes arrive before the next gaze echo.
    fn blink(&mut self, c: &mut Client, ms: f64) {
        c.send(&json!({"type": "blink", "t": self.t, "dur": ms}));
        self.t += ms;
    }

    fn kinds(&self) -> Vec<&str> {
        self.events.iter().map(|e| e["kind"].as_str().unwrap()).collect()
    }
}

fn handshake(c: &mut Client) {
    let hello = c.recv().unwrap();
    assert_eq!(hello, json!({"type": "hello", "w": 1080, "h": 1920, "fps": 30.0}));
    let snap = c.recv().unwrap();
    assert_eq!(snap["type"], "snapshot");
    assert_eq!(snap["state"]["mode"], "idle");
}

#[test]
fn live_feed_taps_scrolls_and_types() {
    // The bundled list has no "hi"; add it the way a custom lexicon would.
    let mut words = Lexicon::english_1000().entries().to_vec();
    words.push(LexiconEntry {
        word: "hi".into(),
        weight: 500.0,
    });
    let server = live_server_with(Lexicon::new(words).unwrap());
    let mut c = Client::connect(&server);
    handshake(&mut c);
    let layout = KeyboardLayout::qwerty(SCREEN);
    let mut msg = serde_json::to_value(&layout).unwrap();
    msg["type"] = json!("layout");
    c.send(&msg);

    let mut p = Pointer::new();
    // Tap an icon.
    p.hold(&mut c, 300.0, 400.0, 10);
    p.blink(&mut c, 350.0);
    p.hold(&mut c, 300.0, 400.0, 3);
    // Sweep up, then down.
    p.hold(&mut c, 540.0, 1100.0, 5);
    p.glide(&mut c, (540.0, 1100.0), (540.0, 100.0), 12);
    p.hold(&mut c, 540.0, 100.0, 5);
    p.glide(&mut c, (540.0, 100.0), (540.0, 1100.0), 12);
    p.hold(&mut c, 540.0, 1100.0, 5);
    // Type "hi": anchor on h, glide to i, blink on the first suggestion.
    let h = layout.letter_center('h').unwrap();
    let i = layout.letter_center('i').unwrap();
    let bar = layout.suggestion_bar();
    let slot0 = (bar.x + bar.w / 6.0, bar.center().y);
    p.hold(&mut c, h.x, h.y, 10);
    p.blink(&mut c, 350.0);
    p.hold(&mut c, h.x, h.y, 3);
    p.glide(&mut c, (h.x, h.y), (i.x, i.y), 6);
    p.hold(&mut c, i.x, i.y, 6);
    p.glide(&mut c, (i.x, i.y), slot0, 4);
    p.hold(&mut c, slot0.0, slot0.1, 8);
    p.blink(&mut c, 350.0);
    p.hold(&mut c, slot0.0, slot0.1, 2);

    assert_eq!(
        p.kinds(),
        ["tap", "scroll_up", "scroll_down", "key_anchor", "word_commit"],
        "{:?}",
        p.events
    );
    assert_eq!((p.events[0]["x"].as_f64(), p.events[0]["y"].as_f64()), (Some(300.0), Some(400.0)));
    assert_eq!(p.events[3]["key"], "h");
    assert_eq!(p.events[4]["word"], "hi");
    server.shutdown().unwrap();
}

#[test]
fn out_of_order_samples_are_dropped() {
    let server = live_server();
    let mut c = Client::connect(&server);
    handshake(&mut c);
    c.send(&json!({"type": "mouse_gaze", "t": 100.0, "x": 10.0, "y": 20.0}));
    c.send(&json!({"type": "mouse_gaze", "t": 50.0, "x": 11.0, "y": 21.0}));
    c.send(&json!({"type": "mouse_gaze", "t": 150.0, "x": 5000.0, "y": 22.0}));
    let a = c.recv().unwrap();
    let b = c.recv().unwrap();
    assert_eq!(a, json!({"type": "gaze", "t": 100.0, "x": 10.0, "y": 20.0, "valid": true}));
    // Clamped to the screen.
    assert_eq!(b, json!({"type": "gaze", "t": 150.0, "x": 1079.0, "y": 22.0, "valid": true}));
    server.shutdown().unwrap();
}

#[test]
fn malformed_message_gets_error_and_server_survives() {
    let server = live_server();
    let mut c = Client::connect(&server);
    handshake(&mut c);
    c.send_raw("{\"type\":\"mouse_gaze\",\"t\":\n");
    let err = c.recv().unwrap();
    assert_eq!(err["type"], "error");
    assert!(c.recv().is_none(), "connection closes after the error");

    let mut c = Client::connect(&server);
    handshake(&mut c);
    c.send(&json!({"type": "teleport"}));
    assert_eq!(c.recv().unwrap()["type"], "error");
    assert!(c.recv().is_none());

    let mut c = Client::connect(&server);
    handshake(&mut c);
    server.shutdown().unwrap();
}

#[test]
fn bind_failure_is_reported() {
    let first = Server::bind(
        "127.0.0.1:0",
        ServeConfig {
            screen: SCREEN,
            layout: None,
            lexicon: Lexicon::english_1000(),
            session: SessionConfig::default(),
            source: ServeSource::Live { fps: 30.0 },
        },
    )
    .unwrap();
    let addr = first.local_addr().unwrap().to_string();
    let second = Server::bind(
        &addr,
        ServeConfig {
            screen: SCREEN,
            layout: None,
            lexicon: Lexicon::english_1000(),
            session: SessionConfig::default(),
            source: ServeSource::Live { fps: 30.0 },
        },
    );
    let err = second.err().unwrap();
    assert!(matches!(err, IoError::Bind(_)));
    assert_eq!(err.exit_code(), 6);
}

fn replay_server(dir: &std::path::Path, frames: usize, pacing: bool) -> ServerHandle {
    let cal = generate(&GenerateConfig::calibration_preset(1), dir.join("cal")).unwrap();
    let (model, _) = calibrate_dataset(&cal, &DetectorConfig::default(), DEFAULT_DWELL_WINDOW).unwrap();
    let mut cfg = GenerateConfig::calibration_preset(2);
    cfg.segments = vec![PlanSegment::Fixate {
        x: 300.0,
        y: 700.0,
        frames,
    }];
    let ds = generate(&cfg, dir.join("play")).unwrap();
    let source = ServeSource::Replay {
        dataset: ds,
        pipeline: FramePipeline::new(GazeModel::Closed(model), DetectorConfig::default(), &[]).unwrap(),
        pacing,
    };
    let cfg = ServeConfig {
        screen: SCREEN,
        layout: Some(KeyboardLayout::qwerty(SCREEN)),
        lexicon: Lexicon::english_1000(),
        session: SessionConfig::default(),
        source,
    };
    Server::bind("127.0.0.1:0", cfg).unwrap().spawn().unwrap()
}

#[test]
fn replay_is_paced_and_late_clients_get_a_snapshot_first() {
    let dir = tempfile::tempdir().unwrap();
    let server = replay_server(dir.path(), 60, true);
    let mut c = Client::connect(&server);
    handshake(&mut c);
    let mut arrivals = Vec::new();
    let mut late = None;
    while let Some(m) = c.recv() {
        assert_eq!(m["type"], "gaze");
        arrivals.push(Instant::now());
        if arrivals.len() == 20 {
            late = Some(Client::connect(&server));
        }
        if arrivals.len() == 60 {
            break;
        }
    }
    assert_eq!(arrivals.len(), 60);
    let mut iv: Vec<f64> = arrivals.windows(2).map(|w| (w[1] - w[0]).as_secs_f64() * 1000.0).collect();
    let mean = iv.iter().sum::<f64>() / iv.len() as f64;
    iv.sort_by(f64::total_cmp);
    let median = iv[iv.len() / 2];
    assert!((mean - DT).abs() <= 0.1 * DT, "mean interval {mean:.2} ms");
    assert!((median - DT).abs() <= 0.1 * DT, "median interval {median:.2} ms");

    let mut late = late.unwrap();
    assert_eq!(late.recv().unwrap()["type"], "hello");
    let snap = late.recv().unwrap();
    assert_eq!(snap["type"], "snapshot");
    assert!(snap["state"]["t"].as_f64().unwrap() > 0.0, "{snap}");
    let next = late.recv().unwrap();
    assert_eq!(next["type"], "gaze");
    assert!(next["t"].as_f64().unwrap() > snap["state"]["t"].as_f64().unwrap());
    server.shutdown().unwrap();
}

#[test]
fn replay_without_pacing_streams_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let server = replay_server(dir.path(), 90, false);
    let mut c = Client::connect(&server);
    handshake(&mut c);
    let started = Instant::now();
    let mut n = 0;
    while n < 90 {
        if c.recv().unwrap()["type"] == "gaze" {
            n += 1;
        }
    }
    // 90 frames at 30 fps would take 3 s paced.
    assert!(started.elapsed() < Duration::from_secs(2));
    server.shutdown().unwrap();
}
