use std::net::TcpStream;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use eit_tactile::replay::replay_file;
use eit_tactile::server::{session_log_path, Server};
use eit_tactile::session::{
    ClientKind, ClientMessage, FrameMessage, ServerMessage, Session, TouchpadModel,
};
use eit_tactile::ExperimentConfig;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

fn model() -> Arc<TouchpadModel> {
    static MODEL: OnceLock<Arc<TouchpadModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(TouchpadModel::new(&ExperimentConfig::default()).unwrap()))
        .clone()
}

fn start(log_dir: Option<&Path>) -> String {
    let server = Server::bind("127.0.0.1:0", model(), log_dir.map(Path::to_path_buf)).unwrap();
    let addr = server.local_addr().unwrap();
    thread::spawn(move || server.run());
    format!("ws://{addr}")
}

struct Client(WebSocket<MaybeTlsStream<TcpStream>>);

impl Client {
    fn connect(url: &str) -> Self {
        Self(tungstenite::connect(url).unwrap().0)
    }

    fn raw(&mut self, text: &str) -> ServerMessage {
        self.0.send(Message::text(text)).unwrap();
        loop {
            if let Message::Text(t) = self.0.read().unwrap() {
                return serde_json::from_str(t.as_str()).unwrap();
            }
        }
    }

    fn send(&mut self, msg: ClientMessage) -> FrameMessage {
        match self.raw(&serde_json::to_string(&msg).unwrap()) {
            ServerMessage::Frame(f) => f,
            ServerMessage::Error { message } => panic!("unexpected error reply: {message}"),
        }
    }

    /// Down, `frames - 1` ticks, up; returns every reply.
    fn press(&mut self, x: f64, y: f64, frames: usize) -> Vec<FrameMessage> {
        let mut out = vec![self.send(ClientMessage::touch(ClientKind::TouchDown, x, y))];
        for _ in 1..frames {
            out.push(self.send(ClientMessage::bare(ClientKind::Tick)));
        }
        out.push(self.send(ClientMessage::bare(ClientKind::TouchUp)));
        out
    }
}

#[test]
fn short_left_press_advances_low() {
    let mut c = Client::connect(&start(None));
    let mut slowest = Duration::ZERO;
    let mut replies = Vec::new();
    for msg in [
        ClientMessage::touch(ClientKind::TouchDown, 25.0, 50.0),
        ClientMessage::bare(ClientKind::Tick),
        ClientMessage::bare(ClientKind::Tick),
        ClientMessage::bare(ClientKind::TouchUp),
    ] {
        let t = Instant::now();
        replies.push(c.send(msg));
        slowest = slowest.max(t.elapsed());
    }
    assert!(replies[..3].iter().all(|f| f.active));
    assert!(replies[..3].iter().all(|f| f.action.is_none()));
    let last = replies.last().unwrap();
    assert!(!last.active);
    assert_eq!(last.action.as_deref(), Some("advance"));
    assert_eq!(serde_json::to_value(last.amplitude).unwrap(), "low");
    let [x, y] = replies[0].centroid.unwrap();
    assert!(
        (x - 25.0).abs() < 10.0 && (y - 50.0).abs() < 10.0,
        "centroid ({x}, {y})"
    );
    for f in &replies {
        assert_eq!(f.grid.len(), 64);
        assert!(f.grid.iter().all(|row| row.len() == 64));
    }
    assert!(replies[1].grid.iter().flatten().any(|&v| v == 1.0));
    assert!(
        slowest < Duration::from_millis(200),
        "slowest message took {slowest:?}"
    );
}

#[test]
fn press_duration_sets_the_jump_amplitude() {
    let mut c = Client::connect(&start(None));
    let short = c.press(75.0, 50.0, 3);
    let long = c.press(75.0, 50.0, 10);
    let end = |r: &[FrameMessage]| {
        let f = r.last().unwrap();
        (f.action.clone(), serde_json::to_value(f.amplitude).unwrap())
    };
    assert_eq!(end(&short), (Some("jump".into()), "low".into()));
    assert_eq!(end(&long), (Some("jump".into()), "high".into()));
    let frames: Vec<u64> = short.iter().chain(&long).map(|f| f.frame_index).collect();
    assert_eq!(frames, (0..15).collect::<Vec<u64>>());
}

#[test]
fn malformed_messages_get_error_replies_and_the_session_survives() {
    let mut c = Client::connect(&start(None));
    for bad in [
        "{not json",
        r#"{"type":"touch_down"}"#,
        r#"{"type":"touch_move","x":1,"y":1}"#,
        r#"{"type":"touch_down","x":500,"y":1}"#,
    ] {
        assert!(matches!(c.raw(bad), ServerMessage::Error { .. }), "{bad}");
    }
    let f = c.send(ClientMessage::bare(ClientKind::Tick));
    assert_eq!(f.frame_index, 0);
    assert!(!f.active);
}

#[test]
fn idle_stream_stays_inactive() {
    let mut c = Client::connect(&start(None));
    for i in 0..5 {
        let f = c.send(ClientMessage::bare(ClientKind::Tick));
        assert_eq!(f.frame_index, i);
        assert!(!f.active && f.centroid.is_none() && f.action.is_none() && f.event.is_none());
        assert_eq!(f.intensity, 0.0);
        assert!(f.grid.iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn session_log_replays_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let url = start(Some(dir.path()));
    {
        let mut c = Client::connect(&url);
        c.press(25.0, 50.0, 4);
        c.send(ClientMessage::bare(ClientKind::Tick));
        c.press(75.0, 40.0, 7);
        c.0.close(None).unwrap();
        while c.0.read().is_ok() {}
    }
    let path = session_log_path(dir.path(), 0);
    let deadline = Instant::now() + Duration::from_secs(5);
    let report = loop {
        let r = replay_file(&path, &ExperimentConfig::default().hmi);
        match r {
            Ok(r) if r.frames == 14 => break r,
            _ if Instant::now() < deadline => thread::sleep(Duration::from_millis(20)),
            other => panic!("log not complete: {other:?}"),
        }
    };
    assert!(report.is_consistent(), "{:?}", report.mismatches);
    let actions: Vec<(String, String)> = report
        .actions
        .iter()
        .map(|a| {
            (
                a.name.clone(),
                serde_json::to_value(a.amplitude)
                    .unwrap()
                    .as_str()
                    .unwrap()
                    .to_owned(),
            )
        })
        .collect();
    assert_eq!(
        actions,
        [
            ("advance".into(), "low".into()),
            ("jump".into(), "high".into())
        ]
    );
}

#[test]
fn concurrent_sessions_are_independent() {
    let model = model();
    let mut a = Session::new(Arc::clone(&model));
    let mut b = Session::new(model);
    a.handle(&ClientMessage::touch(ClientKind::TouchDown, 25.0, 50.0))
        .unwrap();
    b.handle(&ClientMessage::bare(ClientKind::Tick)).unwrap();
    let (fa, _) = a.handle(&ClientMessage::bare(ClientKind::Tick)).unwrap();
    let (fb, _) = b.handle(&ClientMessage::bare(ClientKind::Tick)).unwrap();
    assert!(fa.active && a.is_pressed());
    assert!(!fb.active && !b.is_pressed());
}
