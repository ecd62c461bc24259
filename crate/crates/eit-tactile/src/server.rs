//! WebSocket touchpad service. One thread and one [`Session`] per connection;
//! each accepted message gets exactly one JSON reply.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use tungstenite::{Message, WebSocket};

use crate::session::{ServerMessage, Session, TouchpadModel};
use crate::{Error, Result};

pub struct Server {
    listener: TcpListener,
    model: Arc<TouchpadModel>,
    log_dir: Option<PathBuf>,
    next_session: Arc<AtomicU64>,
}

impl Server {
    /// Binds without accepting. `log_dir`, when set, receives one
    /// `session-<n>.jsonl` event log per connection.
    pub fn bind(
        addr: impl ToSocketAddrs,
        model: Arc<TouchpadModel>,
        log_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(Self {
            listener,
            model,
            log_dir,
            next_session: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails.
    pub fn run(&self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let id = self.next_session.fetch_add(1, Ordering::Relaxed);
            let model = Arc::clone(&self.model);
            let log_path = self.log_dir.as_deref().map(|d| session_log_path(d, id));
            thread::spawn(move || {
                if let Err(e) = handle_connection(stream, model, log_path.as_deref()) {
                    log::warn!("session {id}: {e}");
                }
            });
        }
        Ok(())
    }
}

fn handle_connection(
    stream: TcpStream,
    model: Arc<TouchpadModel>,
    log_path: Option<&Path>,
) -> Result<()> {
    let peer = stream.peer_addr().ok();
    let ws = tungstenite::accept(stream).map_err(|e| Error::WebSocket(e.to_string()))?;
    let log: Option<Box<dyn Write>> = match log_path {
        Some(p) => Some(Box::new(crate::formats::create(p)?)),
        None => None,
    };
    log::info!("session opened for {peer:?}, log {log_path:?}");
    let frames = serve_socket(ws, Session::new(model), log)?;
    log::info!("session for {peer:?} closed after {frames} frames");
    Ok(())
}

/// Message loop over an accepted socket. Returns the number of frames
/// processed once the peer closes.
pub fn serve_socket<S: Read + Write>(
    mut ws: WebSocket<S>,
    mut session: Session,
    mut log: Option<Box<dyn Write>>,
) -> Result<u64> {
    loop {
        let text = match ws.read() {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(Message::Close(_))
            | Err(tungstenite::Error::ConnectionClosed)
            | Err(tungstenite::Error::AlreadyClosed) => break,
            Ok(_) => continue,
            Err(tungstenite::Error::Protocol(e)) => {
                log::debug!("protocol error, dropping connection: {e}");
                break;
            }
            Err(e) => return Err(Error::WebSocket(e.to_string())),
        };
        let (reply, record) = session.handle_text(&text);
        if let (Some(w), Some(r)) = (log.as_mut(), record.as_ref()) {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        if let ServerMessage::Error { message } = &reply {
            log::debug!("rejected message: {message}");
        }
        let json = serde_json::to_string(&reply)?;
        match ws.send(Message::text(json)) {
            Ok(()) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(Error::WebSocket(e.to_string())),
        }
    }
    Ok(session.frames_processed())
}

/// Log file of the `id`-th connection under `dir`.
pub fn session_log_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("session-{id}.jsonl"))
}
