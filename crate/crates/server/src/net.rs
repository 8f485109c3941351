//! WebSocket transport. One thread per connection pumps frames in both
//! directions; a single session thread owns the [`Session`] and ticks it on
//! an absolute schedule, so all game mutation is serialized there.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tungstenite::{Error as WsError, Message};

use crate::session::{ConnId, Outgoing, Session, SessionSummary, Target};
use crate::{ServerConfig, ServerError};

const POLL: Duration = Duration::from_millis(5);

enum Event {
    Connect(ConnId, Sender<String>),
    Text(ConnId, String),
    Disconnect(ConnId),
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: JoinHandle<()>,
    session: JoinHandle<Result<SessionSummary, ServerError>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn is_finished(&self) -> bool {
        self.session.is_finished()
    }

    /// Stops accepting, closes every recorder and returns the summary.
    pub fn shutdown(self) -> Result<SessionSummary, ServerError> {
        self.stop.store(true, Ordering::SeqCst);
        self.wait()
    }

    /// Blocks until the session ends (on shutdown or an internal fault).
    pub fn wait(self) -> Result<SessionSummary, ServerError> {
        let r = self.session.join().map_err(|_| ServerError::Panicked)?;
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        r
    }

    /// Flag that ends the server when set, e.g. from a signal handler.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }
}

/// Binds the listener and starts the session. Port conflicts and bad bot
/// checkpoints are reported here, before any thread is spawned.
pub fn start_server(cfg: ServerConfig) -> Result<ServerHandle, ServerError> {
    let addr = format!("{}:{}", cfg.bind, cfg.port);
    let listener = TcpListener::bind(&addr).map_err(|source| ServerError::Bind {
        addr: addr.clone(),
        source,
    })?;
    let local = listener
        .local_addr()
        .map_err(|source| ServerError::Bind { addr, source })?;
    listener
        .set_nonblocking(true)
        .map_err(|source| ServerError::Bind {
            addr: local.to_string(),
            source,
        })?;
    let session = Session::new(cfg)?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();

    let s = stop.clone();
    let session = std::thread::Builder::new()
        .name("ctf-session".into())
        .spawn(move || run_session(session, rx, s))
        .map_err(|source| ServerError::Io {
            path: "session thread".into(),
            source,
        })?;
    let s = stop.clone();
    let acceptor = std::thread::Builder::new()
        .name("ctf-accept".into())
        .spawn(move || accept_loop(listener, tx, s))
        .map_err(|source| ServerError::Io {
            path: "accept thread".into(),
            source,
        })?;
    log::info!("listening on ws://{local}");
    Ok(ServerHandle {
        addr: local,
        stop,
        acceptor,
        session,
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    let next_id = AtomicU64::new(1);
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id.fetch_add(1, Ordering::Relaxed);
                let tx = tx.clone();
                let stop = stop.clone();
                let spawned = std::thread::Builder::new()
                    .name(format!("ctf-conn-{id}"))
                    .spawn(move || {
                        if let Err(e) = serve_connection(id, stream, tx, stop) {
                            log::debug!("connection {id} from {peer}: {e}");
                        }
                    });
                if let Err(e) = spawned {
                    log::error!("cannot spawn connection thread: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(10))
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

fn serve_connection(
    id: ConnId,
    stream: TcpStream,
    tx: Sender<Event>,
    stop: Arc<AtomicBool>,
) -> Result<(), WsError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => WsError::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(POLL))?;
    let (out_tx, out_rx) = mpsc::channel::<String>();
    if tx.send(Event::Connect(id, out_tx)).is_err() {
        return Ok(());
    }
    let result = pump(id, &mut ws, &tx, &out_rx, &stop);
    let _ = tx.send(Event::Disconnect(id));
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

fn pump(
    id: ConnId,
    ws: &mut tungstenite::WebSocket<TcpStream>,
    tx: &Sender<Event>,
    out_rx: &Receiver<String>,
    stop: &AtomicBool,
) -> Result<(), WsError> {
    loop {
        if stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(t)) => {
                if tx.send(Event::Text(id, t.to_string())).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(WsError::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
        loop {
            match out_rx.try_recv() {
                Ok(text) => ws.send(Message::text(text))?,
                Err(mpsc::TryRecvError::Empty) => break,
                // the session dropped this connection
                Err(mpsc::TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
}

fn run_session(
    mut session: Session,
    rx: Receiver<Event>,
    stop: Arc<AtomicBool>,
) -> Result<SessionSummary, ServerError> {
    let period = Duration::from_secs_f64(session.config().arena.tick_dt);
    let mut conns: HashMap<ConnId, Sender<String>> = HashMap::new();
    let t0 = Instant::now();
    let mut k: u32 = 1;
    let result = (|| -> Result<(), ServerError> {
        while !stop.load(Ordering::SeqCst) {
            let deadline = t0 + period * k;
            loop {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                match rx.recv_timeout(deadline - now) {
                    Ok(Event::Connect(id, out)) => {
                        conns.insert(id, out);
                        session.connect(id);
                    }
                    Ok(Event::Text(id, text)) => {
                        let out = session.handle_text(id, &text)?;
                        dispatch(&mut conns, out);
                    }
                    Ok(Event::Disconnect(id)) => {
                        conns.remove(&id);
                        session.disconnect(id)?;
                    }
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => return Ok(()),
                }
            }
            let out = session.tick()?;
            dispatch(&mut conns, out);
            k += 1;
        }
        Ok(())
    })();
    if let Err(e) = &result {
        log::error!("session failed: {e}");
        let frame = crate::WireMessage::error("internal", e.to_string()).to_json();
        for c in conns.values() {
            let _ = c.send(frame.clone());
        }
    }
    let summary = session.finish();
    result.and(summary)
}

fn dispatch(conns: &mut HashMap<ConnId, Sender<String>>, out: Vec<Outgoing>) {
    for o in out {
        let text = o.msg.to_json();
        match o.to {
            Target::Conn(id) => {
                if let Some(c) = conns.get(&id) {
                    let _ = c.send(text);
                }
            }
            Target::All => conns.retain(|_, c| c.send(text.clone()).is_ok()),
        }
    }
}
