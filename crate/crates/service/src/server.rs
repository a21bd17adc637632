//! Live operator service over WebSocket.
//!
//! A single decision-loop task owns the [`Session`]. Connection tasks never
//! touch it: they forward parsed client messages through a mailbox, wait for
//! the reply, and relay the broadcast stream of state and help messages.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::{JoinHandle, JoinSet};
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{parse_client, ClientMessage, ErrorCode, ServerMessage};
use crate::session::{DecisionRecord, Session, TimedMessage};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortInUse(SocketAddr),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// Everything the decision loop did, for replay and inspection.
#[derive(Debug, Clone, Default)]
pub struct ServiceLog {
    pub applied: Vec<TimedMessage>,
    pub decisions: Vec<DecisionRecord>,
}

struct Envelope {
    message: ClientMessage,
    reply: oneshot::Sender<Vec<ServerMessage>>,
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: watch::Sender<bool>,
    decision_loop: JoinHandle<Session>,
    acceptor: JoinHandle<()>,
    log: Arc<Mutex<ServiceLog>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn log(&self) -> ServiceLog {
        self.log.lock().expect("log lock").clone()
    }

    /// Stops the loop, drops every connection and hands back the session.
    pub async fn shutdown(self) -> Session {
        let _ = self.stop.send(true);
        self.acceptor.abort();
        let _ = self.acceptor.await;
        self.decision_loop.await.expect("decision loop panicked")
    }

    /// Resolves when the decision loop exits on its own, which only happens
    /// after [`shutdown`](Self::shutdown) or a panic.
    pub async fn wait(&mut self) {
        let _ = (&mut self.decision_loop).await;
    }
}

/// Binds `addr` and starts serving `session`, one cycle every `tick`.
pub async fn serve(addr: SocketAddr, session: Session, tick: Duration) -> Result<ServerHandle, ServeError> {
    let listener = TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(addr),
        _ => ServeError::Bind { addr, source: e },
    })?;
    let local_addr = listener
        .local_addr()
        .map_err(|e| ServeError::Bind { addr, source: e })?;
    let (mailbox_tx, mailbox_rx) = mpsc::channel(256);
    let (out_tx, _) = broadcast::channel(1024);
    let (stop_tx, stop_rx) = watch::channel(false);
    let log = Arc::new(Mutex::new(ServiceLog::default()));

    let decision_loop = tokio::spawn(decision_loop(
        session,
        mailbox_rx,
        out_tx.clone(),
        tick,
        log.clone(),
        stop_rx,
    ));
    let acceptor = tokio::spawn(accept_loop(listener, mailbox_tx, out_tx));
    tracing::info!(%local_addr, tick_ms = tick.as_millis() as u64, "serving");
    Ok(ServerHandle {
        local_addr,
        stop: stop_tx,
        decision_loop,
        acceptor,
        log,
    })
}

async fn decision_loop(
    mut session: Session,
    mut mailbox: mpsc::Receiver<Envelope>,
    out: broadcast::Sender<ServerMessage>,
    tick: Duration,
    log: Arc<Mutex<ServiceLog>>,
    mut stop: watch::Receiver<bool>,
) -> Session {
    let mut ticker = tokio::time::interval(tick);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    ticker.tick().await;
    loop {
        tokio::select! {
            biased;
            _ = stop.changed() => break,
            Some(env) = mailbox.recv() => {
                let at = session.tick();
                let outcome = session.apply(&env.message);
                log.lock().expect("log lock").applied.push(TimedMessage { tick: at, message: env.message });
                for m in outcome.broadcast {
                    let _ = out.send(m);
                }
                let _ = env.reply.send(outcome.reply);
            }
            _ = ticker.tick(), if !session.is_paused() => {
                match session.cycle() {
                    Ok(rec) => {
                        log.lock().expect("log lock").decisions.push(rec.decision);
                        for m in rec.messages {
                            let _ = out.send(m);
                        }
                    }
                    Err(e) => {
                        tracing::error!(error = %e, "decision cycle failed; pausing");
                        session.apply(&ClientMessage::Pause { seq: None });
                        let _ = out.send(ServerMessage::error(ErrorCode::Internal, e.to_string()));
                    }
                }
            }
        }
    }
    session
}

async fn accept_loop(listener: TcpListener, mailbox: mpsc::Sender<Envelope>, out: broadcast::Sender<ServerMessage>) {
    let mut connections = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    connections.spawn(connection(stream, peer, mailbox.clone(), out.subscribe()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            Some(_) = connections.join_next(), if !connections.is_empty() => {}
        }
    }
}

async fn connection(
    stream: TcpStream,
    peer: SocketAddr,
    mailbox: mpsc::Sender<Envelope>,
    mut updates: broadcast::Receiver<ServerMessage>,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::debug!(%peer, error = %e, "handshake failed");
            return;
        }
    };
    tracing::info!(%peer, "operator connected");
    let (mut sink, mut source) = ws.split();
    // Only state messages carry a sequence number.
    let mut seq = 0u64;
    let mut stamp = |mut m: ServerMessage| {
        if let ServerMessage::State(s) = &mut m {
            seq += 1;
            s.seq = seq;
        }
        Message::text(m.to_text())
    };
    loop {
        let outgoing = tokio::select! {
            frame = source.next() => match frame {
                Some(Ok(Message::Text(text))) => match parse_client(text.as_str()) {
                    Ok(message) => {
                        let (reply_tx, reply_rx) = oneshot::channel();
                        if mailbox.send(Envelope { message, reply: reply_tx }).await.is_err() {
                            break;
                        }
                        match reply_rx.await {
                            Ok(replies) => replies,
                            Err(_) => break,
                        }
                    }
                    Err(e) => vec![ServerMessage::error(ErrorCode::MalformedMessage, e)],
                },
                Some(Ok(Message::Binary(_))) => {
                    vec![ServerMessage::error(ErrorCode::MalformedMessage, "expected a text frame")]
                }
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => continue,
                Some(Err(e)) => {
                    tracing::debug!(%peer, error = %e, "read failed");
                    break;
                }
            },
            update = updates.recv() => match update {
                Ok(m) => vec![m],
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(%peer, skipped = n, "slow operator, dropped updates");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        };
        for m in outgoing {
            if sink.send(stamp(m)).await.is_err() {
                tracing::info!(%peer, "operator disconnected");
                return;
            }
        }
    }
    let _ = sink.close().await;
    tracing::info!(%peer, "operator disconnected");
}
