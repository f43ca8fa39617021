//! Newline-delimited JSON protocol for external policies.
//!
//! Per episode the harness sends `hello` and waits for `hello_ack`, then
//! alternates `obs` and `act` until the episode ends, then sends `end`.
//! Exactly one request is outstanding at a time and every read has a
//! deadline. The byte-level format is documented in `docs/bridge-protocol.md`.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::policy::{EpisodeContext, EpisodeOutcome, Policy};
use crate::embodiment::EmbodimentConfig;
use crate::error::{Error, Result};
use crate::sim::{Action, Observation};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_SECS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub target_category: String,
    pub instruction: String,
    pub success_distance: f64,
    pub max_steps: u32,
    /// Semantic ids of the target instances.
    pub target_ids: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

/// One camera image; `data` is the sensor byte layout in lowercase hex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub camera_index: u8,
    pub width: u32,
    pub height: u32,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
        episode_id: u64,
        task: TaskInfo,
        /// Present only when the suite discloses embodiments.
        embodiment: Option<EmbodimentConfig>,
        cameras: Vec<ImageSize>,
    },
    HelloAck {
        version: u32,
    },
    Reject {
        reason: String,
    },
    Obs {
        step: u32,
        images: Vec<WireImage>,
        last_action_failed: bool,
        instruction: String,
    },
    Act {
        action: String,
    },
    End(EpisodeOutcome),
}

/// A line-framed JSON connection with a read deadline.
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
}

impl Connection {
    pub fn new(stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            timeout,
        })
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::Connection(format!("send failed: {e}")))
    }

    pub fn recv(&mut self) -> Result<Message> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(Error::Connection("peer closed the connection".into())),
            Ok(_) => serde_json::from_str(line.trim_end())
                .map_err(|e| Error::Protocol(format!("malformed message: {e}"))),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Err(Error::Connection(
                format!("no reply within {:.1} s", self.timeout.as_secs_f64()),
            )),
            Err(e) => Err(Error::Connection(format!("receive failed: {e}"))),
        }
    }
}

enum Endpoint {
    /// The harness dials a policy server.
    Connect(Vec<SocketAddr>),
    /// The harness waits for a policy client.
    Listen(TcpListener),
}

fn resolve(addr: &str) -> Result<Vec<SocketAddr>> {
    let addrs: Vec<_> = addr
        .to_socket_addrs()
        .map_err(|e| Error::Argument(format!("bad address `{addr}`: {e}")))?
        .collect();
    if addrs.is_empty() {
        return Err(Error::Argument(format!("address `{addr}` resolves to nothing")));
    }
    Ok(addrs)
}

/// An external policy reached over TCP.
///
/// `tcp://HOST:PORT` connects to a waiting policy server; `listen://HOST:PORT`
/// binds and accepts one policy client. A failed episode drops the
/// connection; the next episode reconnects.
pub struct BridgePolicy {
    endpoint: Endpoint,
    timeout: Duration,
    conn: Option<Connection>,
    instruction: String,
}

impl BridgePolicy {
    /// Connects (or binds) right away so an unreachable endpoint fails early.
    pub fn open(endpoint: &str, timeout_secs: f64) -> Result<Self> {
        if !(timeout_secs > 0.0 && timeout_secs.is_finite()) {
            return Err(Error::Argument(format!("timeout {timeout_secs} s must be positive")));
        }
        let timeout = Duration::from_secs_f64(timeout_secs);
        let endpoint = if let Some(addr) = endpoint.strip_prefix("tcp://") {
            Endpoint::Connect(resolve(addr)?)
        } else if let Some(addr) = endpoint.strip_prefix("listen://") {
            Endpoint::Listen(
                TcpListener::bind(addr).map_err(|e| Error::Connection(format!("cannot bind {addr}: {e}")))?,
            )
        } else {
            return Err(Error::Argument(format!(
                "endpoint `{endpoint}` must start with tcp:// or listen://"
            )));
        };
        let mut policy = Self {
            endpoint,
            timeout,
            conn: None,
            instruction: String::new(),
        };
        if matches!(policy.endpoint, Endpoint::Connect(_)) {
            policy.ensure_connected()?;
        }
        Ok(policy)
    }

    /// Bound address in listen mode.
    pub fn local_addr(&self) -> Option<SocketAddr> {
        match &self.endpoint {
            Endpoint::Listen(l) => l.local_addr().ok(),
            Endpoint::Connect(_) => None,
        }
    }

    fn ensure_connected(&mut self) -> Result<&mut Connection> {
        if self.conn.is_none() {
            let stream = match &self.endpoint {
                Endpoint::Connect(addrs) => {
                    let mut last = None;
                    let mut stream = None;
                    for a in addrs {
                        match TcpStream::connect_timeout(a, self.timeout) {
                            Ok(s) => {
                                stream = Some(s);
                                break;
                            }
                            Err(e) => last = Some(format!("{a}: {e}")),
                        }
                    }
                    stream.ok_or_else(|| Error::Connection(format!("cannot connect to {}", last.unwrap_or_default())))?
                }
                Endpoint::Listen(l) => accept_with_deadline(l, self.timeout)?,
            };
            self.conn = Some(Connection::new(stream, self.timeout)?);
        }
        Ok(self.conn.as_mut().expect("connected above"))
    }

    /// Runs `f` on the connection, dropping the connection if it fails.
    fn exchange<T>(&mut self, f: impl FnOnce(&mut Connection) -> Result<T>) -> Result<T> {
        let out = self.ensure_connected().and_then(f);
        if out.is_err() {
            self.conn = None;
        }
        out
    }
}

fn accept_with_deadline(l: &TcpListener, timeout: Duration) -> Result<TcpStream> {
    l.set_nonblocking(true)?;
    let deadline = Instant::now() + timeout;
    loop {
        match l.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                return Ok(s);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Connection(format!(
                        "no policy client connected within {:.1} s",
                        timeout.as_secs_f64()
                    )));
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(Error::Connection(format!("accept failed: {e}"))),
        }
    }
}

pub fn encode_observation(step: u32, obs: &Observation, instruction: &str) -> Message {
    Message::Obs {
        step,
        images: obs
            .images
            .iter()
            .map(|img| WireImage {
                camera_index: img.camera_index,
                width: img.width,
                height: img.height,
                data: hex::encode(img.to_bytes()),
            })
            .collect(),
        last_action_failed: obs.last_action_failed,
        instruction: instruction.to_string(),
    }
}

/// Decodes the images of an `obs` message.
pub fn decode_images(images: &[WireImage]) -> Result<Vec<crate::sensor::Image>> {
    images
        .iter()
        .map(|w| {
            let bytes = hex::decode(&w.data).map_err(|e| Error::Protocol(format!("image data: {e}")))?;
            crate::sensor::Image::from_bytes(w.width, w.height, w.camera_index, &bytes)
        })
        .collect()
}

impl Policy for BridgePolicy {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        let task = &ctx.spec.task;
        let hello = Message::Hello {
            version: PROTOCOL_VERSION,
            episode_id: ctx.spec.episode_id,
            task: TaskInfo {
                target_category: task.target_category.clone(),
                instruction: task.instruction.clone(),
                success_distance: task.success_distance,
                max_steps: task.max_steps,
                target_ids: ctx.targets.to_vec(),
            },
            embodiment: ctx.disclose_embodiment.then(|| (**ctx.embodiment).clone()),
            cameras: ctx.image_sizes.iter().map(|&(width, height)| ImageSize { width, height }).collect(),
        };
        self.instruction = task.instruction.clone();
        self.exchange(|c| {
            c.send(&hello)?;
            match c.recv()? {
                Message::HelloAck { version } if version == PROTOCOL_VERSION => Ok(()),
                Message::HelloAck { version } => {
                    let reason = format!("protocol version {version}, harness speaks {PROTOCOL_VERSION}");
                    let _ = c.send(&Message::Reject { reason: reason.clone() });
                    Err(Error::Handshake(reason))
                }
                Message::Reject { reason } => Err(Error::Handshake(reason)),
                other => Err(Error::Protocol(format!("expected hello_ack, got {}", message_type(&other)))),
            }
        })
    }

    fn act(&mut self, step: u32, obs: &Observation) -> Result<Action> {
        let msg = encode_observation(step, obs, &self.instruction);
        self.exchange(|c| {
            c.send(&msg)?;
            match c.recv()? {
                Message::Act { action } => action.parse(),
                other => Err(Error::Protocol(format!("expected act, got {}", message_type(&other)))),
            }
        })
    }

    fn end(&mut self, outcome: &EpisodeOutcome) -> Result<()> {
        match self.conn.as_mut() {
            Some(c) => {
                let r = c.send(&Message::End(outcome.clone()));
                if r.is_err() {
                    self.conn = None;
                }
                r
            }
            None => Ok(()),
        }
    }
}

fn message_type(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "hello",
        Message::HelloAck { .. } => "hello_ack",
        Message::Reject { .. } => "reject",
        Message::Obs { .. } => "obs",
        Message::Act { .. } => "act",
        Message::End(_) => "end",
    }
}

/// Reference client that answers every observation with `action`.
///
/// Handles episodes until the harness closes the connection and returns how
/// many `end` messages arrived. `version` is announced in `hello_ack`.
pub fn serve_constant(stream: TcpStream, action: Action, version: u32, timeout: Duration) -> Result<u64> {
    let mut c = Connection::new(stream, timeout)?;
    let mut ended = 0;
    loop {
        let msg = match c.recv() {
            Ok(m) => m,
            Err(Error::Connection(_)) => return Ok(ended),
            Err(e) => return Err(e),
        };
        match msg {
            Message::Hello { .. } => c.send(&Message::HelloAck { version })?,
            Message::Obs { images, .. } => {
                decode_images(&images)?;
                c.send(&Message::Act {
                    action: action.name().to_string(),
                })?
            }
            Message::End(_) => ended += 1,
            Message::Reject { reason } => return Err(Error::Handshake(reason)),
            other => {
                return Err(Error::Protocol(format!(
                    "client got unexpected {}",
                    message_type(&other)
                )))
            }
        }
    }
}

/// Binds an ephemeral local port and serves [`serve_constant`] to each
/// harness connection in turn, for use with `tcp://` endpoints.
pub fn spawn_constant_server(action: Action, version: u32) -> Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let handle = thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let timeout = Duration::from_secs_f64(DEFAULT_TIMEOUT_SECS);
            if let Err(e) = serve_constant(stream, action, version, timeout) {
                log::warn!("constant policy session ended: {e}");
            }
        }
    });
    Ok((addr, handle))
}
