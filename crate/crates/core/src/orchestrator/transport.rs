//! Transports carrying protocol messages between master and workers.
//!
//! Two implementations of the same contract (reliable, ordered,
//! point-to-point delivery): in-process channels for tests and
//! single-machine runs, and length-framed TCP streams for multi-host runs.
//! The master consumes a single event stream merged across workers; each
//! worker owns a blocking bidirectional endpoint.

use std::io;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;

use super::protocol::{read_message, write_message, Message, ProtocolError, WorkerId};

/// What the master sees: a message from a worker, or the end of a worker's
/// connection (clean or not).
#[derive(Debug)]
pub enum Event {
    Message(WorkerId, Message),
    Closed(WorkerId),
}

/// Master-side handle for sending to one worker.
pub trait MessageSink: Send {
    fn send(&mut self, msg: &Message) -> io::Result<()>;
}

pub struct WorkerLink {
    pub id: WorkerId,
    pub sink: Box<dyn MessageSink>,
}

/// Everything the master loop needs: per-worker send handles and the merged
/// event stream.
pub struct MasterHooks {
    pub links: Vec<WorkerLink>,
    pub events: Receiver<Event>,
}

/// Worker-side blocking endpoint.
pub trait WorkerTransport {
    fn send(&mut self, msg: &Message) -> io::Result<()>;
    fn recv(&mut self) -> Result<Message, ProtocolError>;
}

// ---------------------------------------------------------------------------
// In-process transport
// ---------------------------------------------------------------------------

struct ChannelSink {
    tx: Sender<Message>,
}

impl MessageSink for ChannelSink {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        self.tx
            .send(msg.clone())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "worker endpoint dropped"))
    }
}

/// Worker end of the in-process transport. Dropping it (including during a
/// panic unwind) reports `Closed` to the master, which models a crashed
/// connection.
pub struct InprocEndpoint {
    id: WorkerId,
    to_master: Sender<Event>,
    from_master: Receiver<Message>,
}

impl WorkerTransport for InprocEndpoint {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        self.to_master
            .send(Event::Message(self.id, msg.clone()))
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "master gone"))
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        self.from_master.recv().map_err(|_| {
            ProtocolError::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "master closed the channel",
            ))
        })
    }
}

impl Drop for InprocEndpoint {
    fn drop(&mut self) {
        let _ = self.to_master.send(Event::Closed(self.id));
    }
}

/// Builds an in-process session with `num_workers` endpoints. The caller
/// typically moves each endpoint into its own worker thread.
pub fn inproc_session(num_workers: u32) -> (MasterHooks, Vec<InprocEndpoint>) {
    let (event_tx, event_rx) = channel();
    let mut links = Vec::with_capacity(num_workers as usize);
    let mut endpoints = Vec::with_capacity(num_workers as usize);
    for id in 0..num_workers {
        let (task_tx, task_rx) = channel();
        links.push(WorkerLink {
            id,
            sink: Box::new(ChannelSink { tx: task_tx }),
        });
        endpoints.push(InprocEndpoint {
            id,
            to_master: event_tx.clone(),
            from_master: task_rx,
        });
    }
    (
        MasterHooks {
            links,
            events: event_rx,
        },
        endpoints,
    )
}

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

struct TcpSink {
    stream: TcpStream,
}

impl MessageSink for TcpSink {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        write_message(&mut self.stream, msg).map_err(|e| match e {
            ProtocolError::Io(io) => io,
            other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
        })
    }
}

/// Accepts `num_workers` connections and spawns one reader thread per
/// socket, merging everything into the master's event stream. Reader
/// threads end on EOF or error, reporting `Closed`.
pub fn tcp_master_session(
    listener: TcpListener,
    num_workers: u32,
) -> io::Result<(MasterHooks, Vec<JoinHandle<()>>)> {
    let (event_tx, event_rx) = channel();
    let mut links = Vec::with_capacity(num_workers as usize);
    let mut readers = Vec::with_capacity(num_workers as usize);
    for id in 0..num_workers {
        let (stream, peer) = listener.accept()?;
        log::info!("worker {id} connected from {peer}");
        stream.set_nodelay(true).ok();
        let reader_stream = stream.try_clone()?;
        links.push(WorkerLink {
            id,
            sink: Box::new(TcpSink { stream }),
        });
        let tx = event_tx.clone();
        readers.push(std::thread::spawn(move || {
            let mut reader = reader_stream;
            loop {
                match read_message(&mut reader) {
                    Ok(msg) => {
                        if tx.send(Event::Message(id, msg)).is_err() {
                            break;
                        }
                    }
                    Err(_) => {
                        let _ = tx.send(Event::Closed(id));
                        break;
                    }
                }
            }
        }));
    }
    Ok((
        MasterHooks {
            links,
            events: event_rx,
        },
        readers,
    ))
}

/// Worker end of the TCP transport.
pub struct TcpWorkerTransport {
    stream: TcpStream,
}

impl TcpWorkerTransport {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<TcpWorkerTransport> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        Ok(TcpWorkerTransport { stream })
    }
}

impl WorkerTransport for TcpWorkerTransport {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        write_message(&mut self.stream, msg).map_err(|e| match e {
            ProtocolError::Io(io) => io,
            other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
        })
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        read_message(&mut self.stream)
    }
}
