//! Byte streams for federation traffic: framed IO over any `Read + Write`,
//! an in-process duplex pipe, and TCP helpers.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use privfed_core::federation::{decode_header, encode_frame, FederatedMessage, FrameError, FRAME_HEADER_LEN};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("channel closed")]
    Closed,
    #[error("frame error: {0}")]
    Frame(#[from] FrameError),
    #[error("io error: {0}")]
    Io(io::Error),
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::BrokenPipe
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::WriteZero => WireError::Closed,
            _ => WireError::Io(e),
        }
    }
}

/// Writes one frame and returns its length in bytes.
pub fn frame_write(w: &mut impl Write, msg: &FederatedMessage) -> Result<usize, WireError> {
    let bytes = encode_frame(msg)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(bytes.len())
}

/// Reads exactly one frame. A stream that ends cleanly before the first
/// header byte is [`WireError::Closed`]; one that ends inside a frame is
/// [`FrameError::UnexpectedEof`].
pub fn frame_read(r: &mut impl Read) -> Result<FederatedMessage, WireError> {
    frame_read_raw(r).map(|(msg, _)| msg)
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

fn frame_read_raw(r: &mut impl Read) -> Result<(FederatedMessage, Vec<u8>), WireError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    match read_full(r, &mut header)? {
        0 => return Err(WireError::Closed),
        n if n < FRAME_HEADER_LEN => return Err(FrameError::UnexpectedEof.into()),
        _ => {}
    }
    let (payload_len, msg_type, sender_id) = decode_header(&header)?;
    let mut payload = vec![0u8; payload_len];
    if read_full(r, &mut payload)? < payload_len {
        return Err(FrameError::UnexpectedEof.into());
    }
    let mut raw = Vec::with_capacity(FRAME_HEADER_LEN + payload_len);
    raw.extend_from_slice(&header);
    raw.extend_from_slice(&payload);
    Ok((FederatedMessage { msg_type, sender_id, payload }, raw))
}

/// Shared log of every frame passing through the channels it is attached to.
pub type FrameLog = Arc<Mutex<Vec<Vec<u8>>>>;

/// A framed message channel that counts traffic and can record raw frames.
#[derive(Debug)]
pub struct FramedChannel<S> {
    stream: S,
    bytes_sent: u64,
    bytes_received: u64,
    log: Option<FrameLog>,
}

impl<S: Read + Write> FramedChannel<S> {
    pub fn new(stream: S) -> Self {
        Self { stream, bytes_sent: 0, bytes_received: 0, log: None }
    }

    pub fn with_log(mut self, log: FrameLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn send(&mut self, msg: &FederatedMessage) -> Result<(), WireError> {
        let bytes = encode_frame(msg)?;
        self.stream.write_all(&bytes)?;
        self.stream.flush()?;
        self.bytes_sent += bytes.len() as u64;
        if let Some(log) = &self.log {
            log.lock().expect("frame log poisoned").push(bytes);
        }
        Ok(())
    }

    pub fn recv(&mut self) -> Result<FederatedMessage, WireError> {
        let (msg, raw) = frame_read_raw(&mut self.stream)?;
        self.bytes_received += raw.len() as u64;
        if let Some(log) = &self.log {
            log.lock().expect("frame log poisoned").push(raw);
        }
        Ok(msg)
    }

    pub fn bytes_transferred(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

/// One end of an in-process duplex byte pipe. Reads return EOF once the
/// peer is dropped and its buffered bytes are drained.
#[derive(Debug)]
pub struct PipeEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

pub fn pipe() -> (PipeEnd, PipeEnd) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (
        PipeEnd { tx: a_tx, rx: a_rx, pending: Vec::new(), pos: 0 },
        PipeEnd { tx: b_tx, rx: b_rx, pending: Vec::new(), pos: 0 },
    )
}

impl Read for PipeEnd {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.pending.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx.send(buf.to_vec()).map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "pipe peer dropped"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Accepts `count` connections on `listener`, in arrival order.
pub fn accept_edges(listener: &TcpListener, count: usize) -> io::Result<Vec<TcpStream>> {
    (0..count)
        .map(|_| {
            let (stream, _) = listener.accept()?;
            stream.set_nodelay(true)?;
            Ok(stream)
        })
        .collect()
}

pub fn connect(addr: impl ToSocketAddrs) -> io::Result<TcpStream> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use privfed_core::federation::MessageType;

    #[test]
    fn pipe_carries_frames_both_ways() {
        let (a, b) = pipe();
        let mut a = FramedChannel::new(a);
        let mut b = FramedChannel::new(b);
        let msg = FederatedMessage::new(MessageType::Metrics, 7, vec![1, 2, 3]);
        a.send(&msg).unwrap();
        assert_eq!(b.recv().unwrap(), msg);
        b.send(&FederatedMessage::new(MessageType::Shutdown, 0, vec![])).unwrap();
        assert_eq!(a.recv().unwrap().msg_type, MessageType::Shutdown);
        assert_eq!(a.bytes_transferred(), 10 + 7);
    }

    #[test]
    fn dropped_peer_reads_closed() {
        let (a, b) = pipe();
        drop(a);
        let mut b = FramedChannel::new(b);
        assert!(matches!(b.recv(), Err(WireError::Closed)));
    }

    #[test]
    fn partial_frame_is_eof() {
        let mut bytes: &[u8] = &[0, 0, 0, 9, 2, 0, 1, 5];
        assert!(matches!(frame_read(&mut bytes), Err(WireError::Frame(FrameError::UnexpectedEof))));
        let mut bytes: &[u8] = &[0, 0, 0];
        assert!(matches!(frame_read(&mut bytes), Err(WireError::Frame(FrameError::UnexpectedEof))));
    }

    #[test]
    fn tcp_roundtrip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut s = connect(addr).unwrap();
            frame_write(&mut s, &FederatedMessage::new(MessageType::Hello, 2, vec![])).unwrap();
        });
        let mut streams = accept_edges(&listener, 1).unwrap();
        let msg = frame_read(&mut streams[0]).unwrap();
        assert_eq!((msg.msg_type, msg.sender_id), (MessageType::Hello, 2));
        handle.join().unwrap();
    }
}
