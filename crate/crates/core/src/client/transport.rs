use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use crate::server::ServerController;
use crate::wire::{
    decode_response, encode_request, read_frame, write_frame, RequestEnvelope, ResponseEnvelope, WireError,
    DEFAULT_MAX_FRAME,
};

use super::ClientError;

/// Carries one request to a server controller and returns its response.
pub trait Transport {
    fn roundtrip(&mut self, req: &RequestEnvelope) -> Result<ResponseEnvelope, ClientError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn roundtrip(&mut self, req: &RequestEnvelope) -> Result<ResponseEnvelope, ClientError> {
        (**self).roundtrip(req)
    }
}

/// Calls a server controller in the same process. Requests and responses
/// still go through the XML codec so both routes exercise the same bytes.
pub struct InProcessTransport {
    server: Arc<ServerController>,
}

impl InProcessTransport {
    pub fn new(server: Arc<ServerController>) -> Self {
        Self { server }
    }
}

impl Transport for InProcessTransport {
    fn roundtrip(&mut self, req: &RequestEnvelope) -> Result<ResponseEnvelope, ClientError> {
        let reply = self.server.handle_document(&encode_request(req));
        let resp = decode_response(&reply)?;
        check_echo(req, &resp)?;
        Ok(resp)
    }
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Framed XML over TCP. The connection is opened lazily and reused until
/// an error drops it.
pub struct TcpTransport {
    addr: String,
    conn: Option<Connection>,
    max_frame: usize,
    timeout: Option<Duration>,
}

impl TcpTransport {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            conn: None,
            max_frame: DEFAULT_MAX_FRAME,
            timeout: Some(Duration::from_secs(30)),
        }
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_frame(mut self, max_frame: usize) -> Self {
        self.max_frame = max_frame;
        self
    }

    pub fn is_connected(&self) -> bool {
        self.conn.is_some()
    }

    fn connect(&self) -> Result<Connection, ClientError> {
        let failed = |e: std::io::Error| ClientError::ConnectionFailed(format!("{}: {e}", self.addr));
        let addrs: Vec<_> = self.addr.to_socket_addrs().map_err(failed)?.collect();
        let mut last = None;
        for addr in addrs {
            let attempt = match self.timeout {
                Some(t) => TcpStream::connect_timeout(&addr, t),
                None => TcpStream::connect(addr),
            };
            match attempt {
                Ok(stream) => {
                    stream.set_nodelay(true).map_err(failed)?;
                    stream.set_read_timeout(self.timeout).map_err(failed)?;
                    stream.set_write_timeout(self.timeout).map_err(failed)?;
                    let write_half = stream.try_clone().map_err(failed)?;
                    return Ok(Connection {
                        reader: BufReader::new(stream),
                        writer: BufWriter::new(write_half),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(ClientError::ConnectionFailed(match last {
            Some(e) => format!("{}: {e}", self.addr),
            None => format!("{}: no addresses resolved", self.addr),
        }))
    }

    fn exchange(conn: &mut Connection, req: &RequestEnvelope, max_frame: usize) -> Result<ResponseEnvelope, ClientError> {
        write_frame(&mut conn.writer, &encode_request(req))?;
        let reply = read_frame(&mut conn.reader, max_frame)?
            .ok_or(ClientError::Wire(WireError::Truncated { expected: 4, got: 0 }))?;
        let resp = decode_response(&reply)?;
        check_echo(req, &resp)?;
        Ok(resp)
    }
}

impl Transport for TcpTransport {
    fn roundtrip(&mut self, req: &RequestEnvelope) -> Result<ResponseEnvelope, ClientError> {
        if self.conn.is_none() {
            self.conn = Some(self.connect()?);
        }
        let conn = self.conn.as_mut().expect("connection was just established");
        let result = Self::exchange(conn, req, self.max_frame);
        if result.is_err() {
            self.conn = None;
        }
        result
    }
}

fn check_echo(req: &RequestEnvelope, resp: &ResponseEnvelope) -> Result<(), ClientError> {
    // MALFORMED replies cannot echo an id the server failed to parse.
    if resp.request_id != req.request_id && !resp.request_id.is_empty() {
        return Err(ClientError::Wire(WireError::Malformed(format!(
            "response id {:?} does not echo request id {:?}",
            resp.request_id, req.request_id
        ))));
    }
    Ok(())
}
