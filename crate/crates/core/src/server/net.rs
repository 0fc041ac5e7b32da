use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::wire::{read_frame, write_frame, WireError};

use super::{ServerController, ServerError};

type Connections = Arc<Mutex<HashMap<u64, (TcpStream, JoinHandle<()>)>>>;

/// A running TCP server. Dropping the handle shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    controller: Arc<ServerController>,
    stopping: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    connections: Connections,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn controller(&self) -> &Arc<ServerController> {
        &self.controller
    }

    /// Stops accepting, lets each connection finish the request it is
    /// working on, then joins every thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        let conns: Vec<_> = self.connections.lock().expect("connection table poisoned").drain().collect();
        for (_, (stream, handle)) in conns {
            // Unblocks a pending read with EOF; a response being written still goes out.
            let _ = stream.shutdown(Shutdown::Read);
            let _ = handle.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `listen` and serves framed requests with `controller`.
pub fn serve_controller(
    controller: Arc<ServerController>,
    listen: &str,
    max_frame: usize,
) -> Result<ServerHandle, ServerError> {
    let listener = TcpListener::bind(listen).map_err(|e| ServerError::Bind(listen.to_owned(), e))?;
    let addr = listener.local_addr()?;
    let stopping = Arc::new(AtomicBool::new(false));
    let connections: Connections = Arc::default();

    let acceptor = {
        let controller = Arc::clone(&controller);
        let stopping = Arc::clone(&stopping);
        let connections = Arc::clone(&connections);
        std::thread::Builder::new()
            .name("spim-accept".into())
            .spawn(move || accept_loop(listener, controller, stopping, connections, max_frame))?
    };
    log::info!("serving on {addr} ({} mode)", controller.mode());
    Ok(ServerHandle {
        addr,
        controller,
        stopping,
        acceptor: Some(acceptor),
        connections,
    })
}

fn accept_loop(
    listener: TcpListener,
    controller: Arc<ServerController>,
    stopping: Arc<AtomicBool>,
    connections: Connections,
    max_frame: usize,
) {
    let next_id = AtomicU64::new(0);
    for stream in listener.incoming() {
        if stopping.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let Ok(registered) = stream.try_clone() else {
            continue;
        };
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        let controller = Arc::clone(&controller);
        let table = Arc::clone(&connections);
        // Hold the table lock across spawn so the thread's own removal
        // cannot run before its entry exists.
        let mut guard = connections.lock().expect("connection table poisoned");
        let spawned = std::thread::Builder::new()
            .name(format!("spim-conn-{id}"))
            .spawn(move || {
                connection_loop(stream, &controller, max_frame);
                if let Ok(mut t) = table.lock() {
                    t.remove(&id);
                }
            });
        match spawned {
            Ok(handle) => {
                guard.insert(id, (registered, handle));
            }
            Err(e) => log::warn!("could not spawn connection thread: {e}"),
        }
    }
}

fn connection_loop(stream: TcpStream, controller: &ServerController, max_frame: usize) {
    let peer = stream.peer_addr().ok();
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let mut writer = BufWriter::new(write_half);
    loop {
        let doc = match read_frame(&mut reader, max_frame) {
            Ok(Some(doc)) => doc,
            Ok(None) => break,
            Err(WireError::Oversize { len, max }) => {
                // The stream cannot be resynchronised after an oversize header.
                log::warn!("{peer:?}: frame of {len} bytes exceeds {max}; closing");
                break;
            }
            Err(e) => {
                log::debug!("{peer:?}: {e}");
                break;
            }
        };
        let response = controller.handle_document(&doc);
        if let Err(e) = write_frame(&mut writer, &response) {
            log::debug!("{peer:?}: write failed: {e}");
            break;
        }
    }
}
