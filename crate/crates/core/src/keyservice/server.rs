//! TCP front end: one thread per connection, all sharing one [`KeyPool`]
//! behind a mutex so that every operation is linearizable.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use super::pool::{ErrorCode, KeyPool};
use super::wire::{handle_payload, read_frame, write_frame, FrameRead, KeyResponse};

pub type SharedPool = Arc<Mutex<KeyPool>>;

fn lock(pool: &SharedPool) -> std::sync::MutexGuard<'_, KeyPool> {
    // A panicking connection thread must not take the service down with it.
    pool.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn serve_connection(mut stream: TcpStream, pool: SharedPool) -> io::Result<()> {
    loop {
        match read_frame(&mut stream)? {
            FrameRead::Closed => return Ok(()),
            FrameRead::TooLarge(_) => {
                write_frame(&mut stream, &KeyResponse::error(ErrorCode::BadRequest).to_json())?;
                return Ok(());
            }
            FrameRead::Payload(payload) => {
                let response = handle_payload(&mut lock(&pool), &payload);
                write_frame(&mut stream, &response)?;
            }
        }
    }
}

/// A running key service.
pub struct KeyServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl KeyServer {
    /// Binds `addr` and starts accepting connections in a background thread.
    pub fn spawn<A: ToSocketAddrs>(addr: A, pool: SharedPool) -> io::Result<KeyServer> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let accept_thread = thread::spawn(move || {
            for stream in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let pool = Arc::clone(&pool);
                thread::spawn(move || {
                    let _ = serve_connection(stream, pool);
                });
            }
        });
        Ok(KeyServer {
            addr,
            stop,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits (only after [`KeyServer::shutdown`]).
    pub fn join(mut self) {
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }

    /// Stops accepting new connections. Open connections finish normally.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for KeyServer {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop_accepting();
        }
    }
}
