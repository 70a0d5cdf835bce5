use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::wire::{read_frame, write_message, ErrorCode, FrameRead, WireMessage, MAX_FRAME};
use super::Service;

/// Accept loop with one thread per connection.
pub struct Server {
    listener: TcpListener,
    service: Arc<Service>,
    shutdown: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, service: Service) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            service: Arc::new(service),
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }

    /// Serves until [`ServerHandle::shutdown`] is called on a handle from
    /// [`Server::spawn`]; when run directly, serves forever.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let service = Arc::clone(&self.service);
            let shutdown = Arc::clone(&self.shutdown);
            thread::spawn(move || {
                let _ = serve_connection(stream, &service, &shutdown);
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shutdown = Arc::clone(&self.shutdown);
        let thread = thread::spawn(move || {
            let _ = self.run();
        });
        Ok(ServerHandle {
            addr,
            shutdown,
            thread: Some(thread),
        })
    }
}

/// A server running on a background thread. Dropping it stops the server.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open sessions end at their next idle
    /// timeout.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shutdown.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn serve_connection(stream: TcpStream, service: &Service, shutdown: &AtomicBool) -> io::Result<()> {
    stream.set_read_timeout(Some(service.config().read_timeout))?;
    stream.set_nodelay(true)?;
    let mut reader = stream.try_clone()?;
    let mut writer = stream;
    loop {
        let reply = match read_frame(&mut reader)? {
            FrameRead::Frame(payload) => {
                catch_unwind(AssertUnwindSafe(|| service.handle_payload(&payload))).unwrap_or_else(
                    |_| WireMessage::error(ErrorCode::Internal, "request handler failed"),
                )
            }
            FrameRead::Idle => {
                if shutdown.load(Ordering::SeqCst) {
                    return Ok(());
                }
                continue;
            }
            FrameRead::Incomplete => {
                WireMessage::error(ErrorCode::BadFrame, "frame incomplete at read timeout")
            }
            FrameRead::Oversize(len) => {
                // The stream cannot be resynchronized after a bogus length.
                let msg = format!("frame length {len} exceeds {MAX_FRAME}");
                write_message(&mut writer, &WireMessage::error(ErrorCode::BadFrame, msg))?;
                return Ok(());
            }
            FrameRead::Closed => return Ok(()),
        };
        write_message(&mut writer, &reply)?;
    }
}
