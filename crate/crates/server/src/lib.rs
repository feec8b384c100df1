//! HTTP+JSON service over the simulation engine, and the pieces of the `ugi`
//! command line that are worth testing directly.

pub mod cli;
pub mod routes;
pub mod state;
pub mod wire;

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tokio::sync::oneshot;

pub use routes::router;
pub use state::{ServeConfig, Shared};

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    shared: Arc<Shared>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let driver = shared.spawn_driver();
    let app = router(shared.clone());
    let s = shared.clone();
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            // held event streams watch this flag and close
            s.stop();
        })
        .await;
    shared.stop();
    let _ = driver.join();
    result
}

/// A server running on its own runtime thread; stops when dropped.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub shared: Arc<Shared>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shared.stop();
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn(shared: Arc<Shared>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let s = shared.clone();
    let thread = std::thread::Builder::new().name("ugi-http".into()).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener)?;
            serve(listener, s, async {
                let _ = rx.await;
            })
            .await
        })
    })?;
    Ok(ServerHandle {
        addr,
        shared,
        stop: Some(tx),
        thread: Some(thread),
    })
}
