//! In-process HTTP stub for exercising the remote clients.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use axum::body::Bytes;
use axum::http::{StatusCode, Uri};
use axum::Router;

type Handler = dyn Fn(&str, serde_json::Value) -> (u16, String) + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    _shutdown: tokio::sync::oneshot::Sender<()>,
}

impl StubServer {
    /// Serves every POST with `handler(path, json_body) -> (status, body)`.
    pub fn start<F>(handler: F) -> StubServer
    where
        F: Fn(&str, serde_json::Value) -> (u16, String) + Send + Sync + 'static,
    {
        let handler: Arc<Handler> = Arc::new(handler);
        let hits = Arc::new(AtomicUsize::new(0));
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
        let counter = hits.clone();
        thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
            rt.block_on(async move {
                let app = Router::new().fallback(move |uri: Uri, body: Bytes| {
                    let handler = handler.clone();
                    let counter = counter.clone();
                    async move {
                        counter.fetch_add(1, Ordering::SeqCst);
                        let json = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                        let (status, text) = handler(uri.path(), json);
                        (StatusCode::from_u16(status).unwrap(), text)
                    }
                });
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = shutdown_rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        StubServer { addr, hits, _shutdown: shutdown_tx }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}
