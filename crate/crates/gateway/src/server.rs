use std::collections::BTreeSet;
use std::fs::File;
use std::future::Future;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use immerflow_core::sensor::{SensorKind, MAX_FRAME_BYTES};
use thiserror::Error;
use tokio::io::AsyncReadExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::api::router;
use crate::state::{GatewayState, ServerEvent};
use crate::streams::Ingested;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    AddressInUse(SocketAddr),
    #[error("data root {path} is not writable: {reason}")]
    DataRootUnwritable { path: PathBuf, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub data_root: PathBuf,
    pub static_dir: Option<PathBuf>,
    /// JSON-lines file receiving one record per poll.
    pub poll_log: Option<PathBuf>,
    /// Seeds credential minting, for reproducible runs.
    pub seed: Option<u64>,
    /// Sensor ingest listener; port 0 picks a free one.
    pub stream_addr: SocketAddr,
    /// A session that has not polled for this long is logged as stale.
    pub stale_after: Duration,
}

impl GatewayConfig {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        GatewayConfig {
            data_root: data_root.into(),
            static_dir: None,
            poll_log: None,
            seed: None,
            stream_addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            stale_after: Duration::from_secs(30),
        }
    }
}

pub struct RunningGateway {
    pub http_addr: SocketAddr,
    pub stream_addr: SocketAddr,
    pub state: Arc<GatewayState>,
    shutdown: Option<oneshot::Sender<()>>,
    tasks: Vec<JoinHandle<()>>,
    http: JoinHandle<std::io::Result<()>>,
}

impl RunningGateway {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.http_addr)
    }

    /// Stops accepting, lets in-flight requests finish, then closes streams.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.http).await;
        for t in &self.tasks {
            t.abort();
        }
        tracing::info!("gateway stopped");
    }

    /// Resolves when the HTTP server exits.
    pub async fn wait(mut self) -> std::io::Result<()> {
        let res = (&mut self.http)
            .await
            .unwrap_or_else(|e| Err(std::io::Error::other(e.to_string())));
        for t in &self.tasks {
            t.abort();
        }
        res
    }
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::AddressInUse(addr)
        } else {
            ServeError::Io(e)
        }
    })
}

fn check_writable(root: &PathBuf) -> Result<(), ServeError> {
    let unwritable = |e: std::io::Error| ServeError::DataRootUnwritable {
        path: root.clone(),
        reason: e.to_string(),
    };
    std::fs::create_dir_all(root).map_err(unwritable)?;
    let probe = root.join(format!(".probe-{}", std::process::id()));
    std::fs::write(&probe, b"").map_err(unwritable)?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

fn poll_logger(path: &PathBuf) -> Result<impl Fn(&ServerEvent) + Send + Sync + 'static, ServeError> {
    let file = parking_lot::Mutex::new(File::create(path)?);
    let start = std::time::Instant::now();
    Ok(move |e: &ServerEvent| {
        if let ServerEvent::Polled { device_key, task_id } = e {
            let line = serde_json::json!({
                "t": start.elapsed().as_secs_f64(),
                "device_key": device_key,
                "result": task_id.as_deref().unwrap_or("empty"),
            });
            let mut f = file.lock();
            let _ = writeln!(f, "{line}");
        }
    })
}

/// One device connection: length-prefixed frames until EOF. Streams that
/// carried frames on this connection are closed when it ends.
async fn ingest_connection(state: Arc<GatewayState>, mut sock: TcpStream, peer: SocketAddr) {
    let mut carried: BTreeSet<(String, SensorKind)> = BTreeSet::new();
    let mut len_buf = [0u8; 4];
    loop {
        if sock.read_exact(&mut len_buf).await.is_err() {
            break;
        }
        let len = u32::from_le_bytes(len_buf) as usize;
        if len > MAX_FRAME_BYTES {
            tracing::warn!(%peer, len, "oversized frame; dropping connection");
            break;
        }
        let mut buf = vec![0u8; len];
        if sock.read_exact(&mut buf).await.is_err() {
            tracing::warn!(%peer, "connection ended mid-frame");
            break;
        }
        if let Ingested::Accepted { device_key, kind } = state.ingest(&buf) {
            carried.insert((device_key, kind));
        }
    }
    for (key, kind) in carried {
        state.close_streams(&key, &[kind]);
    }
    tracing::debug!(%peer, "sensor connection closed");
}

async fn accept_streams(state: Arc<GatewayState>, listener: TcpListener) {
    loop {
        match listener.accept().await {
            Ok((sock, peer)) => {
                let _ = sock.set_nodelay(true);
                tokio::spawn(ingest_connection(state.clone(), sock, peer));
            }
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    }
}

/// Binds both listeners and serves in the background of the current runtime.
pub async fn start(config: GatewayConfig, http_addr: SocketAddr) -> Result<RunningGateway, ServeError> {
    check_writable(&config.data_root)?;
    let state = Arc::new(GatewayState::open(&config.data_root, config.seed)?);
    if let Some(path) = &config.poll_log {
        state.observe(poll_logger(path)?);
    }
    let http = bind(http_addr).await?;
    let streams = bind(config.stream_addr).await?;
    let http_addr = http.local_addr()?;
    let stream_addr = streams.local_addr()?;
    state.set_stream_addr(stream_addr);

    let mut tasks = vec![tokio::spawn(accept_streams(state.clone(), streams))];
    let sweeper_state = state.clone();
    let stale_after = config.stale_after;
    tasks.push(tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(1).min(stale_after));
        loop {
            tick.tick().await;
            sweeper_state.report_stale(stale_after);
        }
    }));

    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone(), config.static_dir.clone());
    let http = tokio::spawn(async move {
        axum::serve(http, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%http_addr, %stream_addr, root = %config.data_root.display(), "gateway listening");
    Ok(RunningGateway {
        http_addr,
        stream_addr,
        state,
        shutdown: Some(tx),
        tasks,
        http,
    })
}

/// Serves until `signal` resolves.
pub async fn serve(
    config: GatewayConfig,
    http_addr: SocketAddr,
    signal: impl Future<Output = ()>,
) -> Result<(), ServeError> {
    let running = start(config, http_addr).await?;
    signal.await;
    tracing::info!("shutdown requested; draining");
    running.shutdown().await;
    Ok(())
}
