use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use immerflow_core::dataflow::{ExecutionReport, ParamMap};
use immerflow_core::hub::{RemoteFunction, RemoteFunctions};
use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::RigidTransform;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::error::GatewayError;
use crate::sessions::{Credentials, TaskKind};
use crate::state::GatewayState;
use crate::streams::StreamStatus;
use crate::workspaces::WorkspaceMeta;

type AppState = State<Arc<GatewayState>>;
type ApiResult<T> = Result<Json<T>, GatewayError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ConnectRequest {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConnectResponse {
    pub device_key: String,
}

/// `spec` may be a JSON object or the serialized text.
#[derive(Debug, Serialize, Deserialize)]
pub struct RenderRequest {
    pub spec: Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskCreated {
    pub task_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StreamRequest {
    pub kinds: Vec<SensorKind>,
}

/// Where a device sends its frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub host: String,
    pub port: u16,
    pub kinds: Vec<SensorKind>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarkerUpdate {
    pub marker_id: String,
    pub pose: RigidTransform,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ExecuteRequest {
    #[serde(default)]
    pub params: ParamMap,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedWorkspace {
    pub access_code: String,
}

#[derive(Debug, Deserialize)]
struct EndpointQuery {
    endpoint: String,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, GatewayError> + Send + 'static,
) -> Result<T, GatewayError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| GatewayError::Internal(e.to_string()))?
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn nodes(State(s): AppState) -> Response {
    let kinds: Vec<_> = s.registry.kinds().collect();
    Json(kinds).into_response()
}

async fn request_connection(State(s): AppState) -> Json<Credentials> {
    Json(s.request_connection())
}

async fn connect(State(s): AppState, Json(r): Json<ConnectRequest>) -> ApiResult<ConnectResponse> {
    let device_key = s.connect_device(&r.username, &r.password)?;
    Ok(Json(ConnectResponse { device_key }))
}

async fn poll(State(s): AppState, Path(key): Path<String>) -> Result<Response, GatewayError> {
    Ok(match s.poll(&key)? {
        Some(task) => Json(task).into_response(),
        None => Json(json!({ "status": "empty" })).into_response(),
    })
}

async fn render(
    State(s): AppState,
    Path(key): Path<String>,
    Json(r): Json<RenderRequest>,
) -> ApiResult<TaskCreated> {
    let text = match r.spec {
        Value::String(t) => t,
        other => other.to_string(),
    };
    let task_id = s.enqueue_spec_text(&key, &text)?;
    Ok(Json(TaskCreated { task_id }))
}

async fn clear(State(s): AppState, Path(key): Path<String>) -> ApiResult<TaskCreated> {
    let task_id = s.enqueue(&key, TaskKind::ClearScene, String::new())?;
    Ok(Json(TaskCreated { task_id }))
}

async fn capture(State(s): AppState, Path(key): Path<String>, Json(params): Json<Value>) -> ApiResult<TaskCreated> {
    let task_id = s.enqueue(&key, TaskKind::CaptureRequest, params.to_string())?;
    Ok(Json(TaskCreated { task_id }))
}

async fn disconnect(State(s): AppState, Path(key): Path<String>) -> ApiResult<Value> {
    s.disconnect(&key)?;
    Ok(Json(json!({ "status": "disconnected" })))
}

async fn open_stream(
    State(s): AppState,
    Path(key): Path<String>,
    Json(r): Json<StreamRequest>,
) -> ApiResult<StreamDescriptor> {
    s.open_streams(&key, &r.kinds)?;
    let addr = s
        .stream_addr()
        .ok_or_else(|| GatewayError::Internal("stream listener not running".into()))?;
    Ok(Json(StreamDescriptor {
        host: addr.ip().to_string(),
        port: addr.port(),
        kinds: r.kinds,
    }))
}

async fn close_stream(
    State(s): AppState,
    Path(key): Path<String>,
    Json(r): Json<StreamRequest>,
) -> ApiResult<Vec<StreamStatus>> {
    s.close_streams(&key, &r.kinds);
    Ok(Json(s.streams.status(&key)))
}

async fn stream_status(State(s): AppState, Path(key): Path<String>) -> ApiResult<Vec<StreamStatus>> {
    if !s.sessions.is_live(&key) {
        return Err(GatewayError::UnknownDevice(key));
    }
    Ok(Json(s.streams.status(&key)))
}

async fn marker(
    State(s): AppState,
    Path(key): Path<String>,
    Json(m): Json<MarkerUpdate>,
) -> ApiResult<Value> {
    s.sessions.set_marker(&key, &m.marker_id, m.pose)?;
    Ok(Json(json!({ "status": "ok" })))
}

async fn list_workspaces(State(s): AppState) -> Json<Vec<String>> {
    Json(s.workspaces.list())
}

async fn create_workspace(State(s): AppState) -> ApiResult<CreatedWorkspace> {
    let access_code = blocking(move || s.workspaces.create()).await?;
    Ok(Json(CreatedWorkspace { access_code }))
}

async fn load_workspace(State(s): AppState, Path(code): Path<String>) -> Result<Response, GatewayError> {
    let bytes = blocking(move || s.workspaces.load(&code)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn save_workspace(
    State(s): AppState,
    Path(code): Path<String>,
    body: Bytes,
) -> ApiResult<WorkspaceMeta> {
    Ok(Json(blocking(move || s.workspaces.save(&code, &body)).await?))
}

async fn workspace_meta(State(s): AppState, Path(code): Path<String>) -> ApiResult<WorkspaceMeta> {
    Ok(Json(blocking(move || s.workspaces.meta(&code)).await?))
}

async fn execute_workspace(State(s): AppState, Path(code): Path<String>) -> ApiResult<ExecutionReport> {
    Ok(Json(blocking(move || s.execute_workspace(&code)).await?))
}

async fn execute_node(
    State(s): AppState,
    Path((code, node)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<ExecutionReport> {
    let req: ExecuteRequest = if body.is_empty() {
        ExecuteRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| GatewayError::BadRequest(e.to_string()))?
    };
    Ok(Json(blocking(move || s.execute_node(&code, &node, req.params)).await?))
}

async fn published(State(s): AppState, Path(code): Path<String>) -> Json<BTreeMap<String, String>> {
    Json(s.published(&code))
}

async fn data(State(s): AppState, Path(hash): Path<String>) -> Result<Response, GatewayError> {
    let bytes = blocking(move || {
        s.store
            .get_bytes(&hash)
            .map_err(|e| GatewayError::BadRequest(e.to_string()))?
            .ok_or(GatewayError::NotFound(hash))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn custom_functions(
    State(s): AppState,
    Query(q): Query<EndpointQuery>,
) -> ApiResult<Vec<RemoteFunction>> {
    let list = blocking(move || {
        s.remote
            .list(&q.endpoint)
            .map_err(|e| GatewayError::BadRequest(e.to_string()))
    })
    .await?;
    Ok(Json(list))
}

/// All routes; `static_dir`, when given, is served at `/`.
pub fn router(state: Arc<GatewayState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/nodes", get(nodes))
        .route("/api/device/request", post(request_connection))
        .route("/api/device/connect", post(connect))
        .route("/api/device/{key}/poll", get(poll))
        .route("/api/device/{key}/render", post(render))
        .route("/api/device/{key}/clear", post(clear))
        .route("/api/device/{key}/capture", post(capture))
        .route("/api/device/{key}/disconnect", post(disconnect))
        .route("/api/device/{key}/stream", post(open_stream))
        .route("/api/device/{key}/stream/close", post(close_stream))
        .route("/api/device/{key}/streams", get(stream_status))
        .route("/api/device/{key}/marker", post(marker))
        .route("/api/workspaces", get(list_workspaces))
        .route("/api/workspace", post(create_workspace))
        .route("/api/workspace/{code}", get(load_workspace))
        .route("/api/workspace/{code}/save", post(save_workspace))
        .route("/api/workspace/{code}/meta", get(workspace_meta))
        .route("/api/workspace/{code}/execute", post(execute_workspace))
        .route("/api/workspace/{code}/node/{id}/execute", post(execute_node))
        .route("/api/workspace/{code}/web", get(published))
        .route("/api/data/{hash}", get(data))
        .route("/api/custom/functions", get(custom_functions))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
