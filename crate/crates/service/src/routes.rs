use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sensiloop_core::model::{from_bytes, to_bytes};
use sensiloop_core::session::{
    BalanceTarget, EvaluateRequest, ExplainRequest, FeatureConfig, GsaInput, GsaRequest, JobKind, PlotRequest,
    TrainRequest, UploadRequest,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::OwnedMutexGuard;

use crate::error::ApiError;
use crate::state::{AppState, Slot};
use crate::SCHEMA_VERSION;

/// JSON body whose rejections become 400 responses.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

type ApiResult = Result<Response, ApiError>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{sid}", get(get_session))
        .route("/sessions/{sid}/dataset", post(upload_dataset).get(get_dataset))
        .route("/sessions/{sid}/features", post(configure_features))
        .route("/sessions/{sid}/balance", post(balance))
        .route("/sessions/{sid}/correlation", get(correlation))
        .route("/sessions/{sid}/models", get(list_models).post(upload_model))
        .route("/sessions/{sid}/models/train", post(train_model))
        .route("/sessions/{sid}/models/{mid}/file", get(download_model))
        .route("/sessions/{sid}/evaluate", post(evaluate))
        .route("/sessions/{sid}/evaluation", get(get_evaluation))
        .route("/sessions/{sid}/plot", get(get_plot))
        .route("/sessions/{sid}/gsa", get(get_gsa).post(start_gsa))
        .route("/sessions/{sid}/explain", post(explain_sample))
        .route("/jobs/{jid}", get(get_job));
    Router::new().nest("/api/v1", api).with_state(state)
}

/// `{schema_version, revision, ...body}` with the given status.
fn reply(status: StatusCode, revision: u64, body: Value) -> Response {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    obj.insert("revision".into(), revision.into());
    if let Value::Object(m) = body {
        obj.extend(m);
    }
    (status, Json(Value::Object(obj))).into_response()
}

fn ok(revision: u64, body: Value) -> ApiResult {
    Ok(reply(StatusCode::OK, revision, body))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload types serialize")
}

/// Maps a core error, stamping the session's current revision.
fn fail(slot: &Slot) -> impl FnOnce(sensiloop_core::Error) -> ApiError + '_ {
    move |e| ApiError::from(e).at(slot.revision())
}

/// Body that may be omitted; an empty body means the defaults.
fn optional_body<T: serde::de::DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    seed: Option<u64>,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateSession = optional_body(&body)?;
    let (id, slot) = app.create_session(req.seed)?;
    let seed = slot.read().seed;
    Ok(reply(StatusCode::CREATED, slot.revision(), json!({ "session_id": id, "seed": seed })))
}

async fn get_session(State(app): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let saved = slot.saved_features.read().unwrap_or_else(|e| e.into_inner()).clone();
    ok(
        s.revision(),
        json!({
            "session_id": s.id,
            "seed": s.seed,
            "dataset": s.dataset_summary().ok(),
            "features": s.prepared().ok().map(|p| to_value(&p.config)),
            "saved_features": saved,
            "models": s.list_models(),
            "best_model_id": s.evaluation().ok().map(|r| r.best_model_id.clone()),
            "has_gsa": s.gsa().is_ok(),
        }),
    )
}

async fn upload_dataset(State(app): State<AppState>, Path(sid): Path<String>, Body(req): Body<UploadRequest>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let _guard = app.begin_mutation(&slot).await?;
    let s2 = slot.clone();
    let summary = blocking(move || s2.write().upload_dataset(&req)).await?.map_err(fail(&slot))?;
    ok(slot.revision(), json!({ "dataset": summary }))
}

async fn get_dataset(State(app): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let summary = s.dataset_summary().map_err(|e| ApiError::from(e).at(s.revision()))?;
    ok(s.revision(), json!({ "dataset": summary }))
}

async fn configure_features(
    State(app): State<AppState>,
    Path(sid): Path<String>,
    Body(req): Body<FeatureConfig>,
) -> ApiResult {
    let slot = app.slot(&sid)?;
    let _guard = app.begin_mutation(&slot).await?;
    let (s2, cfg) = (slot.clone(), req.clone());
    let summary = blocking(move || s2.write().configure_features(&cfg)).await?.map_err(fail(&slot))?;
    app.persist_features(&sid, &req)?;
    *slot.saved_features.write().unwrap_or_else(|e| e.into_inner()) = Some(req);
    ok(slot.revision(), json!({ "features": summary }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BalanceBody {
    features: Vec<BalanceTarget>,
}

async fn balance(State(app): State<AppState>, Path(sid): Path<String>, Body(req): Body<BalanceBody>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let report = s.balance(&req.features).map_err(|e| ApiError::from(e).at(s.revision()))?;
    ok(s.revision(), json!({ "balance": report }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationQuery {
    threshold: Option<f64>,
}

async fn correlation(
    State(app): State<AppState>,
    Path(sid): Path<String>,
    q: Result<Query<CorrelationQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(q) = q?;
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let report = s.correlation(q.threshold).map_err(|e| ApiError::from(e).at(s.revision()))?;
    let warnings = report.warnings();
    ok(s.revision(), json!({ "correlation": report, "warnings": warnings }))
}

async fn list_models(State(app): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    ok(s.revision(), json!({ "models": s.list_models() }))
}

async fn upload_model(State(app): State<AppState>, Path(sid): Path<String>, bytes: Bytes) -> ApiResult {
    let slot = app.slot(&sid)?;
    let _guard = app.begin_mutation(&slot).await?;
    let model = from_bytes(&bytes).map_err(fail(&slot))?;
    let id = slot.write().add_model(model);
    let stored = slot.read().model(&id).cloned();
    let stored = stored.map_err(fail(&slot))?;
    app.persist_model(&sid, &id, &stored)?;
    Ok(reply(StatusCode::CREATED, slot.revision(), json!({ "model_id": id })))
}

async fn download_model(State(app): State<AppState>, Path((sid, mid)): Path<(String, String)>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let (model, revision) = {
        let s = slot.read();
        (s.model(&mid).map_err(|e| ApiError::from(e).at(s.revision()))?.clone(), s.revision())
    };
    let bytes = to_bytes(&model).map_err(fail(&slot))?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{mid}.model\"")),
            (header::HeaderName::from_static("x-session-revision"), revision.to_string()),
        ],
        bytes,
    )
        .into_response())
}

async fn train_model(State(app): State<AppState>, Path(sid): Path<String>, Body(req): Body<TrainRequest>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let guard = app.begin_mutation(&slot).await?;
    let input = slot.read().training_input(&req).map_err(fail(&slot))?;
    let job_id = app.new_job(&sid, JobKind::Train);
    let (app2, slot2, jid) = (app.clone(), slot.clone(), job_id.clone());
    tokio::spawn(async move {
        let _guard = guard;
        app2.update_job(&jid, |j| j.start());
        let outcome = match blocking(move || input.run()).await {
            Ok(Ok(model)) => {
                let id = slot2.write().add_model(model);
                let model = slot2.read().model(&id).cloned();
                match model.map_err(ApiError::from).and_then(|m| app2.persist_model(&sid, &id, &m)) {
                    Ok(()) => Ok(json!({ "model_id": id, "revision": slot2.revision() })),
                    Err(e) => Err(e.message),
                }
            }
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(e.message),
        };
        app2.finish_job(&jid, outcome);
    });
    Ok(reply(StatusCode::ACCEPTED, slot.revision(), json!({ "job_id": job_id })))
}

/// Runs GSA on a background task; the mutation token is released when done.
fn spawn_gsa(app: &AppState, sid: &str, slot: Arc<Slot>, input: GsaInput, guard: OwnedMutexGuard<()>) -> String {
    let job_id = app.new_job(sid, JobKind::Gsa);
    let (app2, jid) = (app.clone(), job_id.clone());
    tokio::spawn(async move {
        let _guard = guard;
        app2.update_job(&jid, |j| j.start());
        let model_id = input.model_id.clone();
        let outcome = match blocking(move || input.run().map(|r| (input, r))).await {
            Ok(Ok((input, result))) => {
                let body = json!({ "model_id": model_id, "result": result });
                match slot.write().set_gsa(&input, result) {
                    Ok(()) => Ok(body),
                    Err(e) => Err(e.to_string()),
                }
            }
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(e.message),
        };
        app2.finish_job(&jid, outcome);
    });
    job_id
}

async fn evaluate(State(app): State<AppState>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let req: EvaluateRequest = optional_body(&body)?;
    let slot = app.slot(&sid)?;
    let guard = app.begin_mutation(&slot).await?;
    let s2 = slot.clone();
    let report = blocking(move || s2.write().evaluate(&req)).await?.map_err(fail(&slot))?;
    let revision = slot.revision();
    // GSA on the best model starts right after selection
    let input = slot.read().gsa_input(&GsaRequest::default()).map_err(fail(&slot))?;
    let gsa_job = spawn_gsa(&app, &sid, slot.clone(), input, guard);
    ok(revision, json!({ "report": report, "gsa_job_id": gsa_job }))
}

async fn get_evaluation(State(app): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let report = s.evaluation().map_err(|e| ApiError::from(e).at(s.revision()))?;
    ok(s.revision(), json!({ "report": report, "error_csv": report.to_csv() }))
}

async fn start_gsa(State(app): State<AppState>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let req: GsaRequest = optional_body(&body)?;
    let slot = app.slot(&sid)?;
    let guard = app.begin_mutation(&slot).await?;
    let input = slot.read().gsa_input(&req).map_err(fail(&slot))?;
    let job_id = spawn_gsa(&app, &sid, slot.clone(), input, guard);
    Ok(reply(StatusCode::ACCEPTED, slot.revision(), json!({ "job_id": job_id })))
}

async fn get_gsa(State(app): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s = slot.read();
    let result = s.gsa().map_err(|e| ApiError::from(e).at(s.revision()))?;
    ok(s.revision(), json!({ "result": result, "csv": result.to_csv() }))
}

async fn get_plot(
    State(app): State<AppState>,
    Path(sid): Path<String>,
    q: Result<Query<PlotRequest>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(req) = q?;
    let slot = app.slot(&sid)?;
    let s2 = slot.clone();
    let plot = blocking(move || s2.read().plot(&req)).await?.map_err(fail(&slot))?;
    ok(slot.revision(), json!({ "plot": plot }))
}

async fn explain_sample(State(app): State<AppState>, Path(sid): Path<String>, Body(req): Body<ExplainRequest>) -> ApiResult {
    let slot = app.slot(&sid)?;
    let s2 = slot.clone();
    let explanation = blocking(move || s2.read().explain(&req)).await?.map_err(fail(&slot))?;
    ok(slot.revision(), json!({ "explanation": explanation }))
}

async fn get_job(State(app): State<AppState>, Path(jid): Path<String>) -> ApiResult {
    let (sid, job) = app.job(&jid)?;
    let revision = app.slot(&sid).map(|s| s.revision()).unwrap_or(0);
    ok(revision, json!({ "session_id": sid, "job": job }))
}
