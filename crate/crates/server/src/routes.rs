//! HTTP endpoints.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use ugi_core::events::Trigger;
use ugi_core::flows::Recipients;
use ugi_core::kg::{parse_hop, Dir, Entity};
use ugi_core::model::{AoiId, PersonId, RoadId};
use ugi_core::nl::{self, CityApi};
use ugi_core::snapshot::Clock;

use crate::state::Shared;
use crate::wire::*;

type App = State<Arc<Shared>>;

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/clock", get(clock))
        .route("/summary", get(summary))
        .route("/aois/{id}", get(aoi))
        .route("/roads/{id}", get(road))
        .route("/persons/{id}", get(person))
        .route("/persons/{id}/trips", post(set_trips))
        .route("/persons/{id}/messages", get(inbox))
        .route("/messages", post(send_message))
        .route("/clients", get(list_clients).post(register))
        .route("/clients/{id}", axum::routing::delete(unregister))
        .route("/clients/{id}/ack", post(ack))
        .route("/subscriptions", post(subscribe))
        .route("/subscriptions/{id}", axum::routing::delete(unsubscribe))
        .route("/subscriptions/{id}/events", get(events))
        .route("/subscriptions/{id}/stream", get(stream))
        .route("/kg/{kind}/{id}/{relation}", get(kg_query))
        .route("/nl", post(nl_command))
        .fallback(not_found)
        .method_not_allowed_fallback(not_allowed)
        .with_state(shared)
}

async fn not_found(method: Method, uri: Uri) -> WireError {
    WireError::new("UNKNOWN_ID", format!("no endpoint {method} {}", uri.path()))
}

async fn not_allowed(method: Method, uri: Uri) -> Response {
    let e = WireError::parse(format!("method {method} not allowed on {}", uri.path()));
    (StatusCode::METHOD_NOT_ALLOWED, Json(e)).into_response()
}

async fn clock(State(s): App) -> Json<Clock> {
    Json(s.snapshot().clock())
}

async fn summary(State(s): App) -> Json<Value> {
    let e = s.engine();
    Json(json!({ "step": e.step(), "summary": e.summary(), "warnings": e.warnings() }))
}

async fn aoi(State(s): App, Path(id): Path<String>) -> Result<Json<Value>, WireError> {
    let a = s.get_aoi(AoiId(parse_id(&id)?))?;
    Ok(Json(serde_json::to_value(a).expect("runtime view serializes")))
}

async fn road(State(s): App, Path(id): Path<String>) -> Result<Json<Value>, WireError> {
    let r = s.get_road(RoadId(parse_id(&id)?))?;
    Ok(Json(serde_json::to_value(r).expect("runtime view serializes")))
}

async fn person(State(s): App, Path(id): Path<String>) -> Result<Json<Value>, WireError> {
    let p = s.get_person(PersonId(parse_id(&id)?))?;
    Ok(Json(serde_json::to_value(p).expect("runtime view serializes")))
}

async fn set_trips(State(s): App, Path(id): Path<String>, body: Bytes) -> WireResult<Status> {
    let person = PersonId(parse_id(&id)?);
    let body: SetTripsBody = parse_body(&body)?;
    let mut e = s.engine();
    let trips = body.resolve(e.current_day())?;
    e.submit_control(person, trips)?;
    Ok(Json(Status::ok()))
}

async fn inbox(State(s): App, Path(id): Path<String>) -> Result<Json<Value>, WireError> {
    let person = PersonId(parse_id(&id)?);
    let e = s.engine();
    e.world().person_index(person)?;
    Ok(Json(json!({ "messages": e.messages().inbox(person), "step": e.step() })))
}

async fn send_message(State(s): App, body: Bytes) -> WireResult<MessageQueued> {
    let body: MessageBody = parse_body(&body)?;
    let targets = match body.radius_m {
        Some(r) if r.is_finite() && r >= 0.0 => Recipients::Radius(r),
        Some(r) => return Err(WireError::parse(format!("radius {r} must be a non-negative number"))),
        None => Recipients::Persons(body.to.into_iter().map(PersonId).collect()),
    };
    let message_id = s.engine().queue_message(PersonId(body.sender), targets, body.content)?;
    Ok(Json(MessageQueued { message_id }))
}

async fn list_clients(State(s): App) -> Json<Value> {
    let e = s.engine();
    Json(json!({ "clients": e.clients(), "step": e.step() }))
}

async fn register(State(s): App, body: Bytes) -> WireResult<Registered> {
    let body: RegisterBody = parse_body(&body)?;
    let timeout = match body.timeout_s {
        Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(WireError::parse(format!("timeout_s {t} must be positive"))),
        None => None,
    };
    let mut e = s.engine();
    let client_id = e.register_client(&body.name, timeout, std::time::Instant::now());
    Ok(Json(Registered { client_id, step: e.step() }))
}

async fn unregister(State(s): App, Path(id): Path<String>) -> WireResult<Status> {
    s.engine().unregister_client(parse_id(&id)?)?;
    Ok(Json(Status::ok()))
}

async fn ack(State(s): App, Path(id): Path<String>, body: Bytes) -> WireResult<AckReply> {
    let client = parse_id(&id)?;
    let body: AckBody = parse_body(&body)?;
    let out = tokio::task::spawn_blocking(move || s.ack(client, body.step))
        .await
        .map_err(|e| WireError::parse(format!("ack task failed: {e}")))??;
    Ok(Json(AckReply {
        status: "ok".into(),
        advanced: out.advanced,
        new_step: out.new_step,
    }))
}

async fn subscribe(State(s): App, body: Bytes) -> WireResult<Subscribed> {
    let body: SubscribeBody = parse_body(&body)?;
    let trigger: Trigger = body.trigger.parse()?;
    let sub_id = s.engine().subscribe(trigger, body.target_id)?;
    Ok(Json(Subscribed { sub_id }))
}

async fn unsubscribe(State(s): App, Path(id): Path<String>) -> WireResult<Status> {
    s.engine().unsubscribe(parse_id(&id)?)?;
    Ok(Json(Status::ok()))
}

fn query_u64(q: &HashMap<String, String>, key: &str) -> Result<Option<u64>, WireError> {
    q.get(key)
        .map(|v| v.parse().map_err(|_| WireError::parse(format!("{key}={v} is not an integer"))))
        .transpose()
}

/// Long-poll: waits up to `wait_ms` for at least one event.
async fn events(State(s): App, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Result<Json<Value>, WireError> {
    let sub = parse_id(&id)?;
    let since = query_u64(&q, "since_seq")?.unwrap_or(0);
    let wait = Duration::from_millis(query_u64(&q, "wait_ms")?.unwrap_or(0).min(60_000));
    let deadline = tokio::time::Instant::now() + wait;
    let mut steps = s.subscribe_steps();
    loop {
        let (drain, step) = {
            let e = s.engine();
            (e.drain_events(sub, since)?, e.step())
        };
        let waited_out = tokio::time::Instant::now() >= deadline;
        if !drain.events.is_empty() || drain.truncated || waited_out {
            let last_seq = drain.events.last().map_or(since, |e| e.seq);
            return Ok(Json(json!({
                "events": drain.events,
                "truncated": drain.truncated,
                "last_seq": last_seq,
                "step": step,
            })));
        }
        if tokio::time::timeout_at(deadline, steps.changed()).await.is_ok_and(|r| r.is_err()) {
            // sender gone: the server is shutting down
            return Err(WireError::parse("server shutting down"));
        }
    }
}

struct StreamState {
    shared: Arc<Shared>,
    sub: u64,
    cursor: u64,
    steps: tokio::sync::watch::Receiver<u64>,
    pending: VecDeque<Bytes>,
    done: bool,
}

fn ndjson_line<T: serde::Serialize>(v: &T) -> Bytes {
    let mut buf = serde_json::to_vec(v).expect("event serializes");
    buf.push(b'\n');
    Bytes::from(buf)
}

/// Held response carrying one JSON event per line, in seq order.
async fn stream(State(s): App, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Result<Response, WireError> {
    let sub = parse_id(&id)?;
    let since = query_u64(&q, "since_seq")?.unwrap_or(0);
    s.engine().drain_events(sub, u64::MAX)?;
    let state = StreamState {
        steps: s.subscribe_steps(),
        shared: s,
        sub,
        cursor: since,
        pending: VecDeque::new(),
        done: false,
    };
    let body = futures::stream::unfold(state, |mut st| async move {
        loop {
            if let Some(line) = st.pending.pop_front() {
                return Some((Ok::<_, std::io::Error>(line), st));
            }
            if st.done {
                return None;
            }
            let drained = st.shared.engine().drain_events(st.sub, st.cursor);
            match drained {
                Ok(d) => {
                    if d.truncated {
                        st.pending.push_back(ndjson_line(&WireError::new(
                            "TRUNCATED",
                            format!("events after seq {} were evicted", st.cursor),
                        )));
                    }
                    for ev in &d.events {
                        st.pending.push_back(ndjson_line(ev));
                    }
                    if let Some(last) = d.events.last() {
                        st.cursor = last.seq;
                    }
                }
                Err(e) => {
                    st.pending.push_back(ndjson_line(&WireError::from(e)));
                    st.done = true;
                }
            }
            if st.pending.is_empty() {
                if st.shared.stopped() {
                    return None;
                }
                let tick = tokio::time::sleep(Duration::from_millis(250));
                tokio::select! {
                    changed = st.steps.changed() => if changed.is_err() { return None },
                    _ = tick => {}
                }
            }
        }
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(body)).into_response())
}

async fn kg_query(
    State(s): App,
    Path((kind, id, relation)): Path<(String, String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, WireError> {
    let entity = Entity::parse(&kind, &id)?;
    let (rel, mut dir) = parse_hop(&relation)?;
    match q.get("dir").map(String::as_str) {
        None | Some("out") => {}
        Some("in") => {
            dir = match dir {
                Dir::Out => Dir::In,
                Dir::In => Dir::Out,
            }
        }
        Some(other) => return Err(WireError::parse(format!("dir={other}, expected in or out"))),
    }
    let entities = s.kg().query_relation(&entity, rel, dir)?;
    Ok(Json(json!({ "entity": entity, "relation": rel.as_str(), "entities": entities })))
}

async fn nl_command(State(s): App, body: Bytes) -> WireResult<NlBody> {
    let body: NlBody = parse_body(&body)?;
    let text = tokio::task::spawn_blocking(move || nl::respond(&body.text, s.as_ref()))
        .await
        .map_err(|e| WireError::parse(format!("nl task failed: {e}")))?;
    Ok(Json(NlBody { text }))
}
