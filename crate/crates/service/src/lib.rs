//! HTTP service exposing enrollment, one-to-one authentication, and
//! one-to-many identification over a banded index.
//!
//! Design constraints, in force across every handler:
//! * Reads run concurrently against an immutable index; the single writer
//!   (enroll) replaces the whole `(index, gallery)` pair under a write lock.
//! * A snapshot is persisted before an enrollment is acknowledged; if the
//!   write fails the served state does not change.
//! * No response body or log line contains a submitted vector or image.
//!   Handlers log person ids, versions, outcome kinds, and status codes only.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::header::AUTHORIZATION;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use emfv_core::{
    distance_to_mean, load_snapshot, load_weights, save_snapshot, BandedIndex, Decision, Error,
    Gallery, Network, Outcome, PersonId, Result,
};
use tokio::sync::RwLock;

pub mod config;
mod error;
mod payload;

pub use config::{MeanPolicySetting, ServiceConfig};
pub use error::ApiError;
pub use payload::{
    AuthenticateRequest, AuthenticateResponse, EnrollRequest, EnrollResponse, HealthResponse,
    IdentifyRequest, IdentifyResponse, MatchEntry, PersonSummary, PersonsResponse, SamplePayload,
};

use payload::{decode_sample, decode_samples};

pub struct ServiceState {
    config: ServiceConfig,
    network: Option<Network>,
    served: RwLock<Option<(BandedIndex, Gallery)>>,
}

impl ServiceState {
    /// Loads weights and any existing snapshot named by the config. A missing
    /// snapshot file means an empty service; a corrupt one refuses startup.
    pub fn initialize(config: ServiceConfig) -> Result<Self> {
        let network = match &config.weights {
            Some(path) => Some(load_weights(path)?),
            None => None,
        };
        let served = if config.snapshot.exists() {
            let loaded = load_snapshot(&config.snapshot)?;
            tracing::info!(
                persons = loaded.index.person_count(),
                version = loaded.index.version(),
                "restored index from snapshot"
            );
            Some((loaded.index, loaded.gallery))
        } else {
            None
        };
        Ok(Self {
            config,
            network,
            served: RwLock::new(served),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/enroll", post(enroll))
        .route("/v1/authenticate", post(authenticate))
        .route("/v1/identify", post(identify))
        .route("/v1/persons", get(persons))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .with_state(state)
}

/// Binds the configured address and serves until the process is stopped.
pub async fn run(config: ServiceConfig) -> Result<()> {
    let state = Arc::new(ServiceState::initialize(config)?);
    let listener = tokio::net::TcpListener::bind(&state.config.addr)
        .await
        .map_err(Error::Io)?;
    tracing::info!(addr = %state.config.addr, "listening");
    axum::serve(listener, router(state))
        .await
        .map_err(Error::Io)
}

/// [`run`] on a fresh multi-thread runtime, for callers that are not async.
pub fn serve_blocking(config: ServiceConfig) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Error::Io)?;
    runtime.block_on(run(config))
}

fn check_token(headers: &HeaderMap, config: &ServiceConfig) -> std::result::Result<(), ApiError> {
    let Some(expected) = config.token.as_deref() else {
        return Err(ApiError::unauthorized(
            "no operator token is configured; enrollment is disabled",
        ));
    };
    let supplied = headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match supplied {
        Some(token) if token == expected => Ok(()),
        _ => Err(ApiError::unauthorized("missing or invalid bearer token")),
    }
}

/// Maps a body-parse rejection without echoing any part of the body.
fn reject_body(_: JsonRejection) -> ApiError {
    ApiError::bad_request("request body is not a valid JSON document for this endpoint")
}

fn parse_person(id: String) -> std::result::Result<PersonId, ApiError> {
    if id.is_empty() {
        return Err(ApiError::bad_request("person_id must be non-empty"));
    }
    PersonId::new(id).map_err(ApiError::from)
}

async fn enroll(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    body: std::result::Result<Json<EnrollRequest>, JsonRejection>,
) -> std::result::Result<Json<EnrollResponse>, ApiError> {
    check_token(&headers, &state.config)?;
    let Json(request) = body.map_err(reject_body)?;
    let person = parse_person(request.person_id)?;
    if request.samples.is_empty() {
        return Err(ApiError::bad_request(
            "enrollment needs at least one sample",
        ));
    }
    let samples = decode_samples(&request.samples, state.network.as_ref())?;

    let mut served = state.served.write().await;
    let (next_index, next_gallery) = match served.as_ref() {
        Some((index, gallery)) => index.enroll(
            gallery,
            person.clone(),
            &samples,
            state.config.mean_policy.policy(),
        )?,
        None => {
            let mut gallery = Gallery::new(samples[0].dimension());
            for sample in &samples {
                gallery.insert(person.clone(), sample.clone())?;
            }
            let index =
                BandedIndex::build_with(&gallery, state.config.margin, state.config.tie_tolerance)?;
            (index, gallery)
        }
    };

    save_snapshot(&next_index, &next_gallery, &state.config.snapshot)?;

    let band = next_index.band_of(&person).ok_or_else(|| {
        ApiError::from(Error::InvariantViolation(
            "enrollment produced no band for the new person".into(),
        ))
    })?;
    let response = EnrollResponse {
        version: next_index.version(),
        band: [band.low(), band.high()],
    };
    tracing::info!(
        person = person.as_str(),
        version = response.version,
        "enrolled"
    );
    *served = Some((next_index, next_gallery));
    Ok(Json(response))
}

async fn authenticate(
    State(state): State<Arc<ServiceState>>,
    body: std::result::Result<Json<AuthenticateRequest>, JsonRejection>,
) -> std::result::Result<Json<AuthenticateResponse>, ApiError> {
    let Json(request) = body.map_err(reject_body)?;
    let person = parse_person(request.person_id)?;
    let probe = decode_sample(&request.probe, state.network.as_ref())?;

    let served = state.served.read().await;
    let Some((index, _)) = served.as_ref() else {
        return Err(Error::UnknownPerson(person).into());
    };
    let decision = index.authenticate(&person, &probe)?;
    let distance = distance_to_mean(index.mean(), &probe)?;
    let decision = match decision {
        Decision::Accept => "accept",
        Decision::Reject => "reject",
    };
    tracing::info!(person = person.as_str(), decision, "authenticate");
    Ok(Json(AuthenticateResponse {
        decision,
        distance,
        index_version: index.version(),
    }))
}

async fn identify(
    State(state): State<Arc<ServiceState>>,
    body: std::result::Result<Json<IdentifyRequest>, JsonRejection>,
) -> std::result::Result<Json<IdentifyResponse>, ApiError> {
    let Json(request) = body.map_err(reject_body)?;
    let probe = decode_sample(&request.probe, state.network.as_ref())?;

    let served = state.served.read().await;
    let Some((index, _)) = served.as_ref() else {
        tracing::info!(outcome = "empty_index", "identify");
        return Ok(Json(IdentifyResponse {
            index_version: 0,
            outcome: "empty_index",
            distance_to_mean: None,
            matches: Vec::new(),
            tie: None,
        }));
    };
    let result = index.classify(&probe)?;
    let matches = index
        .identify_distance(result.distance_to_mean, request.max_neighbors)
        .into_iter()
        .map(|n| MatchEntry {
            person: n.person.as_str().to_string(),
            interval_distance: n.interval_distance,
        })
        .collect();
    let (outcome, tie) = match &result.outcome {
        Outcome::InBand(_) => ("in_band", None),
        Outcome::NearestBand { .. } => ("nearest_band", None),
        Outcome::AmbiguousTie(a, b) => (
            "ambiguous_tie",
            Some([a.as_str().to_string(), b.as_str().to_string()]),
        ),
        Outcome::EmptyIndex => ("empty_index", None),
    };
    tracing::info!(outcome, version = index.version(), "identify");
    Ok(Json(IdentifyResponse {
        index_version: index.version(),
        outcome,
        distance_to_mean: Some(result.distance_to_mean),
        matches,
        tie,
    }))
}

async fn persons(State(state): State<Arc<ServiceState>>) -> Json<PersonsResponse> {
    let served = state.served.read().await;
    let (index_version, dimension, persons) = match served.as_ref() {
        Some((index, _)) => (
            index.version(),
            Some(index.dimension()),
            index
                .bands()
                .iter()
                .map(|b| PersonSummary {
                    id: b.person().as_str().to_string(),
                    band: [b.low(), b.high()],
                })
                .collect(),
        ),
        None => (0, None, Vec::new()),
    };
    Json(PersonsResponse {
        index_version,
        dimension,
        persons,
    })
}

async fn health(State(state): State<Arc<ServiceState>>) -> Json<HealthResponse> {
    let served = state.served.read().await;
    let (index_version, persons, dimension) = match served.as_ref() {
        Some((index, _)) => (
            index.version(),
            index.person_count(),
            Some(index.dimension()),
        ),
        None => (0, 0, None),
    };
    Json(HealthResponse {
        status: "ok",
        index_version,
        persons,
        dimension,
        feature_network: state.network.is_some(),
    })
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}
