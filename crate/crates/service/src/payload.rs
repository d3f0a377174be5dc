//! Request and response bodies.
//!
//! A sample (enrollment input or probe) carries exactly one of:
//! * `vector` — a feature vector, used as-is;
//! * `image` — a base64-encoded binary PGM, routed through the trained
//!   network and L2-normalized, exactly like the offline extraction path.
//!
//! Responses carry outcomes, distances, person ids, and band endpoints.
//! No response type has a field that could hold a submitted vector or image.

use base64::Engine;
use emfv_core::{normalize, FeatureVector, Network, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePayload {
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
    #[serde(default)]
    pub image: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollRequest {
    pub person_id: String,
    pub samples: Vec<SamplePayload>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthenticateRequest {
    pub person_id: String,
    pub probe: SamplePayload,
}

fn default_max_neighbors() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyRequest {
    pub probe: SamplePayload,
    #[serde(default = "default_max_neighbors")]
    pub max_neighbors: usize,
}

#[derive(Debug, Serialize)]
pub struct EnrollResponse {
    pub version: u64,
    pub band: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct AuthenticateResponse {
    pub decision: &'static str,
    pub distance: f64,
    pub index_version: u64,
}

#[derive(Debug, Serialize)]
pub struct MatchEntry {
    pub person: String,
    pub interval_distance: f64,
}

#[derive(Debug, Serialize)]
pub struct IdentifyResponse {
    pub index_version: u64,
    pub outcome: &'static str,
    pub distance_to_mean: Option<f64>,
    pub matches: Vec<MatchEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie: Option<[String; 2]>,
}

#[derive(Debug, Serialize)]
pub struct PersonSummary {
    pub id: String,
    pub band: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct PersonsResponse {
    pub index_version: u64,
    pub dimension: Option<usize>,
    pub persons: Vec<PersonSummary>,
}

#[derive(Debug, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub index_version: u64,
    pub persons: usize,
    pub dimension: Option<usize>,
    pub feature_network: bool,
}

/// Turns one payload into a feature vector, extracting through the network
/// for image payloads. Image-derived vectors are L2-normalized to match the
/// offline extraction pipeline; raw vectors are trusted as already extracted.
pub fn decode_sample(
    payload: &SamplePayload,
    network: Option<&Network>,
) -> Result<FeatureVector, ApiError> {
    match (&payload.vector, &payload.image) {
        (Some(values), None) => FeatureVector::new(values.clone()).map_err(ApiError::from_payload),
        (None, Some(encoded)) => {
            let net = network.ok_or_else(ApiError::network_unavailable)?;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(encoded)
                .map_err(|_| ApiError::bad_request("image is not valid base64"))?;
            let (pixels, height, width) =
                emfv_core::pgm::decode_pgm(&bytes).map_err(ApiError::from_payload)?;
            let tensor =
                Tensor::from_grayscale(&pixels, height, width).map_err(ApiError::from_payload)?;
            let features = net
                .extract_features(&tensor)
                .map_err(ApiError::from_payload)?;
            normalize(&features).map_err(ApiError::from_payload)
        }
        _ => Err(ApiError::bad_request(
            "sample must carry exactly one of: vector, image",
        )),
    }
}

pub fn decode_samples(
    payloads: &[SamplePayload],
    network: Option<&Network>,
) -> Result<Vec<FeatureVector>, ApiError> {
    let mut out = Vec::with_capacity(payloads.len());
    for p in payloads {
        out.push(decode_sample(p, network)?);
    }
    Ok(out)
}
