//! Request and response bodies, and the error shape every endpoint shares.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use ugi_core::model::{Destination, TravelMode, Trip, SECONDS_PER_DAY};
use ugi_core::Error;

/// Codes a client may see. Core errors outside this set are folded into the
/// nearest member.
pub const WIRE_CODES: [&str; 11] = [
    "UNKNOWN_ID",
    "UNKNOWN_PERSON",
    "INVALID_TRIPS",
    "STALE_STEP",
    "UNKNOWN_CLIENT",
    "UNKNOWN_SUBSCRIPTION",
    "UNSUPPORTED_MODE",
    "PARSE_ERROR",
    "NO_ROUTE",
    "TRUNCATED",
    "CONTENT_TOO_LARGE",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

impl WireError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new("PARSE_ERROR", message)
    }

    pub fn status(&self) -> StatusCode {
        match self.code.as_str() {
            "UNKNOWN_ID" | "UNKNOWN_PERSON" | "UNKNOWN_CLIENT" | "UNKNOWN_SUBSCRIPTION" => StatusCode::NOT_FOUND,
            "STALE_STEP" => StatusCode::CONFLICT,
            "TRUNCATED" => StatusCode::GONE,
            "CONTENT_TOO_LARGE" => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}

pub fn wire_code(e: &Error) -> &'static str {
    match e {
        Error::UnknownEntity(_) => "UNKNOWN_ID",
        Error::NoRoad => "NO_ROUTE",
        Error::UnknownRelation(_) | Error::BadConfig(_) | Error::Schema(_) | Error::NoResidential | Error::Io(_) => {
            "PARSE_ERROR"
        }
        other => other.code(),
    }
}

impl From<Error> for WireError {
    fn from(e: Error) -> Self {
        Self::new(wire_code(&e), e.to_string())
    }
}

impl IntoResponse for WireError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

pub type WireResult<T> = Result<Json<T>, WireError>;

pub fn parse_id(s: &str) -> Result<u64, WireError> {
    s.parse().map_err(|_| WireError::parse(format!("'{s}' is not a decimal id")))
}

pub fn parse_body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, WireError> {
    serde_json::from_slice(bytes).map_err(|e| WireError::parse(format!("bad request body: {e}")))
}

/// Integer seconds since simulation midnight, or "HH:MM" on the current day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Seconds(i64),
    Clock(String),
}

impl TimeSpec {
    pub fn resolve(&self, current_day: i64) -> Result<i64, WireError> {
        match self {
            TimeSpec::Seconds(s) => Ok(*s),
            TimeSpec::Clock(s) => {
                let bad = || WireError::parse(format!("'{s}' is not a HH:MM time"));
                let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
                let h: i64 = h.parse().map_err(|_| bad())?;
                let m: i64 = m.parse().map_err(|_| bad())?;
                if !(0..24).contains(&h) || !(0..60).contains(&m) {
                    return Err(bad());
                }
                Ok(current_day * SECONDS_PER_DAY + h * 3600 + m * 60)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripBody {
    pub end: Destination,
    #[serde(alias = "depart_time")]
    pub depart: TimeSpec,
    pub mode: TravelMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetTripsBody {
    pub trips: Vec<TripBody>,
}

impl SetTripsBody {
    pub fn resolve(&self, current_day: i64) -> Result<Vec<Trip>, WireError> {
        self.trips
            .iter()
            .map(|t| Ok(Trip::new(t.end, t.depart.resolve(current_day)?, t.mode)))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Status {
    pub status: String,
}

impl Status {
    pub fn ok() -> Self {
        Self { status: "ok".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterBody {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Registered {
    pub client_id: u64,
    pub step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AckBody {
    pub step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AckReply {
    pub status: String,
    pub advanced: bool,
    pub new_step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubscribeBody {
    pub trigger: String,
    pub target_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Subscribed {
    pub sub_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NlBody {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageBody {
    pub sender: u64,
    /// Explicit recipients; ignored when `radius_m` is set.
    #[serde(default)]
    pub to: Vec<u64>,
    #[serde(default)]
    pub radius_m: Option<f64>,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageQueued {
    pub message_id: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_accept_both_forms() {
        assert_eq!(TimeSpec::Clock("09:20".into()).resolve(0).unwrap(), 33600);
        assert_eq!(TimeSpec::Clock("11:00".into()).resolve(2).unwrap(), 2 * 86400 + 39600);
        assert_eq!(TimeSpec::Seconds(123).resolve(5).unwrap(), 123);
        for bad in ["24:00", "9", "ab:cd", "10:60"] {
            assert_eq!(TimeSpec::Clock(bad.into()).resolve(0).unwrap_err().code, "PARSE_ERROR");
        }
    }

    #[test]
    fn trip_body_shapes() {
        let b: SetTripsBody = serde_json::from_str(
            r#"{"trips":[{"end":{"aoi":500000001},"depart":"09:20","mode":"drive"},
                         {"end":{"poi":7},"depart_time":39600,"mode":"walk"}]}"#,
        )
        .unwrap();
        let trips = b.resolve(0).unwrap();
        assert_eq!(trips[0].depart_time, 33600);
        assert_eq!(trips[1].end, Destination::Poi(ugi_core::model::PoiId(7)));
    }

    #[test]
    fn every_core_error_maps_into_the_wire_set() {
        let samples = [
            Error::Parse("x".into()),
            Error::NoRoad,
            Error::NoRoute,
            Error::UnsupportedMode("public_transport"),
            Error::UnknownId { kind: "AOI", id: 1 },
            Error::UnknownPerson(ugi_core::model::PersonId(1)),
            Error::InvalidTrips("x".into()),
            Error::StaleStep { got: 1, current: 2 },
            Error::UnknownClient(1),
            Error::UnknownSubscription(1),
            Error::ContentTooLarge(5000),
            Error::BadConfig("x".into()),
            Error::NoResidential,
            Error::UnknownEntity("x".into()),
            Error::UnknownRelation("x".into()),
        ];
        for e in samples {
            let code = wire_code(&e);
            assert!(WIRE_CODES.contains(&code), "{code}");
        }
    }
}
