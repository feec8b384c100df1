use thiserror::Error;

use crate::model::PersonId;
use crate::validate::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(String),
    #[error("map failed validation with {} error(s)", .0.errors().count())]
    Schema(ValidationReport),
    #[error("no road satisfies the mode filter")]
    NoRoad,
    #[error("no route between origin and destination")]
    NoRoute,
    #[error("mode {0} is not supported")]
    UnsupportedMode(&'static str),
    #[error("no {kind} {id}")]
    UnknownId { kind: &'static str, id: u64 },
    #[error("no person {0}")]
    UnknownPerson(PersonId),
    #[error("invalid trips: {0}")]
    InvalidTrips(String),
    #[error("ack for step {got} but the clock is at {current}")]
    StaleStep { got: u64, current: u64 },
    #[error("no client {0}")]
    UnknownClient(u64),
    #[error("no subscription {0}")]
    UnknownSubscription(u64),
    #[error("message content is {0} bytes, limit is 4096")]
    ContentTooLarge(usize),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("map has no residential AOI")]
    NoResidential,
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, shared with the wire protocol.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse(_) => "PARSE_ERROR",
            Error::Schema(_) => "SCHEMA_ERROR",
            Error::NoRoad => "NO_ROAD",
            Error::NoRoute => "NO_ROUTE",
            Error::UnsupportedMode(_) => "UNSUPPORTED_MODE",
            Error::UnknownId { .. } => "UNKNOWN_ID",
            Error::UnknownPerson(_) => "UNKNOWN_PERSON",
            Error::InvalidTrips(_) => "INVALID_TRIPS",
            Error::StaleStep { .. } => "STALE_STEP",
            Error::UnknownClient(_) => "UNKNOWN_CLIENT",
            Error::UnknownSubscription(_) => "UNKNOWN_SUBSCRIPTION",
            Error::ContentTooLarge(_) => "CONTENT_TOO_LARGE",
            Error::BadConfig(_) => "BAD_CONFIG",
            Error::NoResidential => "NO_RESIDENTIAL",
            Error::UnknownEntity(_) => "UNKNOWN_ENTITY",
            Error::UnknownRelation(_) => "UNKNOWN_RELATION",
            Error::Io(_) => "IO_ERROR",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
