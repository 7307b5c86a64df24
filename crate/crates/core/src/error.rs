use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Machine-stable error codes shared by the server and the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    UntrustedOrigin,
    UnknownUser,
    UserLocked,
    ChainExhausted,
    TokenMismatch,
    TicketInvalid,
    DuplicateUser,
    InvalidCounter,
    BadDigest,
    BadRequest,
    /// Server-side failure (storage). Not produced by protocol checks.
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 11] = [
        ErrorCode::UntrustedOrigin,
        ErrorCode::UnknownUser,
        ErrorCode::UserLocked,
        ErrorCode::ChainExhausted,
        ErrorCode::TokenMismatch,
        ErrorCode::TicketInvalid,
        ErrorCode::DuplicateUser,
        ErrorCode::InvalidCounter,
        ErrorCode::BadDigest,
        ErrorCode::BadRequest,
        ErrorCode::Internal,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UntrustedOrigin => "UNTRUSTED_ORIGIN",
            ErrorCode::UnknownUser => "UNKNOWN_USER",
            ErrorCode::UserLocked => "USER_LOCKED",
            ErrorCode::ChainExhausted => "CHAIN_EXHAUSTED",
            ErrorCode::TokenMismatch => "TOKEN_MISMATCH",
            ErrorCode::TicketInvalid => "TICKET_INVALID",
            ErrorCode::DuplicateUser => "DUPLICATE_USER",
            ErrorCode::InvalidCounter => "INVALID_COUNTER",
            ErrorCode::BadDigest => "BAD_DIGEST",
            ErrorCode::BadRequest => "BAD_REQUEST",
            ErrorCode::Internal => "INTERNAL",
        }
    }

    /// HTTP status carried on the wire.
    pub const fn status(self) -> u16 {
        match self {
            ErrorCode::UntrustedOrigin => 403,
            ErrorCode::UnknownUser => 404,
            ErrorCode::DuplicateUser | ErrorCode::ChainExhausted => 409,
            ErrorCode::TokenMismatch | ErrorCode::TicketInvalid => 401,
            ErrorCode::UserLocked => 423,
            ErrorCode::BadRequest | ErrorCode::InvalidCounter | ErrorCode::BadDigest => 400,
            ErrorCode::Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown error code `{s}`"))
    }
}

/// An error as it travels over the wire: `{"error": CODE, "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{error}: {message}")]
pub struct ApiError {
    pub error: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            error: code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn code(&self) -> ErrorCode {
        self.error
    }
}
