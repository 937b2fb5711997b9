use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("provider returned HTTP {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("rate limited; gave up after {retries} retries")]
    RateLimited { retries: u32 },
    #[error("no recorded response for cache key {0}")]
    ReplayMiss(String),
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("environment variable `{0}` with the API key is not set")]
    MissingCredentials(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("message list is empty")]
    EmptyMessages,
    #[error("text to embed is empty")]
    EmptyText,
    #[error("text of {chars} characters exceeds the {limit}-character input limit of `{model_id}`")]
    TextTooLong { model_id: String, chars: usize, limit: usize },
    #[error("malformed provider response: {0}")]
    Decode(String),
    #[error("cache I/O failed: {0}")]
    Cache(String),
}

impl GatewayError {
    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::ProviderError { .. } => "ProviderError",
            GatewayError::RateLimited { .. } => "RateLimited",
            GatewayError::ReplayMiss(_) => "ReplayMiss",
            GatewayError::Timeout => "Timeout",
            GatewayError::Connection(_) => "Connection",
            GatewayError::MissingCredentials(_) => "MissingCredentials",
            GatewayError::InvalidConfig(_) => "InvalidConfig",
            GatewayError::EmptyMessages => "EmptyMessages",
            GatewayError::EmptyText => "EmptyText",
            GatewayError::TextTooLong { .. } => "TextTooLong",
            GatewayError::Decode(_) => "Decode",
            GatewayError::Cache(_) => "Cache",
        }
    }
}

impl From<std::io::Error> for GatewayError {
    fn from(e: std::io::Error) -> Self {
        GatewayError::Cache(e.to_string())
    }
}
