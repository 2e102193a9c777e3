//! Repository data acquisition: CSV datasets and the GitHub REST API.

mod dataset;
mod error;
mod github;
mod transport;

pub use dataset::{
    load_dataset, read_dataset, write_dataset, ColumnMapping, ParseReport, RowRejection,
    OPTIONAL_COLUMNS, REQUIRED_COLUMNS,
};
pub use error::{IngestError, Result};
pub use github::{
    fetch_comment_counts, fetch_repository, parse_link_header, query_param, set_query_param,
    ApiSession, Clock, Link, RateBudget, RateLimitPolicy, RetryPolicy, SystemClock, Token,
    PER_PAGE, TOKEN_ENV,
};
pub use transport::{
    Cassette, HttpResponse, Interaction, RecordingTransport, ReplayTransport, Transport,
    UreqTransport, GITHUB_API,
};
