//! HTTP transports: a live client and a record/replay layer for offline runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-cased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .get(&name.to_ascii_lowercase())
            .map(String::as_str)
    }
}

/// Issues a GET for a path relative to the API root (e.g. `/repos/o/r?page=2`).
/// Errors are transport-level failures only; HTTP error statuses are returned
/// as responses.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str, token: Option<&str>) -> Result<HttpResponse>;
}

pub const GITHUB_API: &str = "https://api.github.com";

pub struct UreqTransport {
    agent: ureq::Agent,
    base_url: String,
}

impl UreqTransport {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("ce-analytics/", env!("CARGO_PKG_VERSION")))
            .build();
        Self {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
        }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(GITHUB_API)
    }
}

fn into_response(response: ureq::Response) -> Result<HttpResponse> {
    let status = response.status();
    let headers = response
        .headers_names()
        .into_iter()
        .filter_map(|name| {
            let value = response.header(&name)?.to_string();
            Some((name.to_ascii_lowercase(), value))
        })
        .collect();
    let body = response
        .into_string()
        .map_err(|e| IngestError::NetworkFailure(e.to_string()))?;
    Ok(HttpResponse {
        status,
        headers,
        body,
    })
}

impl Transport for UreqTransport {
    fn get(&self, path: &str, token: Option<&str>) -> Result<HttpResponse> {
        let mut request = self
            .agent
            .get(&format!("{}{}", self.base_url, path))
            .set("Accept", "application/vnd.github+json")
            .set("X-GitHub-Api-Version", "2022-11-28");
        if let Some(token) = token {
            request = request.set("Authorization", &format!("Bearer {token}"));
        }
        match request.call() {
            Ok(response) => into_response(response),
            Err(ureq::Error::Status(_, response)) => into_response(response),
            Err(ureq::Error::Transport(e)) => Err(IngestError::NetworkFailure(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub path: String,
    pub response: HttpResponse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub interactions: Vec<Interaction>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| IngestError::InvalidResponse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| IngestError::Io(e.to_string()))?;
        fs::write(path, text).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))
    }
}

/// Serves recorded responses by request path; unknown paths are 404s.
pub struct ReplayTransport {
    responses: BTreeMap<String, HttpResponse>,
}

impl ReplayTransport {
    pub fn new(cassette: Cassette) -> Self {
        Self {
            responses: cassette
                .interactions
                .into_iter()
                .map(|i| (i.path, i.response))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Cassette::load(path).map(Self::new)
    }
}

impl Transport for ReplayTransport {
    fn get(&self, path: &str, _token: Option<&str>) -> Result<HttpResponse> {
        Ok(self
            .responses
            .get(path)
            .cloned()
            .unwrap_or_else(|| HttpResponse {
                status: 404,
                headers: BTreeMap::new(),
                body: r#"{"message":"Not Found"}"#.to_string(),
            }))
    }
}

/// Forwards to another transport and keeps every exchange for later replay.
pub struct RecordingTransport<T: Transport> {
    inner: T,
    cassette: Mutex<Cassette>,
    output: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, output: PathBuf) -> Self {
        Self {
            inner,
            cassette: Mutex::new(Cassette::default()),
            output,
        }
    }

    /// Writes the recorded interactions sorted by path.
    pub fn save(&self) -> Result<()> {
        let mut cassette = self.cassette.lock().expect("cassette lock").clone();
        cassette.interactions.sort_by(|a, b| a.path.cmp(&b.path));
        cassette.save(&self.output)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, path: &str, token: Option<&str>) -> Result<HttpResponse> {
        let response = self.inner.get(path, token)?;
        let mut recorded = response.clone();
        recorded
            .headers
            .retain(|name, _| name != "authorization" && name != "set-cookie");
        self.cassette
            .lock()
            .expect("cassette lock")
            .interactions
            .push(Interaction {
                path: path.to_string(),
                response: recorded,
            });
        Ok(response)
    }
}
