//! GitHub REST client: repository attributes and comment counts.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use ce_core::RepositoryRecord;
use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use serde_json::Value;

use crate::error::{IngestError, Result};
use crate::transport::{HttpResponse, Transport};

pub const TOKEN_ENV: &str = "GITHUB_TOKEN";
pub const PER_PAGE: usize = 100;

/// Bearer token; `Debug` never reveals it.
#[derive(Clone)]
pub struct Token(String);

impl Token {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(TOKEN_ENV)
            .ok()
            .filter(|t| !t.is_empty())
            .map(Self)
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Token(***)")
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateLimitPolicy {
    /// Return `RateLimited` and let the caller decide when to resume.
    Fail,
    /// Sleep until the advertised reset time, then continue.
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff for the given 1-based failed attempt, plus up to 50% jitter.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32 << (attempt - 1).min(16));
        let capped = exp.min(self.max_delay);
        let jitter = rand::thread_rng().gen_range(0.0..=0.5);
        capped + capped.mul_f64(jitter)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateBudget {
    pub remaining: Option<u64>,
    pub reset_at: Option<DateTime<Utc>>,
}

struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("permit lock");
        while *available == 0 {
            available = self.freed.wait(available).expect("permit lock");
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("permit lock") += 1;
        self.0.freed.notify_one();
    }
}

pub struct ApiSession {
    transport: Arc<dyn Transport>,
    token: Option<Token>,
    max_concurrent_requests: usize,
    permits: Permits,
    budget: Mutex<RateBudget>,
    retry: RetryPolicy,
    rate_limit_policy: RateLimitPolicy,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for ApiSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApiSession")
            .field("token", &self.token)
            .field("max_concurrent_requests", &self.max_concurrent_requests)
            .field("budget", &self.budget())
            .finish_non_exhaustive()
    }
}

impl ApiSession {
    pub fn new(
        transport: Arc<dyn Transport>,
        token: Option<Token>,
        max_concurrent_requests: usize,
    ) -> Self {
        let max = max_concurrent_requests.max(1);
        Self {
            transport,
            token,
            max_concurrent_requests: max,
            permits: Permits::new(max),
            budget: Mutex::new(RateBudget::default()),
            retry: RetryPolicy::default(),
            rate_limit_policy: RateLimitPolicy::Fail,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit_policy(mut self, policy: RateLimitPolicy) -> Self {
        self.rate_limit_policy = policy;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn budget(&self) -> RateBudget {
        *self.budget.lock().expect("budget lock")
    }

    /// Blocks (Wait) or fails (Fail) while the budget is exhausted.
    fn check_budget(&self) -> Result<()> {
        let mut budget = self.budget.lock().expect("budget lock");
        if let (Some(0), Some(reset_at)) = (budget.remaining, budget.reset_at) {
            let now = self.clock.now();
            if now < reset_at {
                match self.rate_limit_policy {
                    RateLimitPolicy::Fail => return Err(IngestError::RateLimited { reset_at }),
                    RateLimitPolicy::Wait => {
                        let wait = (reset_at - now).to_std().unwrap_or_default();
                        log::info!(
                            "rate limit exhausted; waiting {}s for reset",
                            wait.as_secs()
                        );
                        self.clock.sleep(wait);
                    }
                }
            }
            *budget = RateBudget::default();
        }
        Ok(())
    }

    fn record_budget(&self, response: &HttpResponse) {
        let remaining = response
            .header("x-ratelimit-remaining")
            .and_then(|v| v.parse().ok());
        let reset_at = response
            .header("x-ratelimit-reset")
            .and_then(|v| v.parse::<i64>().ok())
            .and_then(|secs| Utc.timestamp_opt(secs, 0).single());
        let mut budget = self.budget.lock().expect("budget lock");
        if remaining.is_some() {
            budget.remaining = remaining;
        }
        if reset_at.is_some() {
            budget.reset_at = reset_at;
        }
    }

    fn rate_limit_reset(&self, response: &HttpResponse) -> Option<DateTime<Utc>> {
        if response.status != 403 && response.status != 429 {
            return None;
        }
        let exhausted = response.header("x-ratelimit-remaining") == Some("0");
        if let Some(secs) = response
            .header("retry-after")
            .and_then(|v| v.parse::<i64>().ok())
        {
            return Some(self.clock.now() + chrono::Duration::seconds(secs));
        }
        if exhausted || response.status == 429 {
            return Some(self.budget().reset_at.unwrap_or_else(|| self.clock.now()));
        }
        None
    }

    /// One logical GET with budget checks, retries and status classification.
    pub fn get(&self, path: &str) -> Result<HttpResponse> {
        let mut attempt = 0;
        loop {
            self.check_budget()?;
            let outcome = {
                let _permit = self.permits.acquire();
                log::debug!("GET {path}");
                self.transport
                    .get(path, self.token.as_ref().map(Token::expose))
            };
            let failure = match outcome {
                Ok(response) => {
                    self.record_budget(&response);
                    if let Some(reset_at) = self.rate_limit_reset(&response) {
                        {
                            let mut budget = self.budget.lock().expect("budget lock");
                            budget.remaining = Some(0);
                            budget.reset_at = Some(reset_at);
                        }
                        if self.rate_limit_policy == RateLimitPolicy::Fail {
                            return Err(IngestError::RateLimited { reset_at });
                        }
                        continue;
                    }
                    match response.status {
                        200..=299 => return Ok(response),
                        404 => return Err(IngestError::NotFound(path.to_string())),
                        403 => return Err(IngestError::Forbidden(path.to_string())),
                        500..=599 => IngestError::NetworkFailure(format!(
                            "{path}: status {}",
                            response.status
                        )),
                        status => {
                            return Err(IngestError::InvalidResponse(format!(
                                "{path}: status {status}"
                            )))
                        }
                    }
                }
                Err(IngestError::NetworkFailure(message)) => IngestError::NetworkFailure(message),
                Err(other) => return Err(other),
            };
            attempt += 1;
            if attempt >= self.retry.max_attempts {
                return Err(failure);
            }
            let delay = self.retry.delay(attempt);
            log::warn!("{failure}; retry {attempt} in {}ms", delay.as_millis());
            self.clock.sleep(delay);
        }
    }

    fn get_json_array(&self, path: &str) -> Result<(Vec<Value>, HttpResponse)> {
        let response = self.get(path)?;
        let items = match serde_json::from_str::<Value>(&response.body) {
            Ok(Value::Array(items)) => items,
            Ok(_) => {
                return Err(IngestError::InvalidResponse(format!(
                    "{path}: expected a JSON array"
                )))
            }
            Err(e) => return Err(IngestError::InvalidResponse(format!("{path}: {e}"))),
        };
        Ok((items, response))
    }

    /// Every item of a paginated listing, in page order. Pages named by the
    /// `last` link are fetched concurrently; any failure discards the whole listing.
    pub fn get_all_pages(&self, path: &str) -> Result<Vec<Value>> {
        let first_path = set_query_param(path, "per_page", &PER_PAGE.to_string());
        let (mut items, response) = self.get_json_array(&first_path)?;
        let links = parse_link_header(response.header("link").unwrap_or(""));

        if let Some(last) = links.iter().find(|l| l.rel == "last") {
            let last_page = query_param(&last.path, "page")
                .and_then(|p| p.parse::<usize>().ok())
                .ok_or_else(|| {
                    IngestError::InvalidResponse(format!("unparseable last link {}", last.path))
                })?;
            let pages: Vec<String> = (2..=last_page)
                .map(|page| set_query_param(&last.path, "page", &page.to_string()))
                .collect();
            for page in self.fetch_pages(&pages)? {
                items.extend(page);
            }
            return Ok(items);
        }

        let mut next = links.into_iter().find(|l| l.rel == "next").map(|l| l.path);
        while let Some(path) = next {
            let (page, response) = self.get_json_array(&path)?;
            items.extend(page);
            next = parse_link_header(response.header("link").unwrap_or(""))
                .into_iter()
                .find(|l| l.rel == "next")
                .map(|l| l.path);
        }
        Ok(items)
    }

    fn fetch_pages(&self, paths: &[String]) -> Result<Vec<Vec<Value>>> {
        let results: Vec<Mutex<Option<Result<Vec<Value>>>>> =
            paths.iter().map(|_| Mutex::new(None)).collect();
        let cursor = AtomicUsize::new(0);
        let failed = std::sync::atomic::AtomicBool::new(false);
        let workers = self.max_concurrent_requests.min(paths.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    if i >= paths.len() {
                        break;
                    }
                    let result = self.get_json_array(&paths[i]).map(|(items, _)| items);
                    if result.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    *results[i].lock().expect("page slot") = Some(result);
                });
            }
        });
        let mut pages = Vec::with_capacity(paths.len());
        let mut first_error = None;
        for slot in results {
            match slot.into_inner().expect("page slot") {
                Some(Ok(items)) => pages.push(items),
                Some(Err(e)) => {
                    first_error.get_or_insert(e);
                }
                None => {}
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => Ok(pages),
        }
    }

    /// Item count of a listing using one item per page: the `last` link's page
    /// number is the total.
    fn count_items(&self, path: &str) -> Result<(u64, Vec<Value>)> {
        let first_path = set_query_param(path, "per_page", "1");
        let (items, response) = self.get_json_array(&first_path)?;
        let links = parse_link_header(response.header("link").unwrap_or(""));
        let count = links
            .iter()
            .find(|l| l.rel == "last")
            .and_then(|l| query_param(&l.path, "page"))
            .and_then(|p| p.parse().ok())
            .unwrap_or(items.len() as u64);
        Ok((count, items))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub path: String,
    pub rel: String,
}

/// Parses an RFC 8288 `Link` header; targets are reduced to path and query.
pub fn parse_link_header(header: &str) -> Vec<Link> {
    header
        .split(',')
        .filter_map(|part| {
            let (target, params) = part.trim().split_once(';')?;
            let url = target.trim().strip_prefix('<')?.strip_suffix('>')?;
            let rel = params.split(';').find_map(|p| {
                let (key, value) = p.trim().split_once('=')?;
                (key.trim() == "rel").then(|| value.trim().trim_matches('"').to_string())
            })?;
            Some(Link {
                path: strip_origin(url).to_string(),
                rel,
            })
        })
        .collect()
}

fn strip_origin(url: &str) -> &str {
    match url.find("://") {
        Some(i) => url[i + 3..].find('/').map_or("/", |j| &url[i + 3 + j..]),
        None => url,
    }
}

pub fn query_param<'a>(path: &'a str, key: &str) -> Option<&'a str> {
    let (_, query) = path.split_once('?')?;
    query.split('&').find_map(|pair| {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        (k == key).then_some(v)
    })
}

pub fn set_query_param(path: &str, key: &str, value: &str) -> String {
    let (base, query) = path.split_once('?').unwrap_or((path, ""));
    let mut pairs: Vec<String> = query
        .split('&')
        .filter(|p| !p.is_empty() && p.split('=').next() != Some(key))
        .map(str::to_string)
        .collect();
    pairs.push(format!("{key}={value}"));
    format!("{base}?{}", pairs.join("&"))
}

fn field<'a>(value: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    value
        .get(key)
        .ok_or_else(|| IngestError::InvalidResponse(format!("{path}: missing field {key:?}")))
}

fn count_field(value: &Value, key: &str, path: &str) -> Result<u64> {
    field(value, key, path)?
        .as_u64()
        .ok_or_else(|| IngestError::InvalidResponse(format!("{path}: {key} is not a count")))
}

fn timestamp_field(value: &Value, key: &str, path: &str) -> Result<DateTime<Utc>> {
    field(value, key, path)?
        .as_str()
        .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
        .map(|t| t.with_timezone(&Utc))
        .ok_or_else(|| IngestError::InvalidResponse(format!("{path}: {key} is not a timestamp")))
}

fn is_open(item: &Value) -> bool {
    item.get("state").and_then(Value::as_str) == Some("open")
}

/// Issue comments and pull-request review comments, summed over all pages.
pub fn fetch_comment_counts(session: &ApiSession, owner: &str, name: &str) -> Result<(u64, u64)> {
    let base = format!("/repos/{owner}/{name}");
    let issue_comments = session
        .get_all_pages(&format!("{base}/issues/comments"))?
        .len() as u64;
    let pr_comments = session
        .get_all_pages(&format!("{base}/pulls/comments"))?
        .len() as u64;
    Ok((issue_comments, pr_comments))
}

/// All record attributes from the repository, listing and comment endpoints.
/// Closed issues count as resolved; pull requests with `merged_at` as merged.
pub fn fetch_repository(session: &ApiSession, owner: &str, name: &str) -> Result<RepositoryRecord> {
    let base = format!("/repos/{owner}/{name}");
    let repo: Value = serde_json::from_str(&session.get(&base)?.body)
        .map_err(|e| IngestError::InvalidResponse(format!("{base}: {e}")))?;
    let created_at = timestamp_field(&repo, "created_at", &base)?;

    // The issues listing also returns pull requests; those carry a `pull_request` key.
    let issues: Vec<Value> = session
        .get_all_pages(&format!("{base}/issues?state=all"))?
        .into_iter()
        .filter(|i| i.get("pull_request").is_none())
        .collect();
    let pulls = session.get_all_pages(&format!("{base}/pulls?state=all"))?;
    let contributors = session.get_all_pages(&format!("{base}/contributors?anon=1"))?;
    let branches = session.get_all_pages(&format!("{base}/branches"))?;
    let releases = session.get_all_pages(&format!("{base}/releases"))?;

    let (commits, last_commit) = match session.count_items(&format!("{base}/commits")) {
        Ok((count, head)) => {
            let date = head
                .first()
                .and_then(|c| c.pointer("/commit/committer/date"))
                .and_then(Value::as_str)
                .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
                .map_or(created_at, |t| t.with_timezone(&Utc));
            (count, date)
        }
        // An empty repository answers the commit listing with 409 Conflict.
        Err(IngestError::InvalidResponse(message)) if message.ends_with("status 409") => {
            (0, created_at)
        }
        Err(e) => return Err(e),
    };

    let last_release = releases
        .iter()
        .filter_map(|r| {
            r.get("published_at")
                .or_else(|| r.get("created_at"))
                .and_then(Value::as_str)
                .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
                .map(|t| t.with_timezone(&Utc))
        })
        .max();
    let (issue_comments, pr_comments) = fetch_comment_counts(session, owner, name)?;

    let record = RepositoryRecord {
        owner: owner.to_string(),
        name: name.to_string(),
        created_at,
        last_commit,
        is_fork: field(&repo, "fork", &base)?.as_bool().unwrap_or(false),
        license_id: repo
            .pointer("/license/spdx_id")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string(),
        commits,
        contributors: contributors.len() as u64,
        watchers: count_field(&repo, "subscribers_count", &base)?,
        stargazers: count_field(&repo, "stargazers_count", &base)?,
        forks: count_field(&repo, "forks_count", &base)?,
        total_issues: issues.len() as u64,
        open_issues: issues.iter().filter(|i| is_open(i)).count() as u64,
        resolved_issues: issues.iter().filter(|i| !is_open(i)).count() as u64,
        total_pull_requests: pulls.len() as u64,
        open_pull_requests: pulls.iter().filter(|p| is_open(p)).count() as u64,
        merged_pull_requests: pulls
            .iter()
            .filter(|p| p.get("merged_at").is_some_and(|m| !m.is_null()))
            .count() as u64,
        issue_comments,
        pr_comments,
        branches: branches.len() as u64,
        releases: releases.len() as u64,
        last_release,
    };
    record
        .validate()
        .map_err(|e| IngestError::InvalidResponse(e.to_string()))?;
    Ok(record)
}
