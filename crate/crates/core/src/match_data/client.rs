//! Explorer-API client for bulk match download.
//!
//! Pages through results by match_id cursor so interrupted pulls can resume,
//! sleeps between requests to stay under the public rate ceiling, and backs
//! off exponentially when the server answers 429.

use std::time::{Duration, Instant};

use serde_json::Value;

use super::{MatchDataError, MatchRecord};

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Service root, e.g. `https://api.opendota.com`.
    pub base_url: String,
    /// Optional API key appended as a query parameter.
    pub api_key: Option<String>,
    /// Rows requested per page; a short page terminates pagination.
    pub page_size: usize,
    /// 429 responses tolerated per page before giving up.
    pub max_retries: u32,
    /// Minimum spacing between request starts.
    pub min_request_interval: Duration,
    /// First backoff sleep after a 429; doubles per consecutive retry.
    pub backoff_base: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            base_url: "https://api.opendota.com".into(),
            api_key: None,
            page_size: 1000,
            max_retries: 5,
            min_request_interval: Duration::from_millis(1100),
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl FetchConfig {
    fn validate(&self) -> Result<(), MatchDataError> {
        if self.page_size == 0 {
            return Err(MatchDataError::InvalidConfig { detail: "page_size must be > 0".into() });
        }
        if self.base_url.is_empty() {
            return Err(MatchDataError::InvalidConfig { detail: "base_url is empty".into() });
        }
        Ok(())
    }
}

/// Downloads all professional matches for the given patch labels.
///
/// Records missing any schema field are dropped with a warning; they still
/// advance the cursor so pagination cannot stall. The caller is expected to
/// run the result through `filter_valid`.
pub fn fetch_matches(
    config: &FetchConfig,
    patches: &[String],
) -> Result<Vec<MatchRecord>, MatchDataError> {
    config.validate()?;
    if patches.is_empty() {
        return Err(MatchDataError::InvalidConfig { detail: "no patches requested".into() });
    }
    for patch in patches {
        // Labels are interpolated into SQL below; keep the alphabet tight.
        if !patch.chars().all(|c| c.is_ascii_alphanumeric() || c == '.') {
            return Err(MatchDataError::InvalidConfig {
                detail: format!("patch label {patch:?} contains unsupported characters"),
            });
        }
    }

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into();

    let mut records = Vec::new();
    let mut cursor: u64 = 0;
    let mut last_request: Option<Instant> = None;
    loop {
        let sql = page_query(patches, cursor, config.page_size);
        let url = explorer_url(config, &sql);
        pace(&mut last_request, config.min_request_interval);
        let body = request_with_backoff(&agent, &url, config)?;
        let rows = extract_rows(&body)?;
        let page_len = rows.len();
        for row in rows {
            let match_id = row
                .get("match_id")
                .and_then(Value::as_u64)
                .ok_or_else(|| MatchDataError::MalformedResponse {
                    detail: "row without match_id; cannot paginate".into(),
                })?;
            cursor = cursor.max(match_id);
            match parse_row(match_id, row) {
                Some(record) => records.push(record),
                None => log::warn!("dropping match {match_id}: response row missing fields"),
            }
        }
        if page_len < config.page_size {
            break;
        }
    }
    Ok(records)
}

/// One explorer page: matches strictly beyond the cursor, oldest first.
fn page_query(patches: &[String], cursor: u64, page_size: usize) -> String {
    let patch_list =
        patches.iter().map(|p| format!("'{p}'")).collect::<Vec<_>>().join(",");
    let heroes =
        (0..10).map(|i| format!("hero_{i}")).collect::<Vec<_>>().join(", ");
    format!(
        "SELECT match_id, patch, duration, kills_r, kills_d, {heroes}, radiant_win \
         FROM pro_matches WHERE patch IN ({patch_list}) AND match_id > {cursor} \
         ORDER BY match_id ASC LIMIT {page_size}"
    )
}

fn explorer_url(config: &FetchConfig, sql: &str) -> String {
    let mut url = format!(
        "{}/api/explorer?sql={}",
        config.base_url.trim_end_matches('/'),
        percent_encode(sql)
    );
    if let Some(key) = &config.api_key {
        url.push_str("&api_key=");
        url.push_str(&percent_encode(key));
    }
    url
}

fn percent_encode(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for byte in raw.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(byte as char)
            }
            _ => out.push_str(&format!("%{byte:02X}")),
        }
    }
    out
}

fn pace(last_request: &mut Option<Instant>, interval: Duration) {
    if let Some(last) = *last_request {
        let elapsed = last.elapsed();
        if elapsed < interval {
            std::thread::sleep(interval - elapsed);
        }
    }
    *last_request = Some(Instant::now());
}

fn request_with_backoff(
    agent: &ureq::Agent,
    url: &str,
    config: &FetchConfig,
) -> Result<Value, MatchDataError> {
    let mut attempt: u32 = 0;
    loop {
        let response = agent
            .get(url)
            .call()
            .map_err(|e| MatchDataError::Network { detail: e.to_string() })?;
        let status = response.status().as_u16();
        if status == 429 {
            if attempt >= config.max_retries {
                return Err(MatchDataError::RateLimited { attempts: attempt + 1 });
            }
            let sleep = config.backoff_base * 2u32.saturating_pow(attempt);
            log::warn!("rate limited; retrying in {sleep:?}");
            std::thread::sleep(sleep);
            attempt += 1;
            continue;
        }
        if status != 200 {
            return Err(MatchDataError::Network { detail: format!("HTTP {status}") });
        }
        let text = response
            .into_body()
            .read_to_string()
            .map_err(|e| MatchDataError::Network { detail: e.to_string() })?;
        return serde_json::from_str(&text)
            .map_err(|e| MatchDataError::MalformedResponse { detail: e.to_string() });
    }
}

/// Accepts either the explorer envelope `{"rows": [...]}` or a bare array.
fn extract_rows(body: &Value) -> Result<Vec<Value>, MatchDataError> {
    let rows = match body {
        Value::Array(rows) => rows.clone(),
        Value::Object(map) => match map.get("rows") {
            Some(Value::Array(rows)) => rows.clone(),
            _ => {
                return Err(MatchDataError::MalformedResponse {
                    detail: "response has no rows array".into(),
                })
            }
        },
        _ => {
            return Err(MatchDataError::MalformedResponse {
                detail: "response is neither object nor array".into(),
            })
        }
    };
    Ok(rows)
}

/// Total per-row parse: any absent or mistyped field yields None (drop).
fn parse_row(match_id: u64, row: Value) -> Option<MatchRecord> {
    let field_u32 = |name: &str| row.get(name).and_then(Value::as_u64).map(|v| v as u32);
    let patch = match row.get("patch")? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    let mut heroes = [0u32; 10];
    for (i, hero) in heroes.iter_mut().enumerate() {
        *hero = field_u32(&format!("hero_{i}"))?;
    }
    let radiant_win = match row.get("radiant_win")? {
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_u64()? == 1,
        _ => return None,
    };
    Some(MatchRecord {
        match_id,
        patch,
        duration: field_u32("duration")?,
        kills_radiant: field_u32("kills_r")?,
        kills_dire: field_u32("kills_d")?,
        heroes,
        radiant_win,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Minimal canned-response HTTP server; each connection pops one script
    /// entry of (status, body).
    fn serve(script: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let hits_bg = Arc::clone(&hits);
        std::thread::spawn(move || {
            for (status, body) in script {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                while reader.read_line(&mut line).is_ok() {
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    line.clear();
                }
                hits_bg.fetch_add(1, Ordering::SeqCst);
                let reason = if status == 200 { "OK" } else { "Too Many Requests" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\n\
                     content-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), hits)
    }

    fn row_json(match_id: u64) -> String {
        format!(
            "{{\"match_id\":{match_id},\"patch\":\"7.30\",\"duration\":2400,\
             \"kills_r\":25,\"kills_d\":20,\"hero_0\":1,\"hero_1\":2,\"hero_2\":3,\
             \"hero_3\":4,\"hero_4\":5,\"hero_5\":6,\"hero_6\":7,\"hero_7\":8,\
             \"hero_8\":9,\"hero_9\":10,\"radiant_win\":true}}"
        )
    }

    fn test_config(base_url: String, page_size: usize) -> FetchConfig {
        FetchConfig {
            base_url,
            page_size,
            max_retries: 3,
            min_request_interval: Duration::ZERO,
            backoff_base: Duration::from_millis(1),
            ..FetchConfig::default()
        }
    }

    #[test]
    fn paginates_until_short_page() {
        let page1 = format!("{{\"rows\":[{},{}]}}", row_json(1), row_json(2));
        let page2 = format!("{{\"rows\":[{}]}}", row_json(3));
        let (url, hits) = serve(vec![(200, page1), (200, page2)]);
        let records = fetch_matches(&test_config(url, 2), &["7.30".into()]).unwrap();
        assert_eq!(records.iter().map(|r| r.match_id).collect::<Vec<_>>(), [1, 2, 3]);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn backs_off_after_rate_limit_then_succeeds() {
        let page = format!("{{\"rows\":[{}]}}", row_json(9));
        let (url, hits) = serve(vec![(429, "{}".into()), (429, "{}".into()), (200, page)]);
        let records = fetch_matches(&test_config(url, 10), &["7.30".into()]).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persistent_rate_limit_is_an_error() {
        let script = (0..4).map(|_| (429, "{}".to_string())).collect();
        let (url, _) = serve(script);
        let err = fetch_matches(&test_config(url, 10), &["7.30".into()]).unwrap_err();
        assert!(matches!(err, MatchDataError::RateLimited { attempts: 4 }));
    }

    #[test]
    fn incomplete_rows_are_dropped_not_defaulted() {
        let partial = "{\"match_id\":5,\"patch\":\"7.30\",\"duration\":100}";
        let page = format!("{{\"rows\":[{},{partial}]}}", row_json(4));
        let (url, _) = serve(vec![(200, page)]);
        let records = fetch_matches(&test_config(url, 10), &["7.30".into()]).unwrap();
        assert_eq!(records.iter().map(|r| r.match_id).collect::<Vec<_>>(), [4]);
    }

    #[test]
    fn row_without_match_id_is_malformed() {
        let page = "{\"rows\":[{\"patch\":\"7.30\"}]}".to_string();
        let (url, _) = serve(vec![(200, page)]);
        let err = fetch_matches(&test_config(url, 10), &["7.30".into()]).unwrap_err();
        assert!(matches!(err, MatchDataError::MalformedResponse { .. }));
    }

    #[test]
    fn non_success_status_is_a_network_error() {
        let (url, _) = serve(vec![(500, "oops".into())]);
        let err = fetch_matches(&test_config(url, 10), &["7.30".into()]).unwrap_err();
        assert!(matches!(err, MatchDataError::Network { .. }));
    }

    #[test]
    fn patch_labels_are_validated_before_any_request() {
        let err = fetch_matches(
            &test_config("http://127.0.0.1:1".into(), 10),
            &["7.30'; DROP".into()],
        )
        .unwrap_err();
        assert!(matches!(err, MatchDataError::InvalidConfig { .. }));
    }

    #[test]
    fn query_shape_is_stable() {
        let sql = page_query(&["7.30".into(), "7.31".into()], 42, 100);
        assert!(sql.contains("patch IN ('7.30','7.31')"));
        assert!(sql.contains("match_id > 42"));
        assert!(sql.contains("LIMIT 100"));
        assert!(sql.contains("ORDER BY match_id ASC"));
    }
}
