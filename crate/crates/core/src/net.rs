//! Shared HTTP agent construction and address checks.

use std::net::IpAddr;
use std::time::Duration;

use ureq::tls::TlsConfig;

/// Builds a blocking agent that returns non-2xx statuses as responses
/// instead of errors.
pub fn build_agent(timeout: Duration, verify_tls: bool) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .tls_config(TlsConfig::builder().disable_verification(!verify_tls).build())
        .build()
        .into()
}

/// Host part of an http(s) URL, without port or credentials.
pub fn url_host(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    parsed.host_str().map(|h| h.trim_matches(['[', ']']).to_string())
}

pub fn is_loopback_url(url: &str) -> bool {
    match url_host(url) {
        Some(host) if host.eq_ignore_ascii_case("localhost") => true,
        Some(host) => host.parse::<IpAddr>().map(|ip| ip.is_loopback()).unwrap_or(false),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_detection() {
        assert!(is_loopback_url("http://127.0.0.1:9000/x"));
        assert!(is_loopback_url("http://localhost/x"));
        assert!(is_loopback_url("http://[::1]:80/"));
        assert!(!is_loopback_url("https://api.pokemontcg.io/v2/cards"));
        assert!(!is_loopback_url("/v2/cards"));
    }
}
