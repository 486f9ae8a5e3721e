//! Percent encoding for query values, body-less path segments and their
//! inverse. Everything outside the RFC 3986 unreserved set is escaped, so
//! `+`, `=`, `&` and `/` survive transport as data.

use percent_encoding::{percent_decode_str, percent_encode, AsciiSet, NON_ALPHANUMERIC};

const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

pub fn encode_component(value: &str) -> String {
    encode_bytes(value.as_bytes())
}

pub fn encode_bytes(bytes: &[u8]) -> String {
    percent_encode(bytes, COMPONENT).to_string()
}

/// Decodes `%XX` escapes. `+` is left as is (this is not form decoding).
pub fn decode_bytes(encoded: &str) -> Vec<u8> {
    percent_decode_str(encoded).collect()
}

pub fn decode_component(encoded: &str) -> String {
    String::from_utf8_lossy(&decode_bytes(encoded)).into_owned()
}

/// Builds `k1=v1&k2=v2` with both sides encoded.
pub fn encode_query<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{}={}", encode_component(k), encode_component(v)))
        .collect::<Vec<_>>()
        .join("&")
}

/// Splits and decodes a raw query string.
pub fn decode_query(query: &str) -> Vec<(String, String)> {
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) => (decode_component(k), decode_component(v)),
            None => (decode_component(pair), String::new()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_characters_escape() {
        assert_eq!(encode_component("a+b"), "a%2Bb");
        assert_eq!(encode_component("k=v"), "k%3Dv");
        assert_eq!(encode_component("name:gardevoir"), "name%3Agardevoir");
        assert_eq!(encode_component("a b"), "a%20b");
        assert_eq!(encode_component("safe-._~"), "safe-._~");
    }

    #[test]
    fn plus_is_not_a_space_on_decode() {
        assert_eq!(decode_component("a+b%2B"), "a+b+");
    }

    #[test]
    fn query_roundtrip() {
        let q = encode_query([("q", "name:gardevoir (subtypes:mega)"), ("x", "1=2&3")]);
        assert_eq!(
            decode_query(&q),
            vec![
                ("q".to_string(), "name:gardevoir (subtypes:mega)".to_string()),
                ("x".to_string(), "1=2&3".to_string())
            ]
        );
    }
}
