//! Loopback HTTP server with deterministic endpoints for tests and demos.
//!
//! | route | behaviour |
//! |---|---|
//! | `GET /v2/cards` | 200 with card data |
//! | `GET /strict/sets` | 400 when any query argument is sent, 200 without |
//! | `GET /legacy/decks` | always 404 |
//! | `GET /glycodb/glycan?glytoucan_id=` | 200 only for `G00048MO`, else 404 |
//! | `GET /glycodb/validate` | 200 with an `error` body |
//! | `GET /mass/glycans/{id}` | 200 only for `G00048MO`, else 404 |
//! | `GET /mass/structures/{id}` | 200 only for `G00048MO`, else 404 |
//! | `POST /v1/chat/completions` | replies from a script queue |
//! | `POST /v1/embeddings` | lexical embeddings of the inputs |

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use crate::embed::{lexical_embedding, LEXICAL_DIMENSION};
use crate::encoding::decode_query;

pub const GATED_VALUE: &str = "G00048MO";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub body: String,
}

#[derive(Default)]
struct State {
    requests: Vec<RecordedRequest>,
    chat_script: VecDeque<String>,
}

pub struct MockApiServer {
    server: Arc<Server>,
    state: Arc<Mutex<State>>,
    handle: Option<JoinHandle<()>>,
    base_url: String,
}

impl MockApiServer {
    /// Binds an ephemeral port on 127.0.0.1 and starts serving.
    pub fn start() -> std::io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let state = Arc::new(Mutex::new(State::default()));
        let handle = {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    handle(request, &state);
                }
            })
        };
        Ok(MockApiServer { server, state, handle: Some(handle), base_url: format!("http://{addr}") })
    }

    /// `http://127.0.0.1:PORT`, no trailing slash.
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    /// Queues a reply for the chat-completions route. With the queue empty
    /// the route answers with an `information` verdict.
    pub fn push_chat_reply(&self, content: impl Into<String>) {
        self.lock().chat_script.push_back(content.into());
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.lock().requests.clone()
    }

    pub fn requests_to(&self, path: &str) -> usize {
        self.lock().requests.iter().filter(|r| r.path == path).count()
    }

    pub fn total_requests(&self) -> usize {
        self.lock().requests.len()
    }

    pub fn requests_by_path(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.lock().requests {
            *out.entry(r.path.clone()).or_insert(0) += 1;
        }
        out
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for MockApiServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn json_response(status: u16, body: &Value) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").expect("static header"))
}

fn handle(mut request: tiny_http::Request, state: &Mutex<State>) {
    let method = request.method().as_str().to_ascii_uppercase();
    let raw_url = request.url().to_string();
    let (path, query) = match raw_url.split_once('?') {
        Some((p, q)) => (p.to_string(), decode_query(q)),
        None => (raw_url.clone(), Vec::new()),
    };
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let recorded = RecordedRequest { method: method.clone(), path: path.clone(), query: query.clone(), body: body.clone() };
    let scripted = {
        let mut s = state.lock().unwrap_or_else(|e| e.into_inner());
        s.requests.push(recorded);
        if method == "POST" && path == "/v1/chat/completions" {
            Some(s.chat_script.pop_front())
        } else {
            None
        }
    };
    let arg = |name: &str| query.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str());
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    let response = match (method.as_str(), segments.as_slice()) {
        ("GET", ["v2", "cards"]) => json_response(
            200,
            &json!({"data": [{"id": "xy7-54", "name": "Gardevoir", "supertype": "Pokemon", "hp": "130"}], "totalCount": 1}),
        ),
        ("GET", ["strict", "sets"]) if !query.is_empty() => {
            json_response(400, &json!({"message": "400 unexpected query parameter"}))
        }
        ("GET", ["strict", "sets"]) => json_response(200, &json!({"data": [{"id": "base1", "name": "Base", "total": 102}]})),
        ("GET", ["legacy", "decks"]) => Response::from_string("Not Found").with_status_code(404),
        ("GET", ["glycodb", "glycan"]) if arg("glytoucan_id") == Some(GATED_VALUE) => json_response(
            200,
            &json!({"glytoucan_ac": GATED_VALUE, "pubchem_cid": 45480569, "composition": "Hex5HexNAc2"}),
        ),
        ("GET", ["glycodb", "validate"]) => json_response(200, &json!({"error": "invalid query"})),
        ("GET", ["mass", "glycans", id]) if *id == GATED_VALUE => {
            json_response(200, &json!({"glytoucan_ac": GATED_VALUE, "monoisotopic_mass": 1234.423}))
        }
        ("GET", ["mass", "structures", id]) if *id == GATED_VALUE => {
            json_response(200, &json!({"glytoucan_ac": GATED_VALUE, "format": "WURCS", "residues": 7}))
        }
        ("POST", ["v1", "chat", "completions"]) => {
            let content = scripted
                .flatten()
                .unwrap_or_else(|| json!({"category": "information", "reason": "scripted default"}).to_string());
            json_response(
                200,
                &json!({
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
                    "usage": {"total_tokens": body.len() / 4 + content.len() / 4}
                }),
            )
        }
        ("POST", ["v1", "embeddings"]) => {
            let inputs: Vec<String> = serde_json::from_str::<Value>(&body)
                .ok()
                .and_then(|v| v.get("input").cloned())
                .and_then(|v| serde_json::from_value(v).ok())
                .unwrap_or_default();
            let data: Vec<Value> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| json!({"index": i, "embedding": lexical_embedding(t, LEXICAL_DIMENSION)}))
                .collect();
            json_response(200, &json!({"data": data}))
        }
        _ => json_response(404, &json!({"message": "resource not found"})),
    };
    let _ = request.respond(response);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_and_counts() {
        let server = MockApiServer::start().unwrap();
        let agent = crate::net::build_agent(std::time::Duration::from_secs(5), true);
        let mut r = agent.get(&server.url("/v2/cards?q=name%3Agardevoir")).call().unwrap();
        assert_eq!(r.status().as_u16(), 200);
        assert!(r.body_mut().read_to_string().unwrap().contains("Gardevoir"));
        let r = agent.get(&server.url("/strict/sets?name=x")).call().unwrap();
        assert_eq!(r.status().as_u16(), 400);
        let r = agent.get(&server.url("/mass/glycans/G00048MO")).call().unwrap();
        assert_eq!(r.status().as_u16(), 200);
        let r = agent.get(&server.url("/mass/glycans/other")).call().unwrap();
        assert_eq!(r.status().as_u16(), 404);
        assert_eq!(server.total_requests(), 4);
        assert_eq!(server.requests()[0].query, vec![("q".to_string(), "name:gardevoir".to_string())]);
    }
}
