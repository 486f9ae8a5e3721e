//! Bundled documents: the card-search landing page with its reference
//! extraction, and a three-document synthetic corpus whose endpoints live on
//! the [`crate::mock`] server.
//!
//! Synthetic documents contain `{{BASE_URL}}`, replaced by the mock
//! server's address at run time.

use std::path::{Path, PathBuf};

use crate::ingest::ManifestEntry;
use crate::model::ApiSpec;

pub const BASE_URL_PLACEHOLDER: &str = "{{BASE_URL}}";

pub const POKEMON_SOURCE_ID: &str = "pokemontcg";

/// Landing page of the card-search API.
pub const POKEMON_HTML: &str = r#"<!DOCTYPE html>
<html>
<head><title>Pokémon TCG Developers</title></head>
<body>
<nav><a href="/">Pokémon TCG Developers</a></nav>
<header>
<p>JOIN THE COMMUNITY OF DEVELOPERS BUILDING WITH THE POKÉMON TCG API</p>
<p>Next</p>
</header>
<main>
<section>
<h2>The most comprehensive dataset you can find</h2>
<p>From Base Set through Sword &amp; Shield , the Pokémon TCG API has the card data you need to build the ultimate application, whether that be mobile or web. Get access to prices, hi-res images, and more. Focus on your application and let us worry about the card data.</p>
<p>Some features of the Pokémon TCG API include:</p>
<ul><li>Prices by TCGplayer</li><li>Hi-Res Images</li><li>Detailed Search Queries</li></ul>
<h3>Developer SDKs</h3>
<p>With a large community contributing to the project through various SDKs, development for you and your team has never been easier.</p>
<h3>In-depth details of every card</h3>
<p>All data delivered in JSON format such as types, attacks, abilities, and more.</p>
</section>
<section>
<h2>For Developers</h2>
<p>The Pokémon TCG API allows developers to ingest card data programatically. The API exposes card and set details in an easy to consume format. Stay up to date with new sets, and access new data right away on launch day.</p>
<h3>Advanced Search Queries</h3>
<p>Perform advanced search queries with a familiar Lucene-like syntax. Find cards by name, type, release date, legality, and more. Use multiple types of operators to filter to specific cards. This API supports operators such as logical AND, OR, NOT, and range operators. View the documentation for more details.</p>
<pre>GET https://api.pokemontcg.io/v2/cards?q=name:gardevoir (subtypes:mega OR subtypes:vmax)</pre>
</section>
<section>
<h2>Gain access to the Pokémon TCG Developer Portal to start using the Pokémon TCG API</h2>
<p>The Pokémon TCG Developer Portal lets you manage your account and API Key associated with the Pokémon TCG API. Creating an account will get you access to higher rate limits and no IP restrictions.</p>
<p><a href="https://dev.pokemontcg.io">Get Started</a></p>
<h2>Questions? We are here to help you.</h2>
<p>If you have general usage questions, it is highly recommended to ask your questions at community Discord channel. There are tons of devs who are more than willing to help you out with any questions regarding the API.</p>
<p>If you are an individual or business who is interested in receiving higher rate limits for the API, please contact Andrew via email: [email protected] . I try to respond to all inquiries within 72 hours.</p>
</section>
</main>
<footer>
<p>API Documentation Pokémon TCG API Documentation Pokémon Card Search Engine Pokémon TCG Guru</p>
<p>Donate Patreon , Kofi</p>
<p>Discord https://discord.gg/dpsTCvg</p>
<p>Email [email protected]</p>
<p>Elsewhere GitHub Twitter LinkedIn</p>
<p>This website is not produced, endorsed, supported, or affiliated with Nintendo or The Pokémon Company.</p>
</footer>
<script>window.analytics = {};</script>
</body>
</html>
"#;

/// A recorded model reply for [`POKEMON_HTML`], fenced as chat models tend
/// to return it.
pub const POKEMON_REPLAY_OUTPUT: &str = r#"```json
{
    "title": "Pokémon TCG API Documentation",
    "endpoints": [
        {
            "name": "Search Cards",
            "description": "Perform advanced search queries to find cards by name, type, release date, legality, and more.",
            "method": "GET",
            "url": "https://api.pokemontcg.io/v2/cards",
            "headers": [],
            "required_parameters": [
                {
                    "name": "q",
                    "type": "string",
                    "description": "The search query using Lucene-like syntax.",
                    "default": null,
                    "example": "name:gardevoir"
                }
            ],
            "optional_parameters": []
        }
    ]
}
```"#;

/// The reference extraction for [`POKEMON_HTML`].
pub fn pokemon_golden_spec() -> ApiSpec {
    let body = POKEMON_REPLAY_OUTPUT.trim_start_matches("```json").trim_end_matches("```");
    ApiSpec::from_json_str(body).expect("bundled reference spec is valid")
}

const CARDS_HTML: &str = r#"<html><body>
<h1>Card Catalog API</h1>
<p>Card data for collectors. No key needed.</p>
<h2>Search Cards</h2>
<p>Search cards with a Lucene-like query.</p>
<pre>GET {{BASE_URL}}/v2/cards?q=name:gardevoir</pre>
<table>
<tr><th>Name</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>q</td><td>string</td><td>yes</td><td>The search query using Lucene-like syntax.</td><td>name:gardevoir</td></tr>
<tr><td>pageSize</td><td>integer</td><td>no</td><td>Number of cards per page.</td><td></td></tr>
</table>
<h2>Search Sets</h2>
<p>Find card sets by name.</p>
<pre>GET {{BASE_URL}}/strict/sets?name=base</pre>
<table>
<tr><th>Name</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>name</td><td>string</td><td>yes</td><td>Name of the set.</td><td>base</td></tr>
</table>
<h2>List Decks</h2>
<p>Archived tournament decks.</p>
<pre>GET {{BASE_URL}}/legacy/decks?format=standard</pre>
<table>
<tr><th>Name</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>format</td><td>string</td><td>yes</td><td>Play format of the deck.</td><td>standard</td></tr>
</table>
</body></html>
"#;

const CARDS_TRUTH: &str = r#"{
  "title": "Card Catalog API",
  "endpoints": [
    {"name": "Search Cards", "description": "Search cards with a Lucene-like query.", "method": "GET",
     "url": "{{BASE_URL}}/v2/cards", "headers": [],
     "required_parameters": [{"name": "q", "type": "string", "description": "The search query using Lucene-like syntax.", "default": null, "example": "name:gardevoir"}],
     "optional_parameters": [{"name": "pageSize", "type": "integer", "description": "Number of cards per page.", "default": null, "example": null}]},
    {"name": "Search Sets", "description": "Find card sets by name.", "method": "GET",
     "url": "{{BASE_URL}}/strict/sets", "headers": [],
     "required_parameters": [{"name": "name", "type": "string", "description": "Name of the set.", "default": null, "example": "base"}],
     "optional_parameters": []},
    {"name": "List Decks", "description": "Archived tournament decks.", "method": "GET",
     "url": "{{BASE_URL}}/legacy/decks", "headers": [],
     "required_parameters": [{"name": "format", "type": "string", "description": "Play format of the deck.", "default": null, "example": "standard"}],
     "optional_parameters": []}
  ]
}"#;

const GLYCODB_HTML: &str = r#"<html><body>
<h1>GlycoDB REST Service</h1>
<p>Glycan records keyed by GlyTouCan accession.</p>
<h2>Glycan Record</h2>
<p>Fetch a glycan record with its cross references.</p>
<pre>GET {{BASE_URL}}/glycodb/glycan?glytoucan_id=G00048MO</pre>
<table>
<tr><th>Parameter</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>glytoucan_id</td><td>string</td><td>yes</td><td>GlyTouCan accession of the glycan.</td><td>G00048MO</td></tr>
</table>
<h2>Validate Sequence</h2>
<p>Check a glycan sequence for syntax errors.</p>
<pre>GET {{BASE_URL}}/glycodb/validate?sequence=WURCS</pre>
<table>
<tr><th>Parameter</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>sequence</td><td>string</td><td>yes</td><td>Glycan sequence text.</td><td>WURCS</td></tr>
</table>
</body></html>
"#;

const GLYCODB_TRUTH: &str = r#"{
  "title": "GlycoDB REST Service",
  "endpoints": [
    {"name": "Glycan Record", "description": "Fetch a glycan record with its cross references.", "method": "GET",
     "url": "{{BASE_URL}}/glycodb/glycan", "headers": [],
     "required_parameters": [{"name": "glytoucan_id", "type": "string", "description": "GlyTouCan accession of the glycan.", "default": null, "example": "G00048MO"}],
     "optional_parameters": []},
    {"name": "Validate Sequence", "description": "Check a glycan sequence for syntax errors.", "method": "GET",
     "url": "{{BASE_URL}}/glycodb/validate", "headers": [],
     "required_parameters": [{"name": "sequence", "type": "string", "description": "Glycan sequence text.", "default": null, "example": "WURCS"}],
     "optional_parameters": []}
  ]
}"#;

const GLYCOMASS_HTML: &str = r#"<html><body>
<h1>Glycan Mass Calculator</h1>
<p>Mass and structure lookups for glycans.</p>
<h2>Compute Mass</h2>
<p>Monoisotopic mass of a glycan.</p>
<pre>GET {{BASE_URL}}/mass/glycans/{glytoucan_id}</pre>
<table>
<tr><th>Name</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>glytoucan_id</td><td>string</td><td>yes</td><td>GlyTouCan accession of the glycan.</td><td>G00048MO</td></tr>
</table>
<h2>Glycan Structure</h2>
<p>Residue structure of a glycan.</p>
<pre>GET {{BASE_URL}}/mass/structures/{glytoucan_id}</pre>
<table>
<tr><th>Name</th><th>Type</th><th>Required</th><th>Description</th><th>Example</th></tr>
<tr><td>glytoucan_id</td><td>string</td><td>yes</td><td>Accession of the glycan.</td><td></td></tr>
</table>
<h2>Service Status</h2>
<p>Health of the calculator.</p>
<pre>GET /status</pre>
</body></html>
"#;

const GLYCOMASS_TRUTH: &str = r#"{
  "title": "Glycan Mass Calculator",
  "endpoints": [
    {"name": "Compute Mass", "description": "Monoisotopic mass of a glycan.", "method": "GET",
     "url": "{{BASE_URL}}/mass/glycans/{glytoucan_id}", "headers": [],
     "required_parameters": [{"name": "glytoucan_id", "type": "string", "description": "GlyTouCan accession of the glycan.", "default": null, "example": "G00048MO"}],
     "optional_parameters": []},
    {"name": "Glycan Structure", "description": "Residue structure of a glycan.", "method": "GET",
     "url": "{{BASE_URL}}/mass/structures/{glytoucan_id}", "headers": [],
     "required_parameters": [{"name": "glytoucan_id", "type": "string", "description": "Accession of the glycan.", "default": null, "example": null}],
     "optional_parameters": []},
    {"name": "Service Status", "description": "Health of the calculator.", "method": "GET",
     "url": "/status", "headers": [], "required_parameters": [], "optional_parameters": []}
  ]
}"#;

/// One synthetic document: source id, HTML, reference spec JSON.
pub struct SyntheticDoc {
    pub source_id: &'static str,
    pub html: &'static str,
    pub truth_json: &'static str,
}

pub const SYNTHETIC_CORPUS: [SyntheticDoc; 3] = [
    SyntheticDoc { source_id: "cards", html: CARDS_HTML, truth_json: CARDS_TRUTH },
    SyntheticDoc { source_id: "glycodb", html: GLYCODB_HTML, truth_json: GLYCODB_TRUTH },
    SyntheticDoc { source_id: "glycomass", html: GLYCOMASS_HTML, truth_json: GLYCOMASS_TRUTH },
];

pub fn with_base_url(text: &str, base_url: &str) -> String {
    text.replace(BASE_URL_PLACEHOLDER, base_url.trim_end_matches('/'))
}

impl SyntheticDoc {
    pub fn html_for(&self, base_url: &str) -> String {
        with_base_url(self.html, base_url)
    }

    pub fn truth_for(&self, base_url: &str) -> ApiSpec {
        ApiSpec::from_json_str(&with_base_url(self.truth_json, base_url)).expect("bundled reference spec is valid")
    }
}

/// Paths written by [`write_synthetic_project`].
#[derive(Debug, Clone)]
pub struct SyntheticProject {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub ground_truth_dir: PathBuf,
    pub config: PathBuf,
    pub output_dir: PathBuf,
}

/// Writes the synthetic corpus, its manifest, reference specs and a
/// heuristic-backend config under `root`.
pub fn write_synthetic_project(root: &Path, base_url: &str) -> std::io::Result<SyntheticProject> {
    let docs_dir = root.join("corpus");
    let truth_dir = root.join("ground_truth");
    std::fs::create_dir_all(&docs_dir)?;
    std::fs::create_dir_all(&truth_dir)?;
    let mut manifest = Vec::new();
    for doc in &SYNTHETIC_CORPUS {
        let file = format!("{}.html", doc.source_id);
        std::fs::write(docs_dir.join(&file), doc.html_for(base_url))?;
        std::fs::write(truth_dir.join(format!("{}.json", doc.source_id)), with_base_url(doc.truth_json, base_url))?;
        manifest.push(ManifestEntry { source_id: doc.source_id.to_string(), origin: format!("corpus/{file}") });
    }
    let manifest_path = root.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    let output_dir = root.join("out");
    let config = r#"corpus_manifest = "manifest.json"
output_dir = "out"
ground_truth_dir = "ground_truth"
tls_verify = true
workers = 4

[extraction]
backend = "heuristic"

[judge]
backend = "heuristic"

[embedding]
backend = "lexical"

[rate_limit]
per_host_rps = 0.0
"#;
    let config_path = root.join("doc2tool.toml");
    std::fs::write(&config_path, config)?;
    Ok(SyntheticProject { root: root.to_path_buf(), manifest: manifest_path, ground_truth_dir: truth_dir, config: config_path, output_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_spec_shape() {
        let spec = pokemon_golden_spec();
        assert_eq!(spec.title.as_deref(), Some("Pokémon TCG API Documentation"));
        assert_eq!(spec.endpoints[0].required_parameters[0].name, "q");
    }

    #[test]
    fn landing_page_text() {
        let text = crate::ingest::html_to_text(POKEMON_HTML);
        assert!(text.starts_with("Pokémon TCG Developers"));
        assert!(text.contains("GET https://api.pokemontcg.io/v2/cards?q=name:gardevoir (subtypes:mega OR subtypes:vmax)"));
        assert!(!text.contains("analytics"));
    }

    #[test]
    fn synthetic_truth_parses() {
        for doc in &SYNTHETIC_CORPUS {
            let spec = doc.truth_for("http://127.0.0.1:1");
            assert!(!spec.endpoints.is_empty());
        }
    }
}
