//! Path placeholder syntaxes, rendering and query encoding.
//!
//!     cargo run --example url_templates

use std::collections::HashMap;

use doc2tool::encoding::{decode_query, encode_query};
use doc2tool::template::parse_url_template;

fn main() {
    for raw in [
        "https://api.example.com/users/:user_id/posts/:post_id",
        "https://api.example.com/users/{user_id}/posts/{post_id}",
        "https://api.example.com/users/<user_id>/posts/<post_id>",
        "/v1/files/{name}.json",
    ] {
        let t = parse_url_template(raw).expect("well-formed");
        println!("{raw}\n  canonical {}\n  shape     {}\n  params    {:?}", t.canonical(), t.path_shape(), t.path_params());
    }

    let t = parse_url_template("https://api.example.com/search/{term}").unwrap();
    let values = HashMap::from([("term", "a+b=c d/e")]);
    println!("\nrendered: {}", t.render(|n| values.get(n).map(|v| v.to_string())).unwrap());

    let query = encode_query([("q", "name:gardevoir"), ("expr", "1+1=2")]);
    println!("query:    {query}");
    println!("decoded:  {:?}", decode_query(&query));

    match parse_url_template("https://api.example.com/users/{id") {
        Ok(_) => unreachable!(),
        Err(e) => println!("error:    {e}"),
    }
}
