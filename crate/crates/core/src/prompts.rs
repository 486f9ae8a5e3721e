//! Prompt templates sent to remote models. Placeholders use `{name}` and are
//! filled by plain substitution.

/// Instruction prepended to every extraction request.
pub const EXTRACTION_INSTRUCTION: &str =
    "You will be given an API documentation. Extract the API endpoints and output in JSON format.";

pub const RESPONSE_VALIDATION: &str = "Decide if the following API response is an information or an error message.

API Description:
{description}

API Response:
{response}";

pub const PARAMETER_GUESS: &str = "You will be provided with the information of an API and its parameters. The example values of the parameters are missing. You need to guess the parameter values.
You may have failed severl times before. If you guess with similar values, you may fail again. Please be innovative and try different values and formats.

Your previous failed guesses:
***history start
{history}
***history end

API Description:
{description}

Parameter Description:
{param_description}

Your Guess:";

pub const DOCUMENT_CLASSIFICATION: &str = "You need to group the API documentation with the following standards:

Fully Organized: The documentation follows a well defined template, most likely to be from an API platform. It is well-structured, clear, and easy to understand. It includes detailed descriptions, example code, and explanations of how to use the API.
Semi-Organized: Lacks some structure, but still includes most of the necessary information. It may be missing some examples or descriptions, making it slightly more difficult to understand how to use the API.
Unorganized: Missing example or description, or the structure is unclear, making it difficult to understand how to use the API.

===
API Documentation:
{API_DOC}";

pub const PAGE_FILTER: &str = "Does the following web page document at least one callable REST API endpoint (an HTTP method or URL together with how to call it)? Product listings and index pages do not count. Answer with a single word: yes or no.

===
Page:
{page}";

/// Fills `{key}` placeholders in one pass, so substituted values are never
/// rescanned. Unknown placeholders are left as they are.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_all_placeholders() {
        let text = render(RESPONSE_VALIDATION, &[("description", "D"), ("response", "R")]);
        assert!(text.ends_with("API Description:\nD\n\nAPI Response:\nR"));
        assert!(!text.contains('{'));
    }

    #[test]
    fn values_are_not_rescanned() {
        let text = render("{a} {b}", &[("a", "{b}"), ("b", "x")]);
        assert_eq!(text, "{b} x");
    }
}
