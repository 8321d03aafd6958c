use serde_json::Value;

use super::filter::{parse_entry, parse_filter_value, Filter};
use super::QueryError;

/// Parses command-line filter tokens: either one JSON filter document, or
/// `path[.$op] value` pairs combined by conjunction. Values are read as
/// JSON when possible and as plain strings otherwise.
pub fn parse_cli_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Option<Filter>, QueryError> {
    match tokens {
        [] => Ok(None),
        [single] => {
            let text = single.as_ref();
            match serde_json::from_str::<Value>(text) {
                Ok(v @ Value::Object(_)) => parse_filter_value(&v),
                _ => Err(QueryError::Usage(format!(
                    "expected a JSON filter document or `path value` pairs, got {text:?}"
                ))),
            }
        }
        _ if tokens.len() % 2 == 1 => Err(QueryError::Usage(format!(
            "odd number of filter tokens ({}); expected `path value` pairs",
            tokens.len()
        ))),
        _ => {
            let members = tokens
                .chunks(2)
                .map(|pair| {
                    let path = pair[0].as_ref();
                    let value = parse_value_token(pair[1].as_ref());
                    parse_entry(path, &value, "").map_err(|e| match e {
                        QueryError::Parse { path, message } => QueryError::Usage(format!("{path}: {message}")),
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Some(Filter::and(members)))
        }
    }
}

fn parse_value_token(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Op;
    use serde_json::json;

    #[test]
    fn find_tokens_with_operator() {
        assert_eq!(
            parse_cli_tokens(&["p.$gt", "1.0"]).unwrap(),
            Some(Filter::cmp("p", Op::Gt(json!(1.0))))
        );
    }

    #[test]
    fn pairs_combine_as_and() {
        assert_eq!(
            parse_cli_tokens(&["N", "1000", "kT", "1.0"]).unwrap(),
            Some(Filter::And(vec![
                Filter::cmp("N", Op::Eq(json!(1000))),
                Filter::cmp("kT", Op::Eq(json!(1.0))),
            ]))
        );
    }

    #[test]
    fn non_json_value_is_string() {
        assert_eq!(
            parse_cli_tokens(&["tag", "abc"]).unwrap(),
            Some(Filter::cmp("tag", Op::Eq(json!("abc"))))
        );
    }

    #[test]
    fn json_document_token() {
        assert_eq!(
            parse_cli_tokens(&[r#"{"p.$gt": 1.0}"#]).unwrap(),
            Some(Filter::cmp("p", Op::Gt(json!(1.0))))
        );
    }

    #[test]
    fn empty_means_everything() {
        assert_eq!(parse_cli_tokens::<&str>(&[]).unwrap(), None);
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(parse_cli_tokens(&["a", "1", "b"]), Err(QueryError::Usage(_))));
        assert!(matches!(
            parse_cli_tokens(&["p.$bogus", "1"]),
            Err(QueryError::Usage(_))
        ));
        assert!(matches!(parse_cli_tokens(&["p"]), Err(QueryError::Usage(_))));
    }

    #[test]
    fn operand_json_values() {
        assert_eq!(
            parse_cli_tokens(&["a.$in", "[1, 2]", "b.$exists", "false"]).unwrap(),
            Some(Filter::And(vec![
                Filter::cmp("a", Op::In(vec![json!(1), json!(2)])),
                Filter::cmp("b", Op::Exists(false)),
            ]))
        );
    }
}
