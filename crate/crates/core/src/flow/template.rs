//! Command templates: `{job.id}`, `{job.ws}` and `{job.sp.<path>}`
//! placeholders; `{job._id}` is accepted as an alias of `{job.id}`.
//! `{{` and `}}` produce literal braces.

use serde_json::Value;

use super::FlowError;
use crate::canonical::{canonical_value_string, write_number};
use crate::project::Job;
use crate::query::lookup_path;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Id,
    Workspace,
    StatePoint(&'a str),
}

fn tokenize(cmd: &str) -> Result<Vec<Piece<'_>>, FlowError> {
    let err = |placeholder: &str, reason: &str| FlowError::Template {
        cmd: cmd.to_owned(),
        placeholder: placeholder.to_owned(),
        reason: reason.to_owned(),
    };
    let mut out = Vec::new();
    let mut rest = cmd;
    while !rest.is_empty() {
        let Some(pos) = rest.find(['{', '}']) else {
            out.push(Piece::Text(rest));
            break;
        };
        if pos > 0 {
            out.push(Piece::Text(&rest[..pos]));
        }
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push(Piece::Brace('{'));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push(Piece::Brace('}'));
            rest = after;
        } else if tail.starts_with('}') {
            return Err(err("}", "unmatched '}'"));
        } else {
            let end = tail.find('}').ok_or_else(|| err(tail, "unclosed placeholder"))?;
            let name = &tail[1..end];
            let piece = match name {
                "job.id" | "job._id" => Piece::Id,
                "job.ws" => Piece::Workspace,
                _ => match name.strip_prefix("job.sp.") {
                    Some(path) if !path.is_empty() && path.split('.').all(|s| !s.is_empty()) => Piece::StatePoint(path),
                    _ => return Err(err(name, "unknown placeholder")),
                },
            };
            out.push(piece);
            rest = &tail[end + 1..];
        }
    }
    Ok(out)
}

/// Checks placeholder syntax without a job.
pub fn validate_template(cmd: &str) -> Result<(), FlowError> {
    tokenize(cmd).map(|_| ())
}

/// Substitutes all placeholders for `job`.
pub fn render_cmd(cmd: &str, job: &Job) -> Result<String, FlowError> {
    let mut out = String::with_capacity(cmd.len() + 32);
    for piece in tokenize(cmd)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Brace(c) => out.push(c),
            Piece::Id => out.push_str(job.id().as_str()),
            Piece::Workspace => out.push_str(&job.workspace().to_string_lossy()),
            Piece::StatePoint(path) => {
                let value = lookup_path(job.statepoint(), path).ok_or_else(|| FlowError::Template {
                    cmd: cmd.to_owned(),
                    placeholder: format!("job.sp.{path}"),
                    reason: "not present in the state point".into(),
                })?;
                render_value(value, &mut out);
            }
        }
    }
    Ok(out)
}

fn render_value(value: &Value, out: &mut String) {
    match value {
        Value::String(s) => out.push_str(s),
        Value::Number(n) => write_number(n, out),
        other => out.push_str(&canonical_value_string(other)),
    }
}
