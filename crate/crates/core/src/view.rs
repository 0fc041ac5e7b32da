//! Client views: renderers that turn one response into text, HTML or JSON,
//! and mashup composition of responses from several services.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::wire::{escape, ResponseEnvelope, Source, Status};

/// Field added to every composed record naming the service it came from.
pub const SOURCE_FIELD: &str = "_source";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ViewError {
    #[error("cannot render an error response ({0})")]
    Render(String),
    #[error("cannot compose: part {label:?} is an error response ({code})")]
    Compose { label: String, code: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderKind {
    #[default]
    Text,
    Html,
    Json,
}

impl FromStr for RenderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "html" => Ok(Self::Html),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown view {other:?} (expected text, html or json)")),
        }
    }
}

impl fmt::Display for RenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Html => "html",
            Self::Json => "json",
        })
    }
}

pub fn render(resp: &ResponseEnvelope, kind: RenderKind) -> Result<Vec<u8>, ViewError> {
    if resp.status != Status::Ok {
        return Err(ViewError::Render(resp.error_code.to_string()));
    }
    Ok(match kind {
        RenderKind::Text => render_text(resp),
        RenderKind::Html => render_html(resp),
        RenderKind::Json => render_json(resp),
    }
    .into_bytes())
}

/// Field names across all records, in first-seen order.
fn columns(resp: &ResponseEnvelope) -> IndexSet<&str> {
    resp.records
        .iter()
        .flat_map(|r| r.fields.keys().map(String::as_str))
        .collect()
}

fn render_text(resp: &ResponseEnvelope) -> String {
    let cols = columns(resp);
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(resp.records.len() + 1);
    rows.push(std::iter::once("key").chain(cols.iter().copied()).map(str::to_owned).collect());
    for r in &resp.records {
        let mut row = vec![r.key.to_string()];
        row.extend(cols.iter().map(|c| r.field(c).unwrap_or("").to_owned()));
        rows.push(row);
    }
    let mut widths = vec![0usize; cols.len() + 1];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', w - cell.chars().count()));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn render_html(resp: &ResponseEnvelope) -> String {
    let cols = columns(resp);
    let mut out = String::from("<table><thead><tr><th>key</th>");
    for c in &cols {
        out.push_str(&format!("<th>{}</th>", escape(c)));
    }
    out.push_str("</tr></thead><tbody>");
    for r in &resp.records {
        out.push_str(&format!("<tr><td>{}</td>", r.key));
        for c in &cols {
            match r.field(c) {
                Some(v) => out.push_str(&format!("<td>{}</td>", escape(v))),
                None => out.push_str(r#"<td class="absent"></td>"#),
            }
        }
        out.push_str("</tr>");
    }
    out.push_str("</tbody></table>\n");
    out
}

fn render_json(resp: &ResponseEnvelope) -> String {
    let rows: Vec<Value> = resp
        .records
        .iter()
        .map(|r| {
            let fields: Map<String, Value> = r
                .fields
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect();
            let mut obj = Map::new();
            obj.insert("key".into(), Value::from(r.key));
            obj.insert("fields".into(), Value::Object(fields));
            Value::Object(obj)
        })
        .collect();
    let mut out = Value::Array(rows).to_string();
    out.push('\n');
    out
}

/// Merges labelled responses into one. Each record gains a `_source`
/// field naming its part; records that already carry one (from an earlier
/// composition) keep it. Duplicate keys across parts are all retained.
pub fn compose(parts: &[(String, ResponseEnvelope)]) -> Result<ResponseEnvelope, ViewError> {
    let mut records = Vec::new();
    let mut any_store = false;
    for (label, resp) in parts {
        if resp.status != Status::Ok {
            return Err(ViewError::Compose {
                label: label.clone(),
                code: resp.error_code.to_string(),
            });
        }
        any_store |= resp.source == Source::Store;
        for r in &resp.records {
            let mut r = r.clone();
            r.fields.entry(SOURCE_FIELD.to_owned()).or_insert_with(|| label.clone());
            records.push(r);
        }
    }
    let id = format!(
        "mashup:{}",
        parts.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join("+")
    );
    // Composed records may repeat keys across services, so this envelope is
    // built directly rather than through the single-source constructor.
    Ok(ResponseEnvelope {
        request_id: id,
        status: Status::Ok,
        source: if any_store { Source::Store } else { Source::Cache },
        error_code: crate::wire::ErrorCode::None,
        records,
    })
}
