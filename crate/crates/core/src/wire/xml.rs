//! Byte-deterministic XML encoding of request and response envelopes.
//!
//! Encoding is hand-written so attribute order and escaping are fixed.
//! Decoding goes through `quick-xml` into a small element tree, which is
//! then checked against the fixed document shape.

use quick_xml::events::{BytesRef, BytesStart, Event};
use quick_xml::Reader;

use super::types::{parse_bound, ErrorCode, Query, Record, RequestEnvelope, ResponseEnvelope, Source, Status};
use super::WireError;

const DECLARATION: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;

/// Escapes the five XML special characters. No other transformation.
pub fn escape(value: &str) -> std::borrow::Cow<'_, str> {
    if !value.contains(['&', '<', '>', '"', '\'']) {
        return value.into();
    }
    let mut out = String::with_capacity(value.len() + 16);
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out.into()
}

pub fn encode_request(req: &RequestEnvelope) -> Vec<u8> {
    let q = &req.query;
    format!(
        r#"{DECLARATION}<spim-request id="{}" client-id="{}" token="{}"><select table="{}"><range from="{}" to="{}"/></select></spim-request>"#,
        escape(&req.request_id),
        escape(&req.client_id),
        escape(&req.token),
        escape(q.table()),
        q.key_from(),
        q.key_to(),
    )
    .into_bytes()
}

pub fn encode_response(resp: &ResponseEnvelope) -> Vec<u8> {
    use std::fmt::Write;

    let mut out = String::with_capacity(128 + resp.records.len() * 96);
    let _ = write!(
        out,
        r#"{DECLARATION}<spim-response id="{}" status="{}" source="{}" code="{}" count="{}"><records>"#,
        escape(&resp.request_id),
        resp.status,
        resp.source,
        resp.error_code,
        resp.records.len(),
    );
    for record in &resp.records {
        let _ = write!(out, r#"<record key="{}">"#, record.key);
        for (name, value) in &record.fields {
            let _ = write!(out, r#"<f n="{}">{}</f>"#, escape(name), escape(value));
        }
        out.push_str("</record>");
    }
    out.push_str("</records></spim-response>");
    out.into_bytes()
}

pub fn decode_request(bytes: &[u8]) -> Result<RequestEnvelope, WireError> {
    let root = parse_document(bytes)?;
    root.expect_name("spim-request")?;
    root.expect_attrs(&["id", "client-id", "token"])?;
    let request_id = root.attr("id")?.to_owned();
    if request_id.is_empty() {
        return Err(malformed("empty request id"));
    }
    let [select] = root.children.as_slice() else {
        return Err(malformed("spim-request must contain exactly one select"));
    };
    select.expect_name("select")?;
    select.expect_attrs(&["table"])?;
    let [range] = select.children.as_slice() else {
        return Err(malformed("select must contain exactly one range"));
    };
    range.expect_name("range")?;
    range.expect_attrs(&["from", "to"])?;
    range.expect_leaf()?;
    let query = Query::new(
        select.attr("table")?,
        parse_bound(range.attr("from")?)?,
        parse_bound(range.attr("to")?)?,
    )?;
    Ok(RequestEnvelope {
        request_id,
        client_id: root.attr("client-id")?.to_owned(),
        token: root.attr("token")?.to_owned(),
        query,
    })
}

pub fn decode_response(bytes: &[u8]) -> Result<ResponseEnvelope, WireError> {
    let root = parse_document(bytes)?;
    root.expect_name("spim-response")?;
    root.expect_attrs(&["id", "status", "source", "code", "count"])?;
    let status: Status = root.attr("status")?.parse()?;
    let source: Source = root.attr("source")?.parse()?;
    let error_code: ErrorCode = root.attr("code")?.parse()?;
    let count = parse_bound(root.attr("count")?)?;

    let [records_el] = root.children.as_slice() else {
        return Err(malformed("spim-response must contain exactly one records element"));
    };
    records_el.expect_name("records")?;
    records_el.expect_attrs(&[])?;

    let mut records = Vec::with_capacity(records_el.children.len());
    for rec_el in &records_el.children {
        rec_el.expect_name("record")?;
        rec_el.expect_attrs(&["key"])?;
        let mut record = Record::new(parse_bound(rec_el.attr("key")?)?);
        for f in &rec_el.children {
            f.expect_name("f")?;
            f.expect_attrs(&["n"])?;
            if !f.children.is_empty() {
                return Err(malformed("field element has child elements"));
            }
            let name = f.attr("n")?.to_owned();
            if record.fields.insert(name, f.text.clone()).is_some() {
                return Err(malformed("duplicate field name in record"));
            }
        }
        records.push(record);
    }
    if records.len() as u64 != count {
        return Err(malformed(format!(
            "count attribute {count} does not match {} records",
            records.len()
        )));
    }
    let resp = ResponseEnvelope {
        request_id: root.attr("id")?.to_owned(),
        status,
        source,
        error_code,
        records,
    };
    resp.validate()?;
    Ok(resp)
}

fn malformed(msg: impl Into<String>) -> WireError {
    WireError::Malformed(msg.into())
}

#[derive(Debug, Default)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
    text: String,
}

impl Element {
    fn expect_name(&self, name: &str) -> Result<(), WireError> {
        if self.name == name {
            Ok(())
        } else {
            Err(malformed(format!("expected <{name}>, found <{}>", self.name)))
        }
    }

    fn expect_attrs(&self, allowed: &[&str]) -> Result<(), WireError> {
        for (k, _) in &self.attrs {
            if !allowed.contains(&k.as_str()) {
                return Err(malformed(format!("unexpected attribute {k:?} on <{}>", self.name)));
            }
        }
        Ok(())
    }

    fn expect_leaf(&self) -> Result<(), WireError> {
        if self.children.is_empty() {
            Ok(())
        } else {
            Err(malformed(format!("<{}> must be empty", self.name)))
        }
    }

    fn attr(&self, key: &str) -> Result<&str, WireError> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| malformed(format!("<{}> is missing attribute {key:?}", self.name)))
    }
}

fn parse_document(bytes: &[u8]) -> Result<Element, WireError> {
    let text = std::str::from_utf8(bytes).map_err(|_| malformed("document is not UTF-8"))?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;

    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(format!("xml error at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(start) => {
                let el = open_element(&start, root.is_some(), stack.is_empty())?;
                stack.push(el);
            }
            Event::Empty(start) => {
                let el = open_element(&start, root.is_some(), stack.is_empty())?;
                attach(&mut stack, &mut root, el);
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| malformed("unbalanced end tag"))?;
                attach(&mut stack, &mut root, el);
            }
            Event::Text(t) => push_text(&mut stack, &t.into_inner())?,
            Event::CData(c) => push_text(&mut stack, &c.into_inner())?,
            Event::GeneralRef(r) => push_text(&mut stack, &resolve_reference(&r)?.to_string())?,
            Event::Decl(_) | Event::Comment(_) => {}
            Event::PI(_) | Event::DocType(_) => {
                return Err(malformed("processing instructions and doctypes are not accepted"))
            }
            Event::Eof => break,
        }
    }
    if !stack.is_empty() {
        return Err(malformed("document ends inside an element"));
    }
    root.ok_or_else(|| malformed("document has no root element"))
}

fn open_element(start: &BytesStart<'_>, have_root: bool, top_level: bool) -> Result<Element, WireError> {
    if have_root && top_level {
        return Err(malformed("more than one root element"));
    }
    let name = start.name().as_ref().to_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(format!("bad attribute: {e}")))?;
        let key = attr.key.as_ref().to_owned();
        let value = quick_xml::escape::unescape(&attr.value)
            .map_err(|e| malformed(format!("bad escape in attribute {key:?}: {e}")))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        ..Element::default()
    })
}

fn attach(stack: &mut [Element], root: &mut Option<Element>, el: Element) {
    match stack.last_mut() {
        Some(parent) => parent.children.push(el),
        None => *root = Some(el),
    }
}

fn push_text(stack: &mut [Element], text: &str) -> Result<(), WireError> {
    match stack.last_mut() {
        // Only <f> carries significant text; whitespace elsewhere is layout.
        Some(el) if el.name == "f" => {
            el.text.push_str(text);
            Ok(())
        }
        _ if text.chars().all(char::is_whitespace) => Ok(()),
        Some(el) => Err(malformed(format!("unexpected text inside <{}>", el.name))),
        None => Err(malformed("text outside the root element")),
    }
}

fn resolve_reference(r: &BytesRef<'_>) -> Result<char, WireError> {
    if let Some(c) = r
        .resolve_char_ref()
        .map_err(|e| malformed(format!("bad character reference: {e}")))?
    {
        return Ok(c);
    }
    match r.as_ref() {
        "amp" => Ok('&'),
        "lt" => Ok('<'),
        "gt" => Ok('>'),
        "quot" => Ok('"'),
        "apos" => Ok('\''),
        other => Err(malformed(format!("unknown entity &{other};"))),
    }
}
