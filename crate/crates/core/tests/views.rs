use std::collections::BTreeSet;

use proptest::prelude::*;
use quick_xml::events::Event;
use spim_core::view::{compose, render, RenderKind, SOURCE_FIELD};
use spim_core::wire::{Record, ResponseEnvelope, Source};

type Triples = BTreeSet<(u64, String, String)>;

fn triples(resp: &ResponseEnvelope) -> Triples {
    resp.records
        .iter()
        .flat_map(|r| r.fields.iter().map(move |(k, v)| (r.key, k.clone(), v.clone())))
        .collect()
}

fn from_json(bytes: &[u8]) -> Triples {
    let v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    let mut out = Triples::new();
    for row in v.as_array().unwrap() {
        let key = row["key"].as_u64().unwrap();
        for (k, v) in row["fields"].as_object().unwrap() {
            out.insert((key, k.clone(), v.as_str().unwrap().to_owned()));
        }
    }
    out
}

/// Reads the table back cell by cell; absent cells carry a class marker.
fn from_html(bytes: &[u8]) -> Triples {
    let mut reader = quick_xml::Reader::from_reader(bytes);
    let (mut header, mut row): (Vec<String>, Vec<Option<String>>) = (Vec::new(), Vec::new());
    let (mut in_head, mut cell, mut absent) = (false, None::<String>, false);
    let mut out = Triples::new();
    loop {
        match reader.read_event().unwrap() {
            Event::Start(e) => match e.name().as_ref() {
                "thead" => in_head = true,
                "th" | "td" => {
                    absent = e.attributes().any(|a| a.unwrap().key.as_ref() == "class");
                    cell = Some(String::new());
                }
                _ => {}
            },
            Event::Text(t) => {
                if let Some(c) = cell.as_mut() {
                    c.push_str(&t.into_inner());
                }
            }
            Event::GeneralRef(r) => {
                if let Some(c) = cell.as_mut() {
                    c.push_str(match r.as_ref() {
                        "lt" => "<",
                        "gt" => ">",
                        "amp" => "&",
                        "quot" => "\"",
                        "apos" => "'",
                        other => panic!("unexpected entity {other}"),
                    });
                }
            }
            Event::End(e) => match e.name().as_ref() {
                "thead" => in_head = false,
                "th" => header.push(cell.take().unwrap()),
                "td" => {
                    let c = cell.take().unwrap();
                    row.push((!absent).then_some(c));
                }
                "tr" if !in_head => {
                    let key: u64 = row[0].as_ref().unwrap().parse().unwrap();
                    for (name, value) in header.iter().zip(&row).skip(1) {
                        if let Some(v) = value {
                            out.insert((key, name.clone(), v.clone()));
                        }
                    }
                    row.clear();
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    out
}

/// Splits on whitespace; only valid for values without spaces and with
/// every record carrying every field.
fn from_text(bytes: &[u8]) -> Triples {
    let text = std::str::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let mut out = Triples::new();
    for line in lines {
        let cells: Vec<&str> = line.split_whitespace().collect();
        let key: u64 = cells[0].parse().unwrap();
        for (name, v) in header.iter().zip(&cells).skip(1) {
            out.insert((key, name.to_string(), v.to_string()));
        }
    }
    out
}

const ANY_TEXT: &str = "[a-zA-Z0-9 <>&\"'éß_.-]{0,12}";

fn envelope(names: &'static str, values: &'static str) -> impl Strategy<Value = ResponseEnvelope> {
    (prop::collection::btree_set(names, 1..5), prop::collection::btree_set(any::<u32>(), 0..10))
        .prop_flat_map(move |(names, keys)| {
            let names: Vec<String> = names.into_iter().collect();
            let n = names.len();
            let rows = prop::collection::vec(prop::collection::vec(values, n), keys.len());
            (Just(names), Just(keys), rows)
        })
        .prop_map(|(names, keys, rows)| {
            let records = keys
                .into_iter()
                .zip(rows)
                .map(|(k, vals)| {
                    names
                        .iter()
                        .zip(vals)
                        .fold(Record::new(k as u64), |r, (n, v)| r.with_field(n.clone(), v))
                })
                .collect();
            ResponseEnvelope::ok("v", Source::Store, records)
        })
}

proptest! {
    #[test]
    fn json_and_html_are_faithful(resp in envelope(ANY_TEXT, ANY_TEXT)) {
        let expected = triples(&resp);
        prop_assert_eq!(from_json(&render(&resp, RenderKind::Json).unwrap()), expected.clone());
        prop_assert_eq!(from_html(&render(&resp, RenderKind::Html).unwrap()), expected);
    }

    #[test]
    fn text_is_faithful(resp in envelope("[a-z_]{1,8}", "[A-Za-z0-9_.-]{1,10}")) {
        let out = render(&resp, RenderKind::Text).unwrap();
        prop_assert_eq!(out.iter().filter(|b| **b == b'\n').count(), resp.records.len() + 1);
        prop_assert_eq!(from_text(&out), triples(&resp));
    }

    #[test]
    fn compose_is_associative(
        a in envelope("[a-z]{1,4}", "[a-z]{0,4}"),
        b in envelope("[a-z]{1,4}", "[a-z]{0,4}"),
        c in envelope("[a-z]{1,4}", "[a-z]{0,4}"),
    ) {
        let ab = compose(&[("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
        let left = compose(&[("ab".into(), ab), ("c".into(), c.clone())]).unwrap();
        let bc = compose(&[("b".into(), b), ("c".into(), c)]).unwrap();
        let right = compose(&[("a".into(), a), ("bc".into(), bc)]).unwrap();
        prop_assert_eq!(&left.records, &right.records);
        prop_assert_eq!(left.source, right.source);
    }
}

#[test]
fn rendered_mashup_keeps_duplicate_keys() {
    let part = |v: &str| ResponseEnvelope::ok("x", Source::Cache, vec![Record::new(7).with_field("v", v)]);
    let merged = compose(&[("north".into(), part("n")), ("south".into(), part("s"))]).unwrap();
    let got = from_json(&render(&merged, RenderKind::Json).unwrap());
    assert!(got.contains(&(7, SOURCE_FIELD.into(), "north".into())));
    assert!(got.contains(&(7, SOURCE_FIELD.into(), "south".into())));
}
