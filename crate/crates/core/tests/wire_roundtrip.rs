use proptest::prelude::*;
use spim_core::wire::{
    decode_request, decode_response, deframe, encode_request, encode_response, frame, ErrorCode, Query, Record,
    RequestEnvelope, ResponseEnvelope, Source,
};

// Any character XML 1.0 can carry, weighted towards the ones needing escapes.
fn xml_text() -> impl Strategy<Value = String> {
    let ch = prop_oneof![
        4 => any::<char>().prop_filter("xml char", |c| {
            matches!(*c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
        }),
        1 => prop::sample::select(vec!['<', '>', '&', '"', '\'', ' ', '\n']),
    ];
    prop::collection::vec(ch, 0..24).prop_map(|v| v.into_iter().collect())
}

fn table_name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_]{1,12}"
}

fn query() -> impl Strategy<Value = Query> {
    (table_name(), any::<u64>(), any::<u64>()).prop_map(|(t, a, b)| Query::new(t, a.min(b), a.max(b)).unwrap())
}

fn record(key: u64) -> impl Strategy<Value = Record> {
    prop::collection::vec((xml_text(), xml_text()), 0..5).prop_map(move |fields| {
        fields
            .into_iter()
            .fold(Record::new(key), |r, (name, value)| {
                if r.field(&name).is_some() {
                    r
                } else {
                    r.with_field(name, value)
                }
            })
    })
}

fn response() -> impl Strategy<Value = ResponseEnvelope> {
    let ok = (
        xml_text(),
        prop::sample::select(vec![Source::Cache, Source::Store]),
        prop::collection::btree_set(any::<u64>(), 0..8),
    )
        .prop_flat_map(|(id, source, keys)| {
            let records: Vec<_> = keys.into_iter().map(record).collect();
            (Just(id), Just(source), records)
        })
        .prop_map(|(id, source, records)| ResponseEnvelope::ok(id, source, records));
    let err = (
        xml_text(),
        prop::sample::select(vec![
            ErrorCode::CacheMiss,
            ErrorCode::NotFound,
            ErrorCode::Unauthorized,
            ErrorCode::Malformed,
        ]),
    )
        .prop_map(|(id, code)| ResponseEnvelope::error(id, code));
    prop_oneof![3 => ok, 1 => err]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn request_roundtrip(id in xml_text().prop_filter("non-empty", |s| !s.is_empty()), client in xml_text(), token in xml_text(), q in query()) {
        let req = RequestEnvelope::new(id, client, token, q);
        prop_assert_eq!(decode_request(&encode_request(&req)).unwrap(), req);
    }

    #[test]
    fn response_roundtrip(resp in response()) {
        let bytes = encode_response(&resp);
        prop_assert_eq!(decode_response(&bytes).unwrap(), resp.clone());
        // Framed and deframed, the document is unchanged too.
        let framed = frame(&bytes).unwrap();
        prop_assert_eq!(deframe(&mut framed.as_slice()).unwrap(), bytes);
    }

    #[test]
    fn encoding_is_deterministic(resp in response()) {
        prop_assert_eq!(encode_response(&resp), encode_response(&resp.clone()));
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_request(&bytes);
        let _ = decode_response(&bytes);
    }
}
