use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;

use crate::wire::{decode_response, encode_response, Query, ResponseEnvelope, Source, Status};

use super::StorageError;

pub const DEFAULT_CACHE_CAPACITY: usize = 64;

/// One cached query result. Timestamps come from the owning cache's
/// logical clock, which ticks once per mutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub query_key: String,
    pub stored_at: u64,
    pub last_used: u64,
    pub payload: ResponseEnvelope,
}

/// Result of a linear probe: the payload on a hit, plus how many entries
/// were examined (the cost driver for the benchmark).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lookup {
    pub hit: Option<ResponseEnvelope>,
    pub scanned: usize,
}

/// Recently used query results, least-recently-used evicted first.
///
/// Entries are kept most-recent first, so the front of the deque is the
/// newest `last_used` and the back is the eviction candidate.
#[derive(Debug, Clone)]
pub struct DataCache {
    capacity: usize,
    entries: VecDeque<CacheEntry>,
    clock: u64,
    hits: u64,
    misses: u64,
}

impl DataCache {
    pub fn new(capacity: usize) -> Result<Self, StorageError> {
        if capacity == 0 {
            return Err(StorageError::InvalidCapacity);
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1024)),
            clock: 0,
            hits: 0,
            misses: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Entries in recency order, most recent first.
    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.iter()
    }

    pub fn keys(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.query_key.clone()).collect()
    }

    /// Non-mutating membership check; does not touch recency or counters.
    pub fn contains(&self, q: &Query) -> bool {
        let key = q.cache_key();
        self.entries.iter().any(|e| e.query_key == key)
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn lookup(&mut self, q: &Query) -> Lookup {
        let key = q.cache_key();
        let Some(pos) = self.entries.iter().position(|e| e.query_key == key) else {
            self.misses += 1;
            return Lookup {
                hit: None,
                scanned: self.entries.len(),
            };
        };
        self.hits += 1;
        let now = self.tick();
        let mut entry = self.entries.remove(pos).expect("position is in bounds");
        entry.last_used = now;
        let mut payload = entry.payload.clone();
        payload.source = Source::Cache;
        self.entries.push_front(entry);
        Lookup {
            hit: Some(payload),
            scanned: pos + 1,
        }
    }

    /// Inserts or replaces the result for `q`. Returns the evicted key, if any.
    pub fn store(&mut self, q: &Query, payload: ResponseEnvelope) -> Result<Option<String>, StorageError> {
        if payload.status != Status::Ok {
            return Err(StorageError::ErrorPayload(payload.error_code));
        }
        let key = q.cache_key();
        let mut evicted = None;
        if let Some(pos) = self.entries.iter().position(|e| e.query_key == key) {
            self.entries.remove(pos);
        } else if self.entries.len() == self.capacity {
            evicted = self.entries.pop_back().map(|e| e.query_key);
        }
        let now = self.tick();
        self.entries.push_front(CacheEntry {
            query_key: key,
            stored_at: now,
            last_used: now,
            payload,
        });
        Ok(evicted)
    }

    /// Writes one line per entry, most recent first:
    /// `query_key|stored_at|last_used|base64(response xml)\n`.
    pub fn save(&self, path: &Path) -> Result<(), StorageError> {
        let mut text = String::new();
        for e in &self.entries {
            text.push_str(&e.query_key);
            text.push('|');
            text.push_str(&e.stored_at.to_string());
            text.push('|');
            text.push_str(&e.last_used.to_string());
            text.push('|');
            text.push_str(&BASE64.encode(encode_response(&e.payload)));
            text.push('\n');
        }
        let tmp = path.with_extension("tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(text.as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a cache file. Hit/miss counters start at zero. If the file
    /// holds more entries than `capacity`, the least recent are dropped.
    pub fn load(path: &Path, capacity: usize) -> Result<Self, StorageError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, capacity)
    }

    pub fn parse(text: &str, capacity: usize) -> Result<Self, StorageError> {
        let mut cache = Self::new(capacity)?;
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Ok(cache);
        }
        let mut prev_used: Option<u64> = None;
        for (idx, line) in body.split('\n').enumerate() {
            let line_no = idx + 1;
            let bad = |reason: String| StorageError::MalformedCacheFile { line: line_no, reason };
            let parts: Vec<&str> = line.split('|').collect();
            let [key, stored, used, payload] = parts.as_slice() else {
                return Err(bad(format!("expected 4 fields, found {}", parts.len())));
            };
            let query = Query::from_cache_key(key).map_err(|e| bad(e.to_string()))?;
            let stored_at: u64 = stored.parse().map_err(|_| bad(format!("bad stored_at {stored:?}")))?;
            let last_used: u64 = used.parse().map_err(|_| bad(format!("bad last_used {used:?}")))?;
            if last_used < stored_at {
                return Err(bad("last_used precedes stored_at".into()));
            }
            if prev_used.is_some_and(|p| last_used >= p) {
                return Err(bad("entries are not in strictly decreasing recency order".into()));
            }
            prev_used = Some(last_used);
            let xml = BASE64.decode(payload).map_err(|e| bad(format!("bad base64: {e}")))?;
            let payload = decode_response(&xml).map_err(|e| bad(e.to_string()))?;
            if payload.status != Status::Ok {
                return Err(bad("cached payload is not an OK response".into()));
            }
            let query_key = query.cache_key();
            if cache.entries.iter().any(|e| e.query_key == query_key) {
                return Err(bad(format!("duplicate entry {query_key}")));
            }
            cache.clock = cache.clock.max(last_used);
            if cache.entries.len() < capacity {
                cache.entries.push_back(CacheEntry {
                    query_key,
                    stored_at,
                    last_used,
                    payload,
                });
            }
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{ErrorCode, Record};
    use proptest::prelude::*;

    fn q(to: u64) -> Query {
        Query::new("t", 1, to).unwrap()
    }

    fn payload(tag: &str) -> ResponseEnvelope {
        ResponseEnvelope::ok(tag, Source::Store, vec![Record::new(1).with_field("tag", tag)])
    }

    #[test]
    fn store_then_lookup() {
        let mut c = DataCache::new(4).unwrap();
        c.store(&q(1), payload("a")).unwrap();
        let hit = c.lookup(&q(1)).hit.unwrap();
        assert_eq!(hit.source, Source::Cache);
        assert_eq!(hit.records, payload("a").records);
        assert_eq!((c.hits(), c.misses()), (1, 0));
    }

    #[test]
    fn empty_cache_misses() {
        let mut c = DataCache::new(4).unwrap();
        let probe = c.lookup(&q(1));
        assert!(probe.hit.is_none());
        assert_eq!(probe.scanned, 0);
        assert_eq!(c.misses(), 1);
    }

    #[test]
    fn distinct_upper_bounds_are_independent() {
        let mut c = DataCache::new(4).unwrap();
        c.store(&q(10), payload("a")).unwrap();
        assert!(c.lookup(&q(11)).hit.is_none());
        c.store(&q(11), payload("b")).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.lookup(&q(10)).hit.unwrap().request_id, "a");
    }

    #[test]
    fn evicts_least_recently_stored() {
        let mut c = DataCache::new(2).unwrap();
        c.store(&q(1), payload("a")).unwrap();
        c.store(&q(2), payload("b")).unwrap();
        assert_eq!(c.store(&q(3), payload("c")).unwrap().as_deref(), Some("t:1:1"));
        assert!(c.lookup(&q(1)).hit.is_none());
    }

    #[test]
    fn lookup_refreshes_recency() {
        // A, B stored; A touched; C evicts B.
        let mut c = DataCache::new(2).unwrap();
        c.store(&q(1), payload("a")).unwrap();
        c.store(&q(2), payload("b")).unwrap();
        assert!(c.lookup(&q(1)).hit.is_some());
        c.store(&q(3), payload("c")).unwrap();
        assert!(c.contains(&q(1)));
        assert!(!c.contains(&q(2)));
        assert!(c.contains(&q(3)));
    }

    #[test]
    fn restoring_replaces_payload() {
        let mut c = DataCache::new(2).unwrap();
        c.store(&q(1), payload("old")).unwrap();
        c.store(&q(1), payload("new")).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.lookup(&q(1)).hit.unwrap().request_id, "new");
    }

    #[test]
    fn rejects_error_payloads_and_zero_capacity() {
        let mut c = DataCache::new(2).unwrap();
        let err = c.store(&q(1), ResponseEnvelope::error("x", ErrorCode::NotFound));
        assert!(matches!(err, Err(StorageError::ErrorPayload(ErrorCode::NotFound))));
        assert!(c.is_empty());
        assert!(DataCache::new(0).is_err());
    }

    #[test]
    fn scanned_counts_position() {
        let mut c = DataCache::new(8).unwrap();
        for i in 1..=5 {
            c.store(&q(i), payload("x")).unwrap();
        }
        // Most recent (5) is at the front; 1 is last.
        assert_eq!(c.lookup(&q(5)).scanned, 1);
        assert_eq!(c.lookup(&q(1)).scanned, 5);
        assert_eq!(c.lookup(&q(99)).scanned, 5);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dc.txt");
        let mut c = DataCache::new(8).unwrap();
        for i in 1..=3 {
            c.store(&q(i), payload(&format!("p{i}|x"))).unwrap();
        }
        c.lookup(&q(1));
        c.save(&path).unwrap();
        let loaded = DataCache::load(&path, 8).unwrap();
        assert_eq!(loaded.keys(), c.keys());
        assert_eq!(loaded.keys(), ["t:1:1", "t:1:3", "t:1:2"]);
        assert_eq!(loaded.entries().cloned().collect::<Vec<_>>(), c.entries().cloned().collect::<Vec<_>>());
        assert_eq!((loaded.hits(), loaded.misses()), (0, 0));
    }

    #[test]
    fn loaded_cache_keeps_ticking_forward() {
        let mut c = DataCache::new(4).unwrap();
        c.store(&q(1), payload("a")).unwrap();
        c.store(&q(2), payload("b")).unwrap();
        let text = {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c");
            c.save(&p).unwrap();
            fs::read_to_string(&p).unwrap()
        };
        let mut loaded = DataCache::parse(&text, 4).unwrap();
        loaded.lookup(&q(1));
        let first = loaded.entries().next().unwrap();
        assert_eq!(first.query_key, "t:1:1");
        assert!(first.last_used > 2);
    }

    #[test]
    fn empty_file_loads_empty() {
        assert!(DataCache::parse("", 4).unwrap().is_empty());
    }

    #[test]
    fn corrupted_lines_are_rejected() {
        let mut c = DataCache::new(4).unwrap();
        c.store(&q(1), payload("a")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c");
        c.save(&p).unwrap();
        let good = fs::read_to_string(&p).unwrap();
        let line = good.trim_end();
        let fields: Vec<&str> = line.split('|').collect();
        let bad_inputs = [
            format!("{}|{}|{}\n", fields[0], fields[1], fields[2]),
            format!("{}|x|{}|{}\n", fields[0], fields[2], fields[3]),
            format!("{}|{}|{}|!!notbase64\n", fields[0], fields[1], fields[2]),
            format!("{}|5|1|{}\n", fields[0], fields[3]),
            format!("nocolons|{}|{}|{}\n", fields[1], fields[2], fields[3]),
            format!("{line}\n{line}\n"),
            format!("{line}\n\n"),
        ];
        for bad in bad_inputs {
            assert!(
                matches!(DataCache::parse(&bad, 4), Err(StorageError::MalformedCacheFile { .. })),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn oversized_file_keeps_most_recent() {
        let mut c = DataCache::new(4).unwrap();
        for i in 1..=4 {
            c.store(&q(i), payload("x")).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c");
        c.save(&p).unwrap();
        let loaded = DataCache::load(&p, 2).unwrap();
        assert_eq!(loaded.keys(), ["t:1:4", "t:1:3"]);
    }

    /// Naive list-based LRU: a Vec in recency order, most recent last.
    struct NaiveLru {
        cap: usize,
        items: Vec<u64>,
    }

    impl NaiveLru {
        fn touch(&mut self, k: u64) -> bool {
            match self.items.iter().position(|x| *x == k) {
                Some(i) => {
                    let v = self.items.remove(i);
                    self.items.push(v);
                    true
                }
                None => false,
            }
        }

        fn put(&mut self, k: u64) {
            if !self.touch(k) {
                if self.items.len() == self.cap {
                    self.items.remove(0);
                }
                self.items.push(k);
            }
        }
    }

    proptest! {
        #[test]
        fn matches_naive_lru(cap in 1usize..=16, ops in proptest::collection::vec((any::<bool>(), 1u64..25), 0..1000)) {
            let mut cache = DataCache::new(cap).unwrap();
            let mut oracle = NaiveLru { cap, items: Vec::new() };
            for (is_store, k) in ops {
                if is_store {
                    cache.store(&q(k), payload("v")).unwrap();
                    oracle.put(k);
                } else {
                    let hit = cache.lookup(&q(k)).hit.is_some();
                    prop_assert_eq!(hit, oracle.touch(k));
                }
                prop_assert!(cache.len() <= cap);
                let expected: Vec<String> = oracle.items.iter().rev().map(|k| q(*k).cache_key()).collect();
                prop_assert_eq!(cache.keys(), expected);
                let used: Vec<u64> = cache.entries().map(|e| e.last_used).collect();
                prop_assert!(used.windows(2).all(|w| w[0] > w[1]));
            }
        }
    }
}
