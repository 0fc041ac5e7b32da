use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::wire::{is_valid_table_name, Query, Record};

use super::StorageError;

/// Server-side source of truth: named tables of records sorted by key.
#[derive(Debug, Default, Clone)]
pub struct DataStore {
    tables: HashMap<String, Vec<Record>>,
}

impl DataStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a table. Keys must be strictly increasing.
    pub fn insert_table(&mut self, name: impl Into<String>, records: Vec<Record>) -> Result<(), StorageError> {
        let name = name.into();
        if !is_valid_table_name(&name) {
            return Err(StorageError::InvalidTable(format!("invalid table name {name:?}")));
        }
        if let Some(w) = records.windows(2).find(|w| w[0].key >= w[1].key) {
            return Err(StorageError::InvalidTable(format!(
                "table {name}: key {} does not follow {} in strictly increasing order",
                w[1].key, w[0].key
            )));
        }
        self.tables.insert(name, records);
        Ok(())
    }

    /// Loads a table from CSV with header `key,field1,field2,...`.
    pub fn load_csv<R: Read>(&mut self, name: &str, reader: R) -> Result<(), StorageError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv.headers()?.clone();
        if headers.get(0) != Some("key") {
            return Err(StorageError::InvalidTable(format!(
                "table {name}: first CSV column must be `key`"
            )));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut records = Vec::new();
        for row in csv.records() {
            let row = row?;
            let key = row[0].parse::<u64>().map_err(|_| {
                StorageError::InvalidTable(format!("table {name}: bad key {:?}", &row[0]))
            })?;
            let mut record = Record::new(key);
            for (field, value) in names.iter().zip(row.iter().skip(1)) {
                record.fields.insert(field.clone(), value.to_owned());
            }
            records.push(record);
        }
        self.insert_table(name, records)
    }

    /// Loads a CSV file as a table named after the file stem.
    pub fn load_csv_file(&mut self, path: &Path) -> Result<(), StorageError> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| StorageError::InvalidTable(format!("cannot derive a table name from {}", path.display())))?
            .to_owned();
        let file = std::fs::File::open(path)?;
        self.load_csv(&name, std::io::BufReader::new(file))
    }

    pub fn table_len(&self, table: &str) -> Option<usize> {
        self.tables.get(table).map(Vec::len)
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Records a scan of `q` touches: the whole table, or nothing if absent.
    pub fn scan_cost(&self, q: &Query) -> usize {
        self.table_len(q.table()).unwrap_or(0)
    }

    /// Linear walk over the table collecting keys inside the range.
    pub fn scan(&self, q: &Query) -> Result<Vec<Record>, StorageError> {
        let table = self
            .tables
            .get(q.table())
            .ok_or_else(|| StorageError::NotFound(q.clone()))?;
        let hits: Vec<Record> = table.iter().filter(|r| q.contains(r.key)).cloned().collect();
        if hits.is_empty() {
            return Err(StorageError::NotFound(q.clone()));
        }
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store_with_keys(keys: impl IntoIterator<Item = u64>) -> DataStore {
        let mut store = DataStore::new();
        let records = keys
            .into_iter()
            .map(|k| Record::new(k).with_field("v", k.to_string()))
            .collect();
        store.insert_table("records", records).unwrap();
        store
    }

    #[test]
    fn full_range() {
        let store = store_with_keys(1..=1000);
        let q = Query::new("records", 1, 1000).unwrap();
        assert_eq!(store.scan(&q).unwrap().len(), 1000);
        assert_eq!(store.scan_cost(&q), 1000);
    }

    #[test]
    fn empty_range_is_not_found() {
        let store = store_with_keys(1..=1000);
        let q = Query::new("records", 2000, 3000).unwrap();
        assert!(matches!(store.scan(&q), Err(StorageError::NotFound(_))));
    }

    #[test]
    fn point_query() {
        let store = store_with_keys(1..=10);
        let hits = store.scan(&Query::new("records", 5, 5).unwrap()).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].key, 5);
    }

    #[test]
    fn absent_table() {
        let store = store_with_keys(1..=10);
        let q = Query::new("other", 1, 10).unwrap();
        assert!(matches!(store.scan(&q), Err(StorageError::NotFound(_))));
        assert_eq!(store.scan_cost(&q), 0);
    }

    #[test]
    fn rejects_unsorted_keys() {
        let mut store = DataStore::new();
        let err = store.insert_table("t", vec![Record::new(2), Record::new(2)]);
        assert!(err.is_err());
        let err = store.insert_table("t", vec![Record::new(3), Record::new(1)]);
        assert!(err.is_err());
    }

    #[test]
    fn csv_load() {
        let csv = "key,name,city\n1,ann,oslo\n2,\"b,ob\",rome\n";
        let mut store = DataStore::new();
        store.load_csv("people", csv.as_bytes()).unwrap();
        let rows = store.scan(&Query::new("people", 1, 2).unwrap()).unwrap();
        assert_eq!(rows[1].field("name"), Some("b,ob"));
        assert_eq!(rows[0].fields.keys().collect::<Vec<_>>(), ["name", "city"]);
    }

    #[test]
    fn csv_requires_key_column() {
        let mut store = DataStore::new();
        assert!(store.load_csv("t", "id,name\n1,a\n".as_bytes()).is_err());
        assert!(store.load_csv("t", "key,name\nx,a\n".as_bytes()).is_err());
        assert!(store.load_csv("t", "key,name\n2,a\n1,b\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn scan_matches_range_filter(
            mut keys in proptest::collection::btree_set(0u64..500, 0..200),
            a in 0u64..520,
            b in 0u64..520,
        ) {
            keys.insert(0);
            let raw: Vec<u64> = keys.into_iter().collect();
            let store = store_with_keys(raw.clone());
            let (lo, hi) = (a.min(b), a.max(b));
            let q = Query::new("records", lo, hi).unwrap();
            let expected: Vec<u64> = raw.iter().copied().filter(|k| *k >= lo && *k <= hi).collect();
            match store.scan(&q) {
                Ok(rows) => prop_assert_eq!(rows.iter().map(|r| r.key).collect::<Vec<_>>(), expected),
                Err(_) => prop_assert!(expected.is_empty()),
            }
        }
    }
}
