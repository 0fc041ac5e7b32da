use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;

use super::WireError;

/// Inclusive key-range selection against one named table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    table: String,
    key_from: u64,
    key_to: u64,
}

impl Query {
    pub fn new(table: impl Into<String>, key_from: u64, key_to: u64) -> Result<Self, WireError> {
        let table = table.into();
        if !is_valid_table_name(&table) {
            return Err(WireError::Malformed(format!("invalid table name {table:?}")));
        }
        if key_from > key_to {
            return Err(WireError::Malformed(format!(
                "range lower bound {key_from} exceeds upper bound {key_to}"
            )));
        }
        Ok(Self {
            table,
            key_from,
            key_to,
        })
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn key_from(&self) -> u64 {
        self.key_from
    }

    pub fn key_to(&self) -> u64 {
        self.key_to
    }

    pub fn contains(&self, key: u64) -> bool {
        (self.key_from..=self.key_to).contains(&key)
    }

    /// Canonical `table:from:to` form used to key cache entries.
    pub fn cache_key(&self) -> String {
        format!("{}:{}:{}", self.table, self.key_from, self.key_to)
    }

    pub fn from_cache_key(key: &str) -> Result<Self, WireError> {
        let mut parts = key.split(':');
        let (Some(table), Some(from), Some(to), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(WireError::Malformed(format!("bad query key {key:?}")));
        };
        Query::new(table, parse_bound(from)?, parse_bound(to)?)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}..={}]", self.table, self.key_from, self.key_to)
    }
}

pub(crate) fn parse_bound(s: &str) -> Result<u64, WireError> {
    // u64::from_str accepts a leading '+', which the schema does not.
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(WireError::Malformed(format!("non-numeric bound {s:?}")));
    }
    s.parse()
        .map_err(|_| WireError::Malformed(format!("bound out of range {s:?}")))
}

pub fn is_valid_table_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// One row: an integer key plus named string fields in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub key: u64,
    pub fields: IndexMap<String, String>,
}

impl Record {
    pub fn new(key: u64) -> Self {
        Self {
            key,
            fields: IndexMap::new(),
        }
    }

    pub fn with_field(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.fields.insert(name.into(), value.into());
        self
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields.get(name).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestEnvelope {
    pub request_id: String,
    pub client_id: String,
    pub token: String,
    pub query: Query,
}

impl RequestEnvelope {
    pub fn new(
        request_id: impl Into<String>,
        client_id: impl Into<String>,
        token: impl Into<String>,
        query: Query,
    ) -> Self {
        Self {
            request_id: request_id.into(),
            client_id: client_id.into(),
            token: token.into(),
            query,
        }
    }
}

macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = WireError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(WireError::Malformed(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

wire_enum!(Status { Ok => "OK", Error => "ERROR" });

wire_enum!(
    /// Where a successful response's records came from.
    Source { Cache => "cache", Store => "store", None => "none" }
);

wire_enum!(ErrorCode {
    None => "NONE",
    CacheMiss => "CACHE_MISS",
    NotFound => "NOT_FOUND",
    Unauthorized => "UNAUTHORIZED",
    Malformed => "MALFORMED",
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseEnvelope {
    pub request_id: String,
    pub status: Status,
    pub source: Source,
    pub error_code: ErrorCode,
    pub records: Vec<Record>,
}

impl ResponseEnvelope {
    pub fn ok(request_id: impl Into<String>, source: Source, records: Vec<Record>) -> Self {
        debug_assert!(source != Source::None);
        Self {
            request_id: request_id.into(),
            status: Status::Ok,
            source,
            error_code: ErrorCode::None,
            records,
        }
    }

    pub fn error(request_id: impl Into<String>, code: ErrorCode) -> Self {
        debug_assert!(code != ErrorCode::None);
        Self {
            request_id: request_id.into(),
            status: Status::Error,
            source: Source::None,
            error_code: code,
            records: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Checks the status/source/code coupling and key uniqueness.
    pub fn validate(&self) -> Result<(), WireError> {
        match self.status {
            Status::Ok => {
                if self.error_code != ErrorCode::None {
                    return Err(WireError::Malformed("OK response carries an error code".into()));
                }
                if self.source == Source::None {
                    return Err(WireError::Malformed("OK response without a source".into()));
                }
            }
            Status::Error => {
                if self.error_code == ErrorCode::None {
                    return Err(WireError::Malformed("ERROR response without an error code".into()));
                }
                if !self.records.is_empty() {
                    return Err(WireError::Malformed("ERROR response carries records".into()));
                }
            }
        }
        let mut keys: Vec<u64> = self.records.iter().map(|r| r.key).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(WireError::Malformed("duplicate record key".into()));
        }
        Ok(())
    }
}
