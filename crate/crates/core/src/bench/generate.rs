//! Seeded synthetic stores.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::storage::StorageError;

pub const DEFAULT_PAYLOAD_WIDTH: usize = 64;

const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

/// CSV text with header `key,payload` and keys `1..=n`.
pub fn generate_store(n: u64, seed: u64) -> String {
    generate_store_with_width(n, seed, DEFAULT_PAYLOAD_WIDTH)
}

pub fn generate_store_with_width(n: u64, seed: u64, width: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(16 + n as usize * (width + 8));
    out.push_str("key,payload\n");
    for key in 1..=n {
        out.push_str(&key.to_string());
        out.push(',');
        out.extend((0..width).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char));
        out.push('\n');
    }
    out
}

pub fn write_store(path: &Path, n: u64, seed: u64) -> Result<(), StorageError> {
    std::fs::write(path, generate_store(n, seed))?;
    Ok(())
}
