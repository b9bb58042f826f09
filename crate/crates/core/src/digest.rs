use sha2::{Digest, Sha256};

/// Hex SHA-256 over `parts`, each followed by a NUL separator.
pub fn sha256_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}
