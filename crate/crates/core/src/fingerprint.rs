use sha2::{Digest, Sha256};

/// Short hex fingerprint of a byte string, used to tie reports and datasets
/// back to the exact inputs that produced them.
pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_input_sensitive() {
        let a = fingerprint_bytes(b"frame f");
        let b = fingerprint_bytes(b"frame f");
        let c = fingerprint_bytes(b"frame g");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }
}
