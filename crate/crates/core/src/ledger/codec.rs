//! Canonical byte encoding used for every hash and signature.
//!
//! Each field is written as a 4-byte big-endian length followed by its bytes.
//! Integers are 8-byte big-endian, reals are their shortest round-trip decimal
//! text, strings are UTF-8. Nested structures (maps, optionals) are encoded
//! into a single field so the outer framing stays flat.

#[derive(Debug, Default, Clone)]
pub struct CanonicalEncoder {
    buf: Vec<u8>,
}

impl CanonicalEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, data: &[u8]) -> &mut Self {
        let len = u32::try_from(data.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(data);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn real(&mut self, v: f64) -> &mut Self {
        self.str(&format_real(v))
    }

    /// Presence byte followed by the value, framed as one field.
    pub fn opt_str(&mut self, s: Option<&str>) -> &mut Self {
        match s {
            None => self.bytes(&[0]),
            Some(s) => {
                let mut inner = Vec::with_capacity(s.len() + 1);
                inner.push(1);
                inner.extend_from_slice(s.as_bytes());
                self.bytes(&inner)
            }
        }
    }

    pub fn nested(&mut self, inner: CanonicalEncoder) -> &mut Self {
        self.bytes(&inner.buf)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }
}

/// Shortest decimal text that round-trips, e.g. `0.1`, `21`, `-3.5`.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        // Fold -0.0 into 0.0 so equal values encode equally.
        return "0".to_owned();
    }
    format!("{v}")
}
