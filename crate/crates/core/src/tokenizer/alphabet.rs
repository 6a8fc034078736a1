//! Printable stand-ins for the 256 byte values.
//!
//! Printable Latin-1 bytes map to themselves; the remaining 68 bytes map to
//! consecutive code points from U+0100 in byte order. Space (0x20) becomes
//! `Ġ` and newline (0x0A) becomes `Ċ`.

use std::collections::HashMap;
use std::sync::OnceLock;

/// Marker carried by a subword that starts right after a space.
pub const SPACE_MARKER: char = 'Ġ';

struct Tables {
    to_char: [char; 256],
    to_byte: HashMap<char, u8>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let printable = |b: u32| (0x21..=0x7E).contains(&b) || (0xA1..=0xAC).contains(&b) || (0xAE..=0xFF).contains(&b);
        let mut to_char = ['\0'; 256];
        let mut next = 0x100u32;
        for b in 0..256u32 {
            let cp = if printable(b) {
                b
            } else {
                next += 1;
                next - 1
            };
            to_char[b as usize] = char::from_u32(cp).expect("valid code point");
        }
        let to_byte = to_char.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Tables { to_char, to_byte }
    })
}

#[inline]
pub fn byte_to_char(b: u8) -> char {
    tables().to_char[b as usize]
}

#[inline]
pub fn char_to_byte(c: char) -> Option<u8> {
    tables().to_byte.get(&c).copied()
}

/// Alphabet rendering of a byte string.
pub fn encode_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| byte_to_char(b)).collect()
}

/// Bytes behind an alphabet string; `None` if a char is outside the alphabet.
pub fn decode_symbols(s: &str) -> Option<Vec<u8>> {
    s.chars().map(char_to_byte).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn injective_and_printable() {
        let chars: HashSet<char> = (0..=255u8).map(byte_to_char).collect();
        assert_eq!(chars.len(), 256);
        assert!(chars.iter().all(|c| !c.is_whitespace() && !c.is_control()));
        for b in 0..=255u8 {
            assert_eq!(char_to_byte(byte_to_char(b)), Some(b));
        }
    }

    #[test]
    fn conventional_markers() {
        assert_eq!(byte_to_char(b' '), SPACE_MARKER);
        assert_eq!(byte_to_char(b'\n'), 'Ċ');
        assert_eq!(byte_to_char(b'a'), 'a');
        assert_eq!(encode_bytes(" split".as_bytes()), "Ġsplit");
    }
}
