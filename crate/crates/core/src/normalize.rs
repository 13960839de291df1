//! Full-width (double-byte) to ASCII folding for digits and Latin letters.

use alloc::string::String;

/// Maps U+FF10..U+FF19, U+FF21..U+FF3A and U+FF41..U+FF5A to their ASCII
/// counterparts; other characters are unchanged.
pub fn fullwidth_char(c: char) -> char {
    match c {
        '\u{FF10}'..='\u{FF19}' | '\u{FF21}'..='\u{FF3A}' | '\u{FF41}'..='\u{FF5A}' => {
            char::from_u32(c as u32 - 0xFEE0).unwrap_or(c)
        }
        _ => c,
    }
}

pub fn fullwidth_to_ascii(s: &str) -> String {
    s.chars().map(fullwidth_char).collect()
}
