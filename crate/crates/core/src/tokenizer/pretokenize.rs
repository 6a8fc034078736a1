//! Splits text into the units BPE merges never cross.

use serde::{Deserialize, Serialize};

/// Pretokenization scheme.
///
/// Both schemes emit letter runs and digit runs with an optional single
/// leading space, the English contractions (`'s`, `'t`, `'re`, `'ve`, `'m`,
/// `'ll`, `'d`) as their own units, and whitespace runs where the last space
/// before a word is left to prefix it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pretokenizer {
    /// Every punctuation character is its own unit, so `):` is two tokens.
    #[default]
    Code,
    /// Consecutive punctuation forms one unit, the usual byte-level BPE rule.
    Gpt2,
}

#[derive(PartialEq, Clone, Copy)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class(c: char) -> Class {
    if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["s", "t", "re", "ve", "m", "ll", "d"];

impl Pretokenizer {
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let n = chars.len();
        let at = |i: usize| if i < n { chars[i].0 } else { text.len() };
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let c = chars[i].1;
            if c == '\'' {
                let rest = &text[at(i + 1)..];
                if let Some(s) = CONTRACTIONS.iter().find(|s| rest.starts_with(**s)) {
                    let end = i + 1 + s.chars().count();
                    out.push(&text[at(i)..at(end)]);
                    i = end;
                    continue;
                }
            }
            let head = if c == ' ' && i + 1 < n && class(chars[i + 1].1) != Class::Space {
                i + 1
            } else {
                i
            };
            let k = match class(chars[head].1) {
                Class::Space => {
                    let mut k = i;
                    while k < n && class(chars[k].1) == Class::Space {
                        k += 1;
                    }
                    if k == n || k - i == 1 {
                        k
                    } else {
                        k - 1
                    }
                }
                Class::Other if *self == Pretokenizer::Code => head + 1,
                cls => {
                    let mut k = head + 1;
                    while k < n && class(chars[k].1) == cls {
                        k += 1;
                    }
                    k
                }
            };
            out.push(&text[at(i)..at(k)]);
            i = k;
        }
        out
    }
}
