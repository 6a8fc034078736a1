/// Word-level tokenizer for the classical baseline.
///
/// Whitespace separates tokens and is dropped, except that every newline is
/// kept as a `"\n"` token. Within a chunk, maximal runs of `[A-Za-z0-9_]`
/// become one token and every other character stands alone.
pub fn word_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    let flush = |run: &mut String, out: &mut Vec<String>| {
        if !run.is_empty() {
            out.push(std::mem::take(run));
        }
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            run.push(c);
            continue;
        }
        flush(&mut run, &mut out);
        if c == '\n' {
            out.push("\n".to_string());
        } else if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    flush(&mut run, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!(word_tokenize("").is_empty());
        assert_eq!(word_tokenize("def f(x):"), vec!["def", "f", "(", "x", ")", ":"]);
        assert_eq!(
            word_tokenize("s.split('\n')"),
            vec!["s", ".", "split", "(", "'", "\n", "'", ")"]
        );
        assert_eq!(word_tokenize("a  +=\tb_1"), vec!["a", "+", "=", "b_1"]);
    }

    fn ident(c: char) -> bool {
        c.is_ascii_alphanumeric() || c == '_'
    }

    proptest! {
        #[test]
        fn tokens_are_pure(s in "\\PC{0,40}") {
            for t in word_tokenize(&s) {
                prop_assert!(!t.is_empty());
                let has_ident = t.chars().any(ident);
                let has_other = t.chars().any(|c| !ident(c));
                prop_assert!(!(has_ident && has_other), "{:?}", t);
                if has_other {
                    prop_assert_eq!(t.chars().count(), 1);
                }
            }
        }
    }
}
