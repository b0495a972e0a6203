/// Sentence punctuation kept by [`clean_text`]; everything else that is not
/// a letter or whitespace is dropped.
pub const KEPT_PUNCTUATION: [char; 4] = ['.', ',', '!', '?'];

pub fn is_punctuation_token(token: &str) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if KEPT_PUNCTUATION.contains(&c))
}

fn is_letter(c: char) -> bool {
    c.is_alphabetic() && !c.is_numeric()
}

/// Normalize raw review text into space-separated word and punctuation tokens.
///
/// Lowercases, deletes digits and any character that is not a letter,
/// whitespace or one of `. , ! ?`, isolates each kept punctuation mark as its
/// own token and collapses whitespace.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    let push_sep = |out: &mut String, pending: &mut bool| {
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
    };
    for c in raw.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            pending_space = true;
        } else if KEPT_PUNCTUATION.contains(&c) {
            pending_space = true;
            push_sep(&mut out, &mut pending_space);
            out.push(c);
            pending_space = true;
        } else if is_letter(c) {
            push_sep(&mut out, &mut pending_space);
            out.push(c);
        }
    }
    out
}

/// Whitespace tokenization of already-cleaned text.
pub fn tokens(cleaned: &str) -> impl Iterator<Item = &str> {
    cleaned.split_whitespace()
}
