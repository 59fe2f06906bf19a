//! Case normalization, mention/URL masking, whitespace tokenization.

pub const USER_MASK: &str = "<usr>";
pub const URL_MASK: &str = "<url>";

/// Characters the trigram codec reserves: the token terminal and the pad.
pub const TERMINAL: char = '*';
pub const PAD: char = '#';

fn is_url(token: &str) -> bool {
    if token.starts_with("www.") {
        return true;
    }
    match token.find("://") {
        Some(pos) if pos > 0 => {
            let scheme = &token[..pos];
            scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-'))
        }
        _ => false,
    }
}

/// Normalize a single whitespace-free token. Returns `None` when nothing is left.
pub fn normalize_token(token: &str) -> Option<String> {
    if token.starts_with('@') {
        return Some(USER_MASK.to_string());
    }
    let lower = token.to_lowercase();
    if is_url(&lower) {
        return Some(URL_MASK.to_string());
    }
    let kept: String = lower.chars().filter(|&c| c != TERMINAL && c != PAD).collect();
    (!kept.is_empty()).then_some(kept)
}

/// Lowercase, mask mentions and URLs, strip reserved characters, and rejoin
/// the surviving tokens with single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .filter_map(normalize_token)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
