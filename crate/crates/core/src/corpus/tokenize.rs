//! Tweet-aware tokenizer.
//!
//! Cleaning happens in this order:
//!
//! 1. a leading retweet marker (`RT @user:`) is dropped,
//! 2. URLs are dropped,
//! 3. runs of more than three identical characters are squashed to three,
//! 4. the text is split with an ordered alternation of token patterns
//!    (emoticons, mentions, hashtags, emoji sequences, words, numbers, ...),
//! 5. tokens are lowercased and hashtags lose their `#`.
//!
//! Punctuation tokens are kept here. They are filtered later, when the
//! vocabulary for change computation is built.

use std::sync::LazyLock;

use regex::Regex;

static RETWEET_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*RT\s+@\w+:?").expect("retweet regex"));

static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:https?://|www\.)\S+").expect("url regex")
});

// Order matters: the regex engine picks the first alternative that matches
// at a position, so specific shapes have to come before generic words.
static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    let patterns = [
        // emoticons, eyes-nose-mouth and mouth-nose-eyes, plus hearts
        r#"[<>]?[:;=8][\-o*']?[)\](\[dDpP/:}{@|\\]"#,
        r#"[)\](\[dDpP/:}{@|\\][\-o*']?[:;=8][<>]?"#,
        r"</?3",
        // emails before mentions so the local part is not lost
        r"[\w.+\-]+@[\w\-]+\.[\w\-.]*[\w\-]",
        r"@\w+",
        r"#+\w(?:[\w'\-]*\w)?",
        // emoji, including ZWJ sequences, modifiers and flags
        r"\p{Regional_Indicator}{2}",
        r"\p{Extended_Pictographic}\x{FE0F}?\p{Emoji_Modifier}?(?:\x{200D}\p{Extended_Pictographic}\x{FE0F}?\p{Emoji_Modifier}?)*",
        // words with inner apostrophes or dashes: c'mon, well-known
        r"[^\W\d_](?:[^\W\d_]|['\-_])+[^\W\d_]",
        // scores, times, fractions: 1-0, 16:30, 3/4
        r"[+\-]?\d+[,/.:\-]\d+[+\-]?",
        r"\w+",
        r"\.{2,}",
        r"\S",
    ];
    let joined = patterns
        .iter()
        .map(|p| format!("(?:{p})"))
        .collect::<Vec<_>>()
        .join("|");
    Regex::new(&joined).expect("token regex")
});

/// Maximum run length of a repeated character inside a token.
pub const MAX_REPEAT: usize = 3;

/// Splits raw post text into normalized tokens.
///
/// Never fails: empty input, or input consisting only of removable material,
/// yields an empty list.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    let text = RETWEET_MARKER.replace(raw_text, " ");
    let text = URL.replace_all(&text, " ");
    let text = squash_repeats(&text, MAX_REPEAT);

    TOKEN
        .find_iter(&text)
        .filter_map(|m| normalize(m.as_str()))
        .collect()
}

fn normalize(raw: &str) -> Option<String> {
    let stripped = raw.trim_start_matches('#');
    if stripped.is_empty() {
        return None;
    }
    // lowercasing can lengthen runs ("oOOO" -> "oooo"), so squash again
    let token = squash_repeats(&stripped.to_lowercase(), MAX_REPEAT);
    Some(token)
}

/// Collapses every run of more than `max` identical characters to exactly
/// `max` characters. Applies to all characters, not only letters.
pub fn squash_repeats(text: &str, max: usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in text.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= max {
            out.push(c);
        }
    }
    out
}

/// True when the character is an emoji codepoint (pictographic or a
/// regional-indicator flag half).
pub fn is_emoji(c: char) -> bool {
    static EMOJI: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^[\p{Extended_Pictographic}\p{Regional_Indicator}]$").expect("emoji regex")
    });
    let mut buf = [0u8; 4];
    EMOJI.is_match(c.encode_utf8(&mut buf))
}

/// A token is punctuation iff every character is non-alphanumeric and not
/// an emoji codepoint.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric() && !is_emoji(c))
}
