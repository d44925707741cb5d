use unicode_general_category::{get_general_category, GeneralCategory as Gc};

/// Marker substituted for every ASCII digit.
pub const DIGIT_MARKER: char = 'X';

fn is_dash(c: char) -> bool {
    matches!(get_general_category(c), Gc::DashPunctuation)
}

fn is_removed(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::ConnectorPunctuation
            | Gc::DashPunctuation
            | Gc::OpenPunctuation
            | Gc::ClosePunctuation
            | Gc::InitialPunctuation
            | Gc::FinalPunctuation
            | Gc::OtherPunctuation
            | Gc::MathSymbol
            | Gc::CurrencySymbol
            | Gc::ModifierSymbol
            | Gc::OtherSymbol
    )
}

/// Normalizes raw text: lowercase, hyphens (any dash punctuation) to
/// spaces, ASCII digits to `X`, all other punctuation and symbols dropped,
/// whitespace collapsed and trimmed.
///
/// `X` is the digit marker and is left as is, which keeps the function
/// idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    // true while the last char pushed was a space (or nothing yet)
    let mut pending_space = false;
    let push = |out: &mut String, c: char, pending: &mut bool| {
        if c == ' ' {
            *pending = true;
            return;
        }
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
        out.push(c);
    };
    for c in raw.chars() {
        if c == DIGIT_MARKER {
            push(&mut out, c, &mut pending_space);
        } else if c.is_ascii_digit() {
            push(&mut out, DIGIT_MARKER, &mut pending_space);
        } else if c.is_whitespace() || is_dash(c) {
            push(&mut out, ' ', &mut pending_space);
        } else if is_removed(c) {
            continue;
        } else {
            for l in c.to_lowercase() {
                if l.is_whitespace() {
                    push(&mut out, ' ', &mut pending_space);
                } else if !is_removed(l) {
                    push(&mut out, l, &mut pending_space);
                }
            }
        }
    }
    out
}

/// Splits cleaned text on spaces. Empty input gives no tokens.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned.split_whitespace().map(str::to_owned).collect()
}
