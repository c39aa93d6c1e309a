//! Math-delimiter scanning: balance checking and seed normalization.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Delim {
    Dollar,
    DoubleDollar,
    OpenParen,
    CloseParen,
    OpenBracket,
    CloseBracket,
    Begin(String),
    End(String),
}

/// Splits `text` into delimiter tokens. `\\` and `\$` are consumed as
/// literals, `$$` is read greedily.
pub(crate) fn delimiters(text: &str) -> Vec<Delim> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'$' if b.get(i + 1) == Some(&b'$') => {
                out.push(Delim::DoubleDollar);
                i += 2;
            }
            b'$' => {
                out.push(Delim::Dollar);
                i += 1;
            }
            b'\\' => {
                let rest = &text[i + 1..];
                let (tok, len) = match b.get(i + 1) {
                    Some(b'(') => (Some(Delim::OpenParen), 2),
                    Some(b')') => (Some(Delim::CloseParen), 2),
                    Some(b'[') => (Some(Delim::OpenBracket), 2),
                    Some(b']') => (Some(Delim::CloseBracket), 2),
                    Some(b'\\') | Some(b'$') => (None, 2),
                    _ => match env_name(rest, "begin") {
                        Some((n, l)) => (Some(Delim::Begin(n)), l + 1),
                        None => match env_name(rest, "end") {
                            Some((n, l)) => (Some(Delim::End(n)), l + 1),
                            None => (None, 1),
                        },
                    },
                };
                out.extend(tok);
                i += len;
            }
            _ => i += 1,
        }
    }
    out
}

fn env_name(rest: &str, word: &str) -> Option<(String, usize)> {
    let after = rest.strip_prefix(word)?.strip_prefix('{')?;
    let close = after.find('}')?;
    Some((after[..close].to_string(), word.len() + close + 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    Balanced,
    /// A closer met the wrong opener.
    Mismatched,
    /// Every closer matched but some span is still open at the end.
    Unclosed,
}

pub fn latex_balance(text: &str) -> Balance {
    let mut stack: Vec<Delim> = Vec::new();
    for d in delimiters(text) {
        let want = match &d {
            Delim::Dollar | Delim::DoubleDollar => {
                if stack.last() == Some(&d) {
                    stack.pop();
                } else {
                    stack.push(d);
                }
                continue;
            }
            Delim::OpenParen | Delim::OpenBracket | Delim::Begin(_) => {
                stack.push(d);
                continue;
            }
            Delim::CloseParen => Delim::OpenParen,
            Delim::CloseBracket => Delim::OpenBracket,
            Delim::End(name) => Delim::Begin(name.clone()),
        };
        if stack.pop() != Some(want) {
            return Balance::Mismatched;
        }
    }
    if stack.is_empty() {
        Balance::Balanced
    } else {
        Balance::Unclosed
    }
}

pub fn is_balanced(text: &str) -> bool {
    latex_balance(text) == Balance::Balanced
}

const SYMBOLS: [(char, &str); 6] = [
    ('×', "\\times "),
    ('÷', "\\div "),
    ('≤', "\\leq "),
    ('≥', "\\geq "),
    ('≠', "\\neq "),
    ('π', "\\pi "),
];

fn normalize_math(body: &str) -> String {
    let mut mapped = String::with_capacity(body.len());
    for c in body.chars() {
        match SYMBOLS.iter().find(|(s, _)| *s == c) {
            Some((_, m)) => mapped.push_str(m),
            None => mapped.push(c),
        }
    }
    let mut out = String::with_capacity(mapped.len());
    let mut in_ws = false;
    for c in mapped.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    out
}

/// Finds the next unescaped occurrence of `close` in `s`.
fn find_closer(s: &str, close: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i..].starts_with(close.as_bytes()) {
            return Some(i);
        }
        i += if b[i] == b'\\' { 2 } else { 1 };
    }
    None
}

/// Rewrites `\(..\)` to `$..$` and `\[..\]` to `$$..$$`, then maps the
/// common Unicode math symbols to macros and collapses whitespace inside
/// math spans. Unmatched openers are left as they are.
pub fn normalize_seed(text: &str) -> String {
    // a rewritten `\(` can pair with an earlier stray `$`, so repeat until
    // stable; every pass that changes anything removes a delimiter or a
    // symbol or shortens a whitespace run
    let mut cur = normalize_pass(text);
    loop {
        let next = normalize_pass(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn normalize_pass(text: &str) -> String {
    const SPANS: [(&str, &str, &str); 4] = [("$$", "$$", "$$"), ("$", "$", "$"), ("\\(", "\\)", "$"), ("\\[", "\\]", "$$")];
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    'scan: while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with("\\\\") || rest.starts_with("\\$") {
            out.push_str(&rest[..2]);
            i += 2;
            continue;
        }
        for (open, close, emit) in SPANS {
            if let Some(after) = rest.strip_prefix(open) {
                if let Some(end) = find_closer(after, close) {
                    let body = &after[..end];
                    // rewriting these would create new `$` spans on a second pass
                    if open != emit && (body.is_empty() || find_closer(body, "$").is_some()) {
                        continue;
                    }
                    out.push_str(emit);
                    out.push_str(&normalize_math(body));
                    out.push_str(emit);
                    i += open.len() + end + close.len();
                    continue 'scan;
                }
            }
        }
        let c = rest.chars().next().expect("nonempty");
        out.push(c);
        i += c.len_utf8();
    }
    out
}
