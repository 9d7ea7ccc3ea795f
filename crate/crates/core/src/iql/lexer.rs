use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Cmp(super::CmpOp),
    And,
    Or,
    Not,
    In,
    Contains,
    True,
    False,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("attribute `{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Cmp(op) => format!("`{op}`"),
            Tok::And => "`and`".into(),
            Tok::Or => "`or`".into(),
            Tok::Not => "`not`".into(),
            Tok::In => "`in`".into(),
            Tok::Contains => "`contains`".into(),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

fn error(offset: usize, expected: &[&str], found: impl Into<String>) -> SyntaxError {
    SyntaxError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.into(),
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    use super::CmpOp::*;
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = |tok| Token { tok, offset: start };
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => out.push(simple(Tok::LParen)),
            b')' => out.push(simple(Tok::RParen)),
            b'[' => out.push(simple(Tok::LBracket)),
            b']' => out.push(simple(Tok::RBracket)),
            b',' => out.push(simple(Tok::Comma)),
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    (b'=', Some(b'=')) => (Eq, 2),
                    (b'!', Some(b'=')) => (Ne, 2),
                    (b'<', Some(b'=')) => (Le, 2),
                    (b'>', Some(b'=')) => (Ge, 2),
                    (b'<', _) => (Lt, 1),
                    (b'>', _) => (Gt, 1),
                    _ => return Err(error(start, &["==", "!="], format!("`{}`", c as char))),
                };
                out.push(simple(Tok::Cmp(op)));
                i += len;
                continue;
            }
            b'"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    let Some(ch) = text[i..].chars().next() else {
                        return Err(error(i, &["`\"`"], "end of input"));
                    };
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => {
                            let Some(esc) = text[i..].chars().next() else {
                                return Err(error(i, &["escape character"], "end of input"));
                            };
                            s.push(match esc {
                                '"' => '"',
                                '\\' => '\\',
                                'n' => '\n',
                                't' => '\t',
                                other => {
                                    return Err(error(
                                        i,
                                        &["`\"`", "`\\`", "`n`", "`t`"],
                                        format!("`{other}`"),
                                    ))
                                }
                            });
                            i += esc.len_utf8();
                        }
                        ch => s.push(ch),
                    }
                }
                out.push(simple(Tok::Str(s)));
                continue;
            }
            b'-' | b'0'..=b'9' => {
                let mut j = i + usize::from(c == b'-');
                let digits = |j: &mut usize| {
                    let s = *j;
                    while *j < bytes.len() && bytes[*j].is_ascii_digit() {
                        *j += 1;
                    }
                    *j > s
                };
                if !digits(&mut j) {
                    return Err(error(j, &["digit"], found_at(text, j)));
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    if !digits(&mut j) {
                        return Err(error(j, &["digit"], found_at(text, j)));
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    j += 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if !digits(&mut j) {
                        return Err(error(j, &["digit"], found_at(text, j)));
                    }
                }
                let v: f64 = text[i..j]
                    .parse()
                    .map_err(|_| error(i, &["number"], &text[i..j]))?;
                if !v.is_finite() {
                    return Err(error(i, &["finite number"], &text[i..j]));
                }
                out.push(simple(Tok::Number(v)));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.')
                {
                    j += 1;
                }
                let word = &text[i..j];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "in" => Tok::In,
                    "contains" => Tok::Contains,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push(simple(tok));
                i = j;
                continue;
            }
            _ => {
                return Err(error(start, &["expression"], found_at(text, start)));
            }
        }
        i += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

fn found_at(text: &str, offset: usize) -> String {
    match text[offset..].chars().next() {
        Some(c) => format!("`{c}`"),
        None => "end of input".into(),
    }
}
