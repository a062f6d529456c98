use super::{ParseDiagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Inf,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Neq,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("`?{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Inf => "`+INF`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokens plus lexical errors; bad characters are skipped so parsing can continue.
pub fn lex(text: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = Span { line, column: col, length: 1 };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let take = |n: usize, tok: Tok, out: &mut Vec<Token>| {
            out.push(Token { tok, span: Span { length: n, ..start } });
            n
        };
        let n = match c {
            '(' => take(1, Tok::LParen, &mut out),
            ')' => take(1, Tok::RParen, &mut out),
            '{' => take(1, Tok::LBrace, &mut out),
            '}' => take(1, Tok::RBrace, &mut out),
            '[' => take(1, Tok::LBracket, &mut out),
            ']' => take(1, Tok::RBracket, &mut out),
            ',' => take(1, Tok::Comma, &mut out),
            ';' => take(1, Tok::Semi, &mut out),
            ':' => take(1, Tok::Colon, &mut out),
            '.' => take(1, Tok::Dot, &mut out),
            '=' => take(1, Tok::Eq, &mut out),
            '!' if chars.get(i + 1) == Some(&'=') => take(2, Tok::Neq, &mut out),
            '+' if chars[i + 1..].iter().take(3).collect::<String>().eq_ignore_ascii_case("INF") => {
                take(4, Tok::Inf, &mut out)
            }
            '?' if chars.get(i + 1).is_some_and(|&c| is_ident(c)) => {
                let len = 1 + chars[i + 1..].iter().take_while(|&&c| is_ident(c)).count();
                let name: String = chars[i + 1..i + len].iter().collect();
                take(len, Tok::Var(name), &mut out)
            }
            '-' | '0'..='9' if c != '-' || chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) => {
                let sign = usize::from(c == '-');
                let len = sign + chars[i + sign..].iter().take_while(|c| c.is_ascii_digit()).count();
                let s: String = chars[i..i + len].iter().collect();
                match s.parse::<i64>() {
                    Ok(v) => take(len, Tok::Int(v), &mut out),
                    Err(_) => {
                        errs.push(ParseDiagnostic::error(format!("integer literal {s} out of range"), Span { length: len, ..start }));
                        len
                    }
                }
            }
            c if is_ident(c) => {
                let len = chars[i..].iter().take_while(|&&c| is_ident(c)).count();
                let s: String = chars[i..i + len].iter().collect();
                take(len, Tok::Ident(s), &mut out)
            }
            _ => {
                errs.push(ParseDiagnostic::error(format!("unexpected character {c:?}"), start));
                1
            }
        };
        i += n;
        col += n;
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, column: col, length: 0 } });
    (out, errs)
}
