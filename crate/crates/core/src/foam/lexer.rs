use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semicolon,
    Word(String),
    Number(String),
    Str(String),
    Verbatim(String),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

impl Token {
    /// Source-like rendering, used for opaque spans (directive arguments,
    /// nonuniform payloads).
    pub fn render(&self) -> String {
        match &self.kind {
            TokenKind::LBrace => "{".into(),
            TokenKind::RBrace => "}".into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
            TokenKind::LBracket => "[".into(),
            TokenKind::RBracket => "]".into(),
            TokenKind::Semicolon => ";".into(),
            TokenKind::Word(w) | TokenKind::Number(w) => w.clone(),
            TokenKind::Str(s) => quote(s),
            TokenKind::Verbatim(v) => format!("#{{{v}#}}"),
        }
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '{' | '}' | '(' | ')' | '[' | ']' | ';' | '"')
}

pub(crate) fn looks_numeric(s: &str) -> bool {
    let mut chars = s.chars();
    let first = match chars.next() {
        Some(c) => c,
        None => return false,
    };
    let starts_ok = first.is_ascii_digit()
        || ((first == '-' || first == '+' || first == '.')
            && s[1..].chars().next().is_some_and(|c| c.is_ascii_digit() || c == '.'));
    starts_ok && s.parse::<f64>().is_ok()
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line,
            col,
            message: msg.into(),
        }
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        _src: src,
    };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, col) = (cur.line, cur.col);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.peek() {
                    None => return Err(cur.err(line, col, "unterminated block comment")),
                    Some('*') if cur.peek_at(1) == Some('/') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            continue;
        }
        let simple = match c {
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            '[' => Some(TokenKind::LBracket),
            ']' => Some(TokenKind::RBracket),
            ';' => Some(TokenKind::Semicolon),
            _ => None,
        };
        if let Some(kind) = simple {
            cur.bump();
            out.push(Token { kind, line, col });
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    None => return Err(cur.err(line, col, "unterminated string")),
                    Some('\\') => match cur.bump() {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        Some(e) => {
                            s.push('\\');
                            s.push(e);
                        }
                        None => return Err(cur.err(line, col, "unterminated string")),
                    },
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                }
            }
            out.push(Token {
                kind: TokenKind::Str(s),
                line,
                col,
            });
            continue;
        }
        if c == '#' && cur.peek_at(1) == Some('{') {
            cur.bump();
            cur.bump();
            let mut body = String::new();
            loop {
                match cur.peek() {
                    None => return Err(cur.err(line, col, "unterminated #{ verbatim block")),
                    Some('#') if cur.peek_at(1) == Some('}') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => body.push(cur.bump().unwrap()),
                }
            }
            out.push(Token {
                kind: TokenKind::Verbatim(body),
                line,
                col,
            });
            continue;
        }

        // bare word or number
        let mut word = String::new();
        let numeric_start = c.is_ascii_digit() || matches!(c, '-' | '+' | '.');
        while let Some(ch) = cur.peek() {
            if ch == '/' && matches!(cur.peek_at(1), Some('/') | Some('*')) {
                break;
            }
            if ch == '(' && !word.is_empty() && !numeric_start {
                // function-style keyword such as div(phi,U) or grad(p)
                let mut depth = 0usize;
                while let Some(ch) = cur.peek() {
                    if ch == '\n' || ch == ';' || ch == '{' || ch == '}' {
                        return Err(cur.err(cur.line, cur.col, format!("unbalanced '(' in word '{word}'")));
                    }
                    word.push(ch);
                    cur.bump();
                    if ch == '(' {
                        depth += 1;
                    } else if ch == ')' {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                }
                continue;
            }
            if is_delim(ch) {
                break;
            }
            word.push(ch);
            cur.bump();
        }
        let kind = if looks_numeric(&word) {
            TokenKind::Number(word)
        } else {
            TokenKind::Word(word)
        };
        out.push(Token { kind, line, col });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn function_keywords_absorb_parens() {
        assert_eq!(
            kinds("div(phi,U) bounded Gauss linearUpwind grad(U);"),
            vec![
                TokenKind::Word("div(phi,U)".into()),
                TokenKind::Word("bounded".into()),
                TokenKind::Word("Gauss".into()),
                TokenKind::Word("linearUpwind".into()),
                TokenKind::Word("grad(U)".into()),
                TokenKind::Semicolon,
            ]
        );
    }

    #[test]
    fn counted_list_splits_number_and_paren() {
        assert_eq!(
            kinds("3(1 2 3)"),
            vec![
                TokenKind::Number("3".into()),
                TokenKind::LParen,
                TokenKind::Number("1".into()),
                TokenKind::Number("2".into()),
                TokenKind::Number("3".into()),
                TokenKind::RParen,
            ]
        );
    }

    #[test]
    fn comments_dropped() {
        assert_eq!(
            kinds("a 1; // trailing\n/* block\n comment */ b 2;"),
            kinds("a 1; b 2;")
        );
    }

    #[test]
    fn verbatim_and_string_escape() {
        let k = kinds(r#"code #{ x = "a"; #}; s "q\"uote";"#);
        assert_eq!(k[1], TokenKind::Verbatim(r#" x = "a"; "#.into()));
        assert_eq!(k[4], TokenKind::Str("q\"uote".into()));
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  b;").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }

    #[test]
    fn numeric_detection() {
        assert!(looks_numeric("1e-05"));
        assert!(looks_numeric("-0.5"));
        assert!(looks_numeric(".5"));
        assert!(!looks_numeric("inf"));
        assert!(!looks_numeric("-"));
        assert!(!looks_numeric("1e-05x"));
    }
}
