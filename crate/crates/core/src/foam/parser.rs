use super::dimensions::DimensionVector;
use super::lexer::{tokenize, Token, TokenKind};
use super::value::{FoamDictionary, FoamValue, NonuniformField, Number};
use super::SyntaxError;

/// Parses OpenFOAM dictionary text. Comments are dropped; `#include`-style
/// directives and `$macro;` expansions are kept as opaque entries.
pub fn parse_dictionary(text: &str) -> Result<FoamDictionary, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        eof_line: text.lines().count().max(1),
    };
    p.dictionary_body(None, true)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, tok: Option<&Token>, message: impl Into<String>) -> SyntaxError {
        let (line, col) = tok.map(|t| (t.line, t.col)).unwrap_or((self.eof_line, 1));
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    /// Parses entries until the matching `}` (when `open` is set) or end of input.
    fn dictionary_body(&mut self, open: Option<&Token>, top: bool) -> Result<FoamDictionary, SyntaxError> {
        let mut dict = FoamDictionary::new();
        loop {
            let tok = match self.peek() {
                None => {
                    return match open {
                        Some(o) => Err(SyntaxError {
                            line: self.eof_line,
                            col: 1,
                            message: format!("unbalanced braces: '{{' opened at line {} is never closed", o.line),
                        }),
                        None => Ok(dict),
                    }
                }
                Some(t) => t.clone(),
            };
            match &tok.kind {
                TokenKind::RBrace => {
                    if open.is_some() {
                        self.next();
                        return Ok(dict);
                    }
                    return Err(self.err_at(Some(&tok), "unbalanced braces: unexpected '}'"));
                }
                TokenKind::Semicolon => {
                    // stray separators are harmless
                    self.next();
                }
                TokenKind::Word(w) if w.starts_with('#') => {
                    self.next();
                    let args = self.directive_args(&tok)?;
                    dict.push_directive(w.clone(), args);
                }
                TokenKind::Word(w)
                    if w.starts_with('$')
                        && matches!(self.tokens.get(self.pos + 1).map(|t| &t.kind), Some(TokenKind::Semicolon)) =>
                {
                    self.next();
                    self.next();
                    dict.push_directive(w.clone(), "");
                }
                TokenKind::Word(_) | TokenKind::Str(_) => {
                    self.next();
                    let keyword = match &tok.kind {
                        TokenKind::Word(w) => w.clone(),
                        TokenKind::Str(s) => super::lexer::quote(s),
                        _ => unreachable!(),
                    };
                    let value = self.entry_value(&tok, &keyword)?;
                    dict.set(keyword, value);
                }
                TokenKind::Number(_) | TokenKind::LParen if top => {
                    let items = self.values_until_end()?;
                    dict.push_anonymous(collapse(items));
                }
                _ => {
                    return Err(self.err_at(Some(&tok), format!("expected a keyword, found '{}'", tok.render())));
                }
            }
        }
    }

    fn entry_value(&mut self, kw_tok: &Token, keyword: &str) -> Result<FoamValue, SyntaxError> {
        if let Some(TokenKind::LBrace) = self.peek_kind() {
            let open = self.next().unwrap();
            return Ok(FoamValue::Dict(self.dictionary_body(Some(&open), false)?));
        }
        let mut items = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::Semicolon) => {
                    self.next();
                    return Ok(collapse(items));
                }
                None => {
                    return Err(SyntaxError {
                        line: self.eof_line,
                        col: 1,
                        message: format!("missing ';' after entry '{keyword}' (line {})", kw_tok.line),
                    })
                }
                Some(TokenKind::RBrace) => {
                    let t = self.peek().cloned();
                    return Err(self.err_at(t.as_ref(), format!("missing ';' after entry '{keyword}'")));
                }
                _ => items.push(self.value()?),
            }
        }
    }

    /// Values of a keyword-less top-level block, up to `;` or end of input.
    fn values_until_end(&mut self) -> Result<Vec<FoamValue>, SyntaxError> {
        let mut items = Vec::new();
        loop {
            match self.peek_kind() {
                None => return Ok(items),
                Some(TokenKind::Semicolon) => {
                    self.next();
                    return Ok(items);
                }
                Some(TokenKind::RBrace) => {
                    let t = self.peek().cloned();
                    return Err(self.err_at(t.as_ref(), "unbalanced braces: unexpected '}'"));
                }
                _ => items.push(self.value()?),
            }
        }
    }

    fn value(&mut self) -> Result<FoamValue, SyntaxError> {
        let tok = self.next().ok_or_else(|| self.err_at(None, "unexpected end of input"))?;
        Ok(match tok.kind {
            TokenKind::Word(ref w) if w == "uniform" && !self.at_value_end() => {
                FoamValue::Uniform(Box::new(self.value()?))
            }
            TokenKind::Word(ref w) if w == "nonuniform" => FoamValue::Nonuniform(self.nonuniform(&tok)?),
            TokenKind::Word(w) => FoamValue::Word(w),
            TokenKind::Str(s) => FoamValue::Str(s),
            TokenKind::Number(n) => FoamValue::Number(Number::new(n)),
            TokenKind::Verbatim(v) => FoamValue::Verbatim(v),
            TokenKind::LBracket => FoamValue::Dimensions(self.dimension_set(&tok)?),
            TokenKind::LParen => FoamValue::List(self.list_items(&tok)?),
            TokenKind::LBrace => FoamValue::Dict(self.dictionary_body(Some(&tok), false)?),
            TokenKind::RParen | TokenKind::RBracket | TokenKind::RBrace | TokenKind::Semicolon => {
                return Err(self.err_at(Some(&tok), format!("unexpected '{}'", tok.render())))
            }
        })
    }

    /// `uniform` is also an ordinary word, e.g. `type uniform;` in sample sets.
    fn at_value_end(&self) -> bool {
        matches!(
            self.peek_kind(),
            None | Some(TokenKind::Semicolon) | Some(TokenKind::RBrace) | Some(TokenKind::RParen)
        )
    }

    fn list_items(&mut self, open: &Token) -> Result<Vec<FoamValue>, SyntaxError> {
        let mut items = Vec::new();
        loop {
            let tok = match self.peek() {
                None => {
                    return Err(SyntaxError {
                        line: self.eof_line,
                        col: 1,
                        message: format!("unbalanced parentheses: '(' opened at line {} is never closed", open.line),
                    })
                }
                Some(t) => t.clone(),
            };
            match &tok.kind {
                TokenKind::RParen => {
                    self.next();
                    return Ok(items);
                }
                TokenKind::Word(name) | TokenKind::Str(name)
                    if matches!(self.tokens.get(self.pos + 1).map(|t| &t.kind), Some(TokenKind::LBrace)) =>
                {
                    let name = match &tok.kind {
                        TokenKind::Str(_) => super::lexer::quote(name),
                        _ => name.clone(),
                    };
                    self.next();
                    let open = self.next().unwrap();
                    let body = self.dictionary_body(Some(&open), false)?;
                    items.push(FoamValue::NamedDict(name, body));
                }
                TokenKind::Semicolon => {
                    // blockMesh-style `( a; b; )` separators
                    self.next();
                }
                TokenKind::RBrace | TokenKind::RBracket => {
                    return Err(self.err_at(Some(&tok), format!("unbalanced parentheses: unexpected '{}'", tok.render())));
                }
                _ => items.push(self.value()?),
            }
        }
    }

    fn dimension_set(&mut self, open: &Token) -> Result<DimensionVector, SyntaxError> {
        let mut exps = Vec::new();
        loop {
            let tok = self
                .next()
                .ok_or_else(|| self.err_at(Some(open), "malformed dimension set: missing ']'"))?;
            match tok.kind {
                TokenKind::RBracket => break,
                TokenKind::Number(ref n) => match n.parse::<f64>() {
                    Ok(v) if v.fract() == 0.0 && v.abs() < 1e6 => exps.push(v as i32),
                    _ => {
                        return Err(self.err_at(
                            Some(&tok),
                            format!("malformed dimension set: exponent '{n}' is not an integer"),
                        ))
                    }
                },
                _ => {
                    return Err(self.err_at(
                        Some(&tok),
                        format!("malformed dimension set: unexpected '{}'", tok.render()),
                    ))
                }
            }
        }
        DimensionVector::from_slice(&exps).ok_or_else(|| {
            self.err_at(
                Some(open),
                format!("malformed dimension set: expected 7 exponents, found {}", exps.len()),
            )
        })
    }

    fn nonuniform(&mut self, kw: &Token) -> Result<NonuniformField, SyntaxError> {
        let mut kind = None;
        if let Some(TokenKind::Word(w)) = self.peek_kind() {
            kind = Some(w.clone());
            self.next();
        }
        let mut declared = None;
        if let Some(TokenKind::Number(n)) = self.peek_kind() {
            declared = n.parse::<usize>().ok();
            self.next();
        }
        let open = match self.next() {
            Some(t) if t.kind == TokenKind::LParen => t,
            other => {
                return Err(self.err_at(
                    other.as_ref().or(Some(kw)),
                    "nonuniform field: expected '(' starting the value list",
                ))
            }
        };
        let start = self.pos - 1;
        let mut depth = 1usize;
        let mut top_level = 0usize;
        while depth > 0 {
            let tok = self.next().ok_or_else(|| SyntaxError {
                line: self.eof_line,
                col: 1,
                message: format!("unbalanced parentheses: nonuniform list opened at line {} is never closed", open.line),
            })?;
            match tok.kind {
                TokenKind::LParen => {
                    if depth == 1 {
                        top_level += 1;
                    }
                    depth += 1;
                }
                TokenKind::RParen => depth -= 1,
                TokenKind::LBrace | TokenKind::RBrace | TokenKind::Semicolon => {
                    return Err(self.err_at(Some(&tok), "nonuniform field: unexpected token inside value list"))
                }
                _ => {
                    if depth == 1 {
                        top_level += 1;
                    }
                }
            }
        }
        let raw = self.tokens[start..self.pos]
            .iter()
            .map(Token::render)
            .collect::<Vec<_>>()
            .join(" ");
        Ok(NonuniformField {
            kind,
            count: declared.unwrap_or(top_level),
            raw,
        })
    }

    /// Raw argument text of a directive: the rest of its line, plus any
    /// brace/paren groups that continue past it. A trailing `;` is consumed.
    fn directive_args(&mut self, dir: &Token) -> Result<String, SyntaxError> {
        let mut parts = Vec::new();
        let mut depth = 0i32;
        while let Some(tok) = self.peek().cloned() {
            // a brace block may continue the directive on the following line
            if depth == 0 && tok.line != dir.line && !(parts.is_empty() && tok.kind == TokenKind::LBrace) {
                break;
            }
            match tok.kind {
                TokenKind::Semicolon if depth == 0 => {
                    self.next();
                    break;
                }
                TokenKind::RBrace if depth == 0 => break,
                TokenKind::LBrace | TokenKind::LParen => depth += 1,
                TokenKind::RBrace | TokenKind::RParen => depth -= 1,
                _ => {}
            }
            self.next();
            parts.push(tok.render());
            if depth == 0 && matches!(tok.kind, TokenKind::RBrace) {
                break;
            }
        }
        if depth != 0 {
            return Err(self.err_at(Some(dir), "unbalanced braces in directive arguments"));
        }
        Ok(parts.join(" "))
    }
}

fn collapse(mut items: Vec<FoamValue>) -> FoamValue {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        FoamValue::Seq(items)
    }
}
