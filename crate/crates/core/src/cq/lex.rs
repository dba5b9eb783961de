//! Tokenizer shared by the query and database parsers.

use crate::error::{line_col, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Slash,
    /// `:-`
    Neck,
}

pub(crate) struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(text: &'a str) -> Self {
        Lexer { text, pos: 0 }
    }

    pub fn error_at(&self, offset: usize, msg: &str) -> Error {
        let (line, col) = line_col(self.text, offset);
        Error::parse(line, col, msg)
    }

    fn skip_blank(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'%' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    pub fn next_tok(&mut self) -> Result<Option<(Tok, usize)>> {
        self.skip_blank();
        let bytes = self.text.as_bytes();
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok(None);
        };
        let word = |p: usize| {
            let mut e = p;
            while e < bytes.len() && (bytes[e].is_ascii_alphanumeric() || bytes[e] == b'_') {
                e += 1;
            }
            e
        };
        let tok = match b {
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'.' => {
                self.pos += 1;
                Tok::Dot
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b':' if bytes.get(start + 1) == Some(&b'-') => {
                self.pos += 2;
                Tok::Neck
            }
            b'\'' | b'"' => {
                let end = self.text[start + 1..]
                    .find(b as char)
                    .ok_or_else(|| self.error_at(start, "unterminated quoted constant"))?;
                self.pos = start + 1 + end + 1;
                Tok::Quoted(self.text[start + 1..start + 1 + end].to_string())
            }
            b'-' if bytes.get(start + 1).is_some_and(u8::is_ascii_digit) => {
                self.pos = word(start + 1);
                Tok::Number(self.text[start..self.pos].to_string())
            }
            _ if b.is_ascii_digit() => {
                self.pos = word(start);
                Tok::Number(self.text[start..self.pos].to_string())
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                self.pos = word(start);
                Tok::Ident(self.text[start..self.pos].to_string())
            }
            _ => return Err(self.error_at(start, &format!("unexpected character `{}`", self.text[start..].chars().next().unwrap()))),
        };
        Ok(Some((tok, start)))
    }

    pub fn peek_is(&mut self, want: &Tok) -> Result<bool> {
        let save = self.pos;
        let got = self.next_tok()?;
        self.pos = save;
        Ok(matches!(got, Some((t, _)) if &t == want))
    }

    pub fn expect(&mut self, want: &Tok, what: &str) -> Result<usize> {
        match self.next_tok()? {
            Some((t, off)) if &t == want => Ok(off),
            Some((_, off)) => Err(self.error_at(off, &format!("expected {what}"))),
            None => Err(self.error_at(self.text.len(), &format!("expected {what} before end of input"))),
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<String> {
        match self.next_tok()? {
            Some((Tok::Ident(s), _)) => Ok(s),
            Some((_, off)) => Err(self.error_at(off, &format!("expected {what}"))),
            None => Err(self.error_at(self.text.len(), &format!("expected {what} before end of input"))),
        }
    }

    /// `( term, … )`, possibly empty; terms are identifiers, numbers or
    /// quoted constants.
    pub fn args(&mut self) -> Result<Vec<(Tok, usize)>> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::new();
        if self.peek_is(&Tok::RParen)? {
            self.next_tok()?;
            return Ok(out);
        }
        loop {
            match self.next_tok()? {
                Some((t @ (Tok::Ident(_) | Tok::Quoted(_) | Tok::Number(_)), off)) => out.push((t, off)),
                Some((_, off)) => return Err(self.error_at(off, "expected a term")),
                None => return Err(self.error_at(self.text.len(), "expected a term before end of input")),
            }
            match self.next_tok()? {
                Some((Tok::Comma, _)) => {}
                Some((Tok::RParen, _)) => return Ok(out),
                Some((_, off)) => return Err(self.error_at(off, "expected `,` or `)`")),
                None => return Err(self.error_at(self.text.len(), "expected `)` before end of input")),
            }
        }
    }
}
