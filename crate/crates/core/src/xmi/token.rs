use std::fmt;

use serde::Serialize;

use super::XmiError;
use crate::grammar::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum XmiTokenKind {
    /// `<` or `</`.
    AngleOpen,
    /// `>`.
    AngleClose,
    /// `/>`.
    SlashClose,
    /// An element or attribute name, prefix included.
    Name,
    /// An attribute value; `text` excludes the quotes, `span` includes them.
    QuotedValue,
    /// Character data between tags, trimmed.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XmiToken {
    pub kind: XmiTokenKind,
    pub text: String,
    pub span: Span,
}

impl fmt::Display for XmiToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            XmiTokenKind::QuotedValue => write!(f, "\"{}\"", self.text),
            _ => f.write_str(&self.text),
        }
    }
}

/// Splits an XML document into tokens. The prolog, comments, processing
/// instructions and the doctype are skipped, as is whitespace between
/// tokens.
pub fn tokenize_xmi(src: &str) -> Result<Vec<XmiToken>, XmiError> {
    Lexer {
        src,
        pos: 0,
        out: Vec::new(),
    }
    .run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    out: Vec<XmiToken>,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Result<Vec<XmiToken>, XmiError> {
        while self.pos < self.src.len() {
            let rest = &self.src[self.pos..];
            if rest.starts_with("<?") {
                self.skip_past("?>", "processing instruction")?;
            } else if rest.starts_with("<!--") {
                self.skip_past("-->", "comment")?;
            } else if rest.starts_with("<![CDATA[") {
                return Err(self.error(self.pos, "CDATA sections are not supported"));
            } else if rest.starts_with("<!") {
                self.skip_past(">", "declaration")?;
            } else if rest.starts_with("</") {
                self.push(XmiTokenKind::AngleOpen, self.pos, self.pos + 2);
                self.pos += 2;
                self.name("element name")?;
                self.skip_ws();
                self.expect_close(false)?;
            } else if rest.starts_with('<') {
                self.push(XmiTokenKind::AngleOpen, self.pos, self.pos + 1);
                self.pos += 1;
                self.name("element name")?;
                self.attributes()?;
            } else {
                self.text()?;
            }
        }
        Ok(self.out)
    }

    fn attributes(&mut self) -> Result<(), XmiError> {
        loop {
            let had_ws = self.skip_ws();
            match self.peek() {
                Some('>') | Some('/') => return self.expect_close(true),
                None => return Err(self.error(self.pos, "unexpected end of input inside a tag")),
                Some(_) if !had_ws => {
                    return Err(self.error(self.pos, "expected whitespace before attribute"))
                }
                Some(_) => {}
            }
            self.name("attribute name")?;
            self.skip_ws();
            if self.peek() != Some('=') {
                return Err(self.error(self.pos, "expected `=` after attribute name"));
            }
            self.pos += 1;
            self.skip_ws();
            let quote = match self.peek() {
                Some(q @ ('"' | '\'')) => q,
                _ => return Err(self.error(self.pos, "expected a quoted attribute value")),
            };
            let start = self.pos;
            let Some(len) = self.src[start + 1..].find(quote) else {
                return Err(self.error(start, "unterminated attribute value"));
            };
            let end = start + 1 + len + 1;
            let text = &self.src[start + 1..end - 1];
            if text.contains('<') {
                return Err(self.error(start, "`<` inside an attribute value"));
            }
            self.out.push(XmiToken {
                kind: XmiTokenKind::QuotedValue,
                text: text.to_string(),
                span: Span::new(start, end),
            });
            self.pos = end;
        }
    }

    fn expect_close(&mut self, allow_slash: bool) -> Result<(), XmiError> {
        let rest = &self.src[self.pos..];
        if rest.starts_with('>') {
            self.push(XmiTokenKind::AngleClose, self.pos, self.pos + 1);
            self.pos += 1;
            Ok(())
        } else if allow_slash && rest.starts_with("/>") {
            self.push(XmiTokenKind::SlashClose, self.pos, self.pos + 2);
            self.pos += 2;
            Ok(())
        } else {
            Err(self.error(self.pos, "expected `>`"))
        }
    }

    fn name(&mut self, what: &str) -> Result<(), XmiError> {
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| c.is_whitespace() || matches!(c, '=' | '>' | '/' | '<' | '"' | '\''))
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return Err(self.error(start, &format!("expected {what}")));
        }
        self.push(XmiTokenKind::Name, start, start + len);
        self.pos += len;
        Ok(())
    }

    fn text(&mut self) -> Result<(), XmiError> {
        let start = self.pos;
        let len = self.src[start..]
            .find('<')
            .unwrap_or(self.src.len() - start);
        let raw = &self.src[start..start + len];
        self.pos += len;
        let trimmed = raw.trim();
        if !trimmed.is_empty() {
            let lead = raw.len() - raw.trim_start().len();
            self.push(
                XmiTokenKind::Literal,
                start + lead,
                start + lead + trimmed.len(),
            );
        }
        Ok(())
    }

    fn skip_past(&mut self, end: &str, what: &str) -> Result<(), XmiError> {
        match self.src[self.pos..].find(end) {
            Some(i) => {
                self.pos += i + end.len();
                Ok(())
            }
            None => Err(self.error(self.pos, &format!("unterminated {what}"))),
        }
    }

    fn skip_ws(&mut self) -> bool {
        let rest = &self.src[self.pos..];
        let n = rest.len() - rest.trim_start().len();
        self.pos += n;
        n > 0
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn push(&mut self, kind: XmiTokenKind, start: usize, end: usize) {
        self.out.push(XmiToken {
            kind,
            text: self.src[start..end].to_string(),
            span: Span::new(start, end),
        });
    }

    fn error(&self, offset: usize, message: &str) -> XmiError {
        XmiError::malformed(self.src, offset, message)
    }
}
