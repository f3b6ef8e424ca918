//! A small JSON reader that keeps object members as an ordered list.
//!
//! `serde_json` folds repeated keys into one map entry, which loses the key
//! count the format reward depends on. This reader keeps every member and
//! reports the byte offset where parsing stopped, so callers can resume a scan
//! after a failure.

pub(crate) const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Null,
    Bool(bool),
    Number(f64),
    String(String),
    Array(Vec<RawValue>),
    Object(Vec<(String, RawValue)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonError {
    pub position: usize,
    pub message: String,
}

type Parsed<T> = Result<T, JsonError>;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

/// Parse one value starting at byte `start` (leading whitespace skipped).
/// Returns the value and the offset just past it.
pub fn parse_value_at(text: &str, start: usize) -> Parsed<(RawValue, usize)> {
    let mut r = Reader {
        bytes: text.as_bytes(),
        pos: start,
    };
    r.skip_ws();
    let v = r.value(0)?;
    Ok((v, r.pos))
}

/// Parse `text` as exactly one value with nothing but whitespace around it.
pub fn parse_complete(text: &str) -> Parsed<RawValue> {
    let (v, end) = parse_value_at(text, 0)?;
    let rest = &text.as_bytes()[end..];
    match rest.iter().position(|b| !b.is_ascii_whitespace()) {
        None => Ok(v),
        Some(off) => Err(JsonError {
            position: end + off,
            message: "trailing characters after JSON value".into(),
        }),
    }
}

impl Reader<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Parsed<T> {
        Err(JsonError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn expect_literal(&mut self, lit: &[u8], v: RawValue) -> Parsed<RawValue> {
        if self.bytes[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(v)
        } else {
            self.err("invalid literal")
        }
    }

    fn value(&mut self, depth: usize) -> Parsed<RawValue> {
        if depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'{') => self.object(depth),
            Some(b'[') => self.array(depth),
            Some(b'"') => self.string().map(RawValue::String),
            Some(b't') => self.expect_literal(b"true", RawValue::Bool(true)),
            Some(b'f') => self.expect_literal(b"false", RawValue::Bool(false)),
            Some(b'n') => self.expect_literal(b"null", RawValue::Null),
            Some(b'-' | b'0'..=b'9') => self.number(),
            Some(_) => self.err("unexpected character"),
        }
    }

    fn object(&mut self, depth: usize) -> Parsed<RawValue> {
        self.pos += 1;
        let mut members = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(RawValue::Object(members));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'"') {
                return self.err("expected object key");
            }
            let key = self.string()?;
            self.skip_ws();
            if self.peek() != Some(b':') {
                return self.err("expected ':'");
            }
            self.pos += 1;
            self.skip_ws();
            let v = self.value(depth + 1)?;
            members.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(RawValue::Object(members));
                }
                _ => return self.err("expected ',' or '}'"),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Parsed<RawValue> {
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(RawValue::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(RawValue::Array(items));
                }
                _ => return self.err("expected ',' or ']'"),
            }
        }
    }

    fn number(&mut self) -> Parsed<RawValue> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = |r: &mut Self| {
            let s = r.pos;
            while matches!(r.peek(), Some(b'0'..=b'9')) {
                r.pos += 1;
            }
            r.pos - s
        };
        if digits(self) == 0 {
            return self.err("expected digits");
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if digits(self) == 0 {
                return self.err("expected fraction digits");
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                return self.err("expected exponent digits");
            }
        }
        // The consumed range is ASCII by construction.
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        match s.parse::<f64>() {
            Ok(v) => Ok(RawValue::Number(v)),
            Err(_) => self.err("invalid number"),
        }
    }

    fn hex4(&mut self) -> Parsed<u32> {
        let Some(chunk) = self.bytes.get(self.pos..self.pos + 4) else {
            return self.err("truncated unicode escape");
        };
        let s = std::str::from_utf8(chunk).map_err(|_| JsonError {
            position: self.pos,
            message: "invalid unicode escape".into(),
        })?;
        let v = u32::from_str_radix(s, 16).map_err(|_| JsonError {
            position: self.pos,
            message: "invalid unicode escape".into(),
        })?;
        self.pos += 4;
        Ok(v)
    }

    fn string(&mut self) -> Parsed<String> {
        self.pos += 1;
        let mut out: Vec<u8> = Vec::new();
        loop {
            let Some(b) = self.peek() else {
                return self.err("unterminated string");
            };
            match b {
                b'"' => {
                    self.pos += 1;
                    return String::from_utf8(out).map_err(|_| JsonError {
                        position: self.pos,
                        message: "invalid utf-8 in string".into(),
                    });
                }
                b'\\' => {
                    self.pos += 1;
                    let Some(e) = self.peek() else {
                        return self.err("unterminated escape");
                    };
                    self.pos += 1;
                    let c = match e {
                        b'"' => '"',
                        b'\\' => '\\',
                        b'/' => '/',
                        b'b' => '\u{8}',
                        b'f' => '\u{c}',
                        b'n' => '\n',
                        b'r' => '\r',
                        b't' => '\t',
                        b'u' => {
                            let hi = self.hex4()?;
                            let code = if (0xD800..0xDC00).contains(&hi) {
                                if !self.bytes[self.pos..].starts_with(b"\\u") {
                                    return self.err("unpaired surrogate");
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return self.err("invalid low surrogate");
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            match char::from_u32(code) {
                                Some(c) => c,
                                None => return self.err("invalid unicode scalar"),
                            }
                        }
                        _ => return self.err("invalid escape"),
                    };
                    let mut buf = [0u8; 4];
                    out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
                0x00..=0x1f => return self.err("control character in string"),
                _ => {
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
    }
}
