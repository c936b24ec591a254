//! Minimal scanner for the HTML fragments stored in post bodies.
//!
//! Only what the filter needs: tag names, whether a tag closes, and the
//! decoded text between tags.

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub(crate) struct BodyScan {
    pub has_image: bool,
    pub has_table: bool,
    /// Character count of the longest `<pre><code>` block, if any.
    pub longest_code_block: Option<usize>,
    /// Markup-free text, one line per block element, whitespace collapsed.
    pub text: String,
}

enum Token<'a> {
    Text(&'a str),
    Tag { name: String, closing: bool },
}

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "li", "ul", "ol", "pre", "blockquote", "h1", "h2", "h3", "h4", "h5",
    "h6", "tr", "hr", "table", "dl", "dt", "dd",
];

struct Tokens<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(src: &'a str) -> Self {
        Tokens { src, pos: 0 }
    }

    /// Byte index of the `>` closing a tag opened at `start`, honoring quoted
    /// attribute values.
    fn tag_end(&self, start: usize) -> Option<usize> {
        let bytes = self.src.as_bytes();
        let mut quote = None;
        for (i, &b) in bytes.iter().enumerate().skip(start + 1) {
            match (quote, b) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, b'"') | (None, b'\'') => quote = Some(b),
                (None, b'>') => return Some(i),
                _ => {}
            }
        }
        None
    }
}

impl<'a> Iterator for Tokens<'a> {
    type Item = Token<'a>;

    fn next(&mut self) -> Option<Token<'a>> {
        let rest = &self.src[self.pos..];
        if rest.is_empty() {
            return None;
        }
        let bytes = rest.as_bytes();
        if bytes[0] == b'<' && bytes.len() > 1 {
            let start = self.pos;
            if rest.starts_with("<!--") {
                let end = rest.find("-->").map_or(self.src.len(), |e| start + e + 3);
                self.pos = end;
                return self.next();
            }
            let next = bytes[1];
            if next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?' {
                if let Some(end) = self.tag_end(start) {
                    self.pos = end + 1;
                    let inner = &self.src[start + 1..end];
                    let closing = inner.starts_with('/');
                    let name: String = inner
                        .trim_start_matches('/')
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric())
                        .collect::<String>()
                        .to_ascii_lowercase();
                    return Some(Token::Tag { name, closing });
                }
            }
        }
        // Text runs up to the next '<' that is not the current character.
        let first = rest.chars().next().map_or(1, char::len_utf8);
        let end = rest[first..].find('<').map_or(rest.len(), |e| e + first);
        self.pos += end;
        Some(Token::Text(&rest[..end]))
    }
}

pub(crate) fn scan_body(html: &str) -> BodyScan {
    let mut scan = BodyScan::default();
    let mut raw = String::with_capacity(html.len());
    let mut pre_depth = 0usize;
    let mut code_block: Option<usize> = None;

    let finish_block = |scan: &mut BodyScan, len: usize| {
        scan.longest_code_block = Some(scan.longest_code_block.map_or(len, |l| l.max(len)));
    };

    for token in Tokens::new(html) {
        match token {
            Token::Text(t) => {
                let decoded = html_escape::decode_html_entities(t);
                if let Some(len) = code_block.as_mut() {
                    *len += decoded.chars().count();
                }
                raw.push_str(&decoded);
            }
            Token::Tag { name, closing } => {
                match (name.as_str(), closing) {
                    ("img", false) => scan.has_image = true,
                    ("table", false) => scan.has_table = true,
                    ("pre", false) => pre_depth += 1,
                    ("pre", true) => {
                        pre_depth = pre_depth.saturating_sub(1);
                        if let Some(len) = code_block.take() {
                            finish_block(&mut scan, len);
                        }
                    }
                    ("code", false) if pre_depth > 0 && code_block.is_none() => {
                        code_block = Some(0)
                    }
                    ("code", true) => {
                        if let Some(len) = code_block.take() {
                            finish_block(&mut scan, len);
                        }
                    }
                    _ => {}
                }
                if BLOCK_TAGS.contains(&name.as_str()) {
                    raw.push('\n');
                }
            }
        }
    }
    if let Some(len) = code_block {
        finish_block(&mut scan, len);
    }
    scan.text = normalize_whitespace(&raw);
    scan
}

/// Collapses whitespace within lines and drops blank lines.
pub(crate) fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut words = line.split_whitespace().peekable();
        if words.peek().is_none() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        for (i, w) in words.enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(w);
        }
    }
    out
}

/// True if `text` contains anything the scanner would read as a tag.
#[cfg(test)]
pub(crate) fn contains_tag(text: &str) -> bool {
    Tokens::new(text).any(|t| matches!(t, Token::Tag { .. }))
}
