//! Streaming readers for Stack Exchange post dumps.

use std::io::BufRead;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::Deserialize;

use super::RawPost;
use crate::error::{Error, Location, Result};

/// Post-type codes defined by the public dump schema. Rows with any other
/// code are skipped.
const KNOWN_POST_TYPES: &[u32] = &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 17];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostFormat {
    Xml,
    Jsonl,
}

impl FromStr for PostFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xml" => Ok(PostFormat::Xml),
            "jsonl" | "json" => Ok(PostFormat::Jsonl),
            other => Err(Error::config(format!("unknown post format {other:?}"))),
        }
    }
}

/// Opens a streaming post reader over `input`.
///
/// Records are yielded in input order. The first error ends the stream.
pub fn parse_posts<R: BufRead>(input: R, format: PostFormat) -> PostStream<R> {
    match format {
        PostFormat::Xml => PostStream::Xml(XmlPosts::new(input)),
        PostFormat::Jsonl => PostStream::Jsonl(JsonlPosts::new(input)),
    }
}

pub enum PostStream<R> {
    Xml(XmlPosts<R>),
    Jsonl(JsonlPosts<R>),
}

impl<R: BufRead> Iterator for PostStream<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            PostStream::Xml(p) => p.next(),
            PostStream::Jsonl(p) => p.next(),
        }
    }
}

fn known_type(code: u32) -> bool {
    KNOWN_POST_TYPES.contains(&code)
}

/// Reader for `Posts.xml`: a root element holding `<row .../>` elements.
pub struct XmlPosts<R> {
    reader: Reader<R>,
    buf: Vec<u8>,
    done: bool,
}

impl<R: BufRead> XmlPosts<R> {
    pub fn new(input: R) -> Self {
        XmlPosts { reader: Reader::from_reader(input), buf: Vec::new(), done: false }
    }

    fn row(&self, e: &BytesStart<'_>, at: u64) -> Result<Option<RawPost>> {
        let loc = Location::Byte(at);
        let err = |message: String| Error::Parse { location: loc, message };

        let mut id = None;
        let mut post_type = None;
        let mut post = RawPost::default();
        for attr in e.attributes() {
            let attr = attr.map_err(|e| err(e.to_string()))?;
            let value = attr
                .normalized_value(XmlVersion::Implicit1_0)
                .map_err(|e| err(e.to_string()))?;
            match attr.key.as_ref() {
                "Id" => id = Some(parse_num::<u64>("Id", &value, loc)?),
                "PostTypeId" => post_type = Some(parse_num::<u32>("PostTypeId", &value, loc)?),
                "Title" => post.title = Some(value.into_owned()),
                "Body" => post.body = value.into_owned(),
                "Tags" => post.tags = Some(value.into_owned()),
                "AcceptedAnswerId" => {
                    post.accepted_answer_id = Some(parse_num("AcceptedAnswerId", &value, loc)?)
                }
                "AnswerCount" => post.answer_count = parse_num("AnswerCount", &value, loc)?,
                _ => {}
            }
        }
        post.id = check_id(id, loc)?;
        post.post_type = post_type.ok_or_else(|| err("missing PostTypeId attribute".into()))?;
        Ok(known_type(post.post_type).then_some(post))
    }
}

impl<R: BufRead> Iterator for XmlPosts<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let at = self.reader.buffer_position();
            let event = self.reader.read_event_into(&mut self.buf);
            let parsed = match event {
                Ok(Event::Empty(e)) | Ok(Event::Start(e)) if e.name().as_ref() == "row" => {
                    let e = e.into_owned();
                    self.row(&e, at)
                }
                Ok(Event::Eof) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => continue,
                Err(e) => Err(Error::Parse {
                    location: Location::Byte(self.reader.error_position()),
                    message: e.to_string(),
                }),
            };
            match parsed {
                Ok(Some(post)) => return Some(Ok(post)),
                Ok(None) => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        None
    }
}

/// Reader for JSONL: one post object per line, field names in lowerCamelCase.
pub struct JsonlPosts<R> {
    input: R,
    line: String,
    line_no: u64,
    done: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonPost {
    id: Option<u64>,
    post_type_id: Option<u32>,
    title: Option<String>,
    body: Option<String>,
    tags: Option<String>,
    accepted_answer_id: Option<u64>,
    answer_count: Option<u64>,
}

impl<R: BufRead> JsonlPosts<R> {
    pub fn new(input: R) -> Self {
        JsonlPosts { input, line: String::new(), line_no: 0, done: false }
    }

    fn decode(&self) -> Result<Option<RawPost>> {
        let loc = Location::Line(self.line_no);
        let raw: JsonPost = serde_json::from_str(&self.line)
            .map_err(|e| Error::Parse { location: loc, message: e.to_string() })?;
        let id = check_id(raw.id, loc)?;
        let post_type = raw.post_type_id.ok_or_else(|| Error::Parse {
            location: loc,
            message: "missing postTypeId".into(),
        })?;
        if !known_type(post_type) {
            return Ok(None);
        }
        Ok(Some(RawPost {
            id,
            post_type,
            title: raw.title,
            body: raw.body.unwrap_or_default(),
            tags: raw.tags,
            accepted_answer_id: raw.accepted_answer_id,
            answer_count: raw.answer_count.unwrap_or(0),
        }))
    }
}

impl<R: BufRead> Iterator for JsonlPosts<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.line.clear();
            match self.input.read_line(&mut self.line) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line_no += 1;
                    if self.line.trim().is_empty() {
                        continue;
                    }
                    match self.decode() {
                        Ok(Some(post)) => return Some(Ok(post)),
                        Ok(None) => continue,
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        None
    }
}

fn check_id(id: Option<u64>, loc: Location) -> Result<u64> {
    match id {
        Some(0) => Err(Error::Parse { location: loc, message: "Id must be positive".into() }),
        Some(id) => Ok(id),
        None => Err(Error::Parse { location: loc, message: "missing Id attribute".into() }),
    }
}

fn parse_num<T: FromStr>(field: &str, value: &str, loc: Location) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse {
        location: loc,
        message: format!("{field} is not a valid number: {value:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xml(rows: &str) -> Vec<Result<RawPost>> {
        let doc = format!("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n{rows}\n</posts>\n");
        parse_posts(doc.as_bytes(), PostFormat::Xml).collect()
    }

    #[test]
    fn answer_rows_are_yielded() {
        let posts = xml(r#"<row Id="7" PostTypeId="2" ParentId="3" Body="&lt;p&gt;ok&lt;/p&gt;" />"#);
        let post = posts[0].as_ref().unwrap();
        assert_eq!(post.post_type, 2);
        assert_eq!(post.id, 7);
        assert_eq!(post.body, "<p>ok</p>");
    }

    #[test]
    fn question_row_decodes_entities() {
        let posts = xml(
            r#"<row Id="1" PostTypeId="1" AnswerCount="2" AcceptedAnswerId="9" Title="A bug in merge sort" Tags="&lt;java&gt;&lt;sorting&gt;" Body="&lt;p&gt;x&lt;/p&gt;&#xA;" />"#,
        );
        let post = posts[0].as_ref().unwrap();
        assert_eq!(post.post_type, 1);
        assert_eq!(post.title.as_deref(), Some("A bug in merge sort"));
        assert_eq!(post.tags.as_deref(), Some("<java><sorting>"));
        assert_eq!(post.body, "<p>x</p>\n");
        assert_eq!(post.answer_count, 2);
        assert_eq!(post.accepted_answer_id, Some(9));
    }

    #[test]
    fn truncated_row_reports_location() {
        let posts: Vec<_> = parse_posts(&b"<posts>\n<row Id="[..], PostFormat::Xml).collect();
        assert_eq!(posts.len(), 1);
        match &posts[0] {
            Err(Error::Parse { location: Location::Byte(_), .. }) => {}
            other => panic!("expected located parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_id_is_an_error() {
        let posts = xml(r#"<row PostTypeId="1" Title="t" />"#);
        let err = posts[0].as_ref().unwrap_err();
        assert!(err.to_string().contains("missing Id"), "{err}");
    }

    #[test]
    fn unknown_post_types_are_skipped() {
        let posts = xml(
            r#"<row Id="1" PostTypeId="99" /><row Id="2" PostTypeId="16" /><row Id="3" PostTypeId="1" Title="q" />"#,
        );
        assert_eq!(posts.len(), 1);
        assert_eq!(posts[0].as_ref().unwrap().id, 3);
    }

    #[test]
    fn non_numeric_id_is_an_error() {
        let posts = xml(r#"<row Id="abc" PostTypeId="1" />"#);
        assert!(posts[0].is_err());
    }

    #[test]
    fn jsonl_posts_and_line_numbers() {
        let input = concat!(
            r#"{"id": 1, "postTypeId": 1, "title": "t", "body": "<p>b</p>", "tags": "<python>", "answerCount": 0}"#,
            "\n\n",
            r#"{"id": 2, "postTypeId": 2}"#,
            "\n",
            r#"{"id": 3, "postTypeId": "#,
            "\n",
        );
        let posts: Vec<_> = parse_posts(input.as_bytes(), PostFormat::Jsonl).collect();
        assert_eq!(posts.len(), 3);
        assert_eq!(posts[0].as_ref().unwrap().tags.as_deref(), Some("<python>"));
        assert_eq!(posts[1].as_ref().unwrap().post_type, 2);
        match &posts[2] {
            Err(Error::Parse { location: Location::Line(4), .. }) => {}
            other => panic!("expected error on line 4, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_missing_id() {
        let posts: Vec<_> =
            parse_posts(&br#"{"postTypeId": 1}"#[..], PostFormat::Jsonl).collect();
        assert!(posts[0].as_ref().unwrap_err().to_string().contains("missing Id"));
    }
}
