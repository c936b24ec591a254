//! Post ingestion: dump parsing and question filtering.
//!
//! A question survives filtering when it is a question post, has a title,
//! carries at least one whitelisted tag, and its body holds no image, no
//! table and no code block beyond the configured budget.

mod html;
mod posts;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use posts::{parse_posts, JsonlPosts, PostFormat, PostStream, XmlPosts};

pub const QUESTION_POST_TYPE: u32 = 1;

/// One row of the post dump, before filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawPost {
    pub id: u64,
    pub post_type: u32,
    pub title: Option<String>,
    /// HTML body.
    pub body: String,
    /// Either `<t1><t2>` or `|t1|t2|`.
    pub tags: Option<String>,
    pub accepted_answer_id: Option<u64>,
    pub answer_count: u64,
}

/// A filtered, markup-free question. Serializes to one line of
/// `questions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Question {
    pub id: u64,
    pub title: String,
    pub body_text: String,
    pub tags: Vec<String>,
    pub answered: bool,
}

impl Question {
    /// The text handed to an embedder: title, newline, body.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}", self.title, self.body_text)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsweredPolicy {
    /// At least one answer.
    #[default]
    AnyAnswer,
    /// An accepted answer exists.
    AcceptedOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    /// Lowercase tag names; a question needs at least one of them.
    pub tag_whitelist: BTreeSet<String>,
    pub exclude_images: bool,
    pub exclude_code_blocks: bool,
    /// Longest allowed `<pre><code>` block, in characters.
    pub max_inline_code_chars: usize,
    pub answered_policy: AnsweredPolicy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tag_whitelist: ["javascript", "python"].into_iter().map(String::from).collect(),
            exclude_images: true,
            exclude_code_blocks: true,
            max_inline_code_chars: 0,
            answered_policy: AnsweredPolicy::AnyAnswer,
        }
    }
}

impl FilterConfig {
    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.tag_whitelist = tags
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        self
    }
}

/// Splits a dump tag string into lowercase tag names, first occurrence order.
pub fn parse_tags(raw: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    raw.split(['<', '>', '|'])
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Applies every filter rule to a single post.
pub fn filter_post(post: &RawPost, cfg: &FilterConfig) -> Option<Question> {
    if post.post_type != QUESTION_POST_TYPE {
        return None;
    }
    let title = post.title.as_deref().map(str::trim).filter(|t| !t.is_empty())?;
    let tags = parse_tags(post.tags.as_deref().unwrap_or(""));
    if !tags.iter().any(|t| cfg.tag_whitelist.contains(t)) {
        return None;
    }

    let scan = html::scan_body(&post.body);
    if scan.has_table || (cfg.exclude_images && scan.has_image) {
        return None;
    }
    if cfg.exclude_code_blocks
        && scan.longest_code_block.is_some_and(|len| len > cfg.max_inline_code_chars)
    {
        return None;
    }

    let answered = match cfg.answered_policy {
        AnsweredPolicy::AnyAnswer => post.answer_count >= 1,
        AnsweredPolicy::AcceptedOnly => post.accepted_answer_id.is_some(),
    };
    Some(Question { id: post.id, title: title.to_string(), body_text: scan.text, tags, answered })
}

/// Lazily filters a post sequence, preserving order.
pub fn filter_questions<'a, I>(posts: I, cfg: &'a FilterConfig) -> impl Iterator<Item = Question> + 'a
where
    I: IntoIterator<Item = RawPost>,
    I::IntoIter: 'a,
{
    posts.into_iter().filter_map(move |p| filter_post(&p, cfg))
}
