use std::fs::File;
use std::io::BufReader;

use qaclust::ingest::{filter_post, parse_posts, AnsweredPolicy, FilterConfig, PostFormat, Question, RawPost};

fn fixture_posts() -> Vec<RawPost> {
    let file = File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/posts_200.xml")).unwrap();
    parse_posts(BufReader::new(file), PostFormat::Xml).collect::<Result<_, _>>().unwrap()
}

fn expected_ids() -> Vec<u64> {
    include_str!("fixtures/posts_200.expected_ids").lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn fixture_retains_audited_ids() {
    let posts = fixture_posts();
    // five rows carry an unknown post type and are skipped by the reader
    assert_eq!(posts.len(), 195);
    let cfg = FilterConfig::default();
    let kept: Vec<u64> = posts.iter().filter_map(|p| filter_post(p, &cfg)).map(|q| q.id).collect();
    assert_eq!(kept, expected_ids());
}

#[test]
fn fixture_questions_are_clean() {
    let cfg = FilterConfig::default();
    for q in fixture_posts().iter().filter_map(|p| filter_post(p, &cfg)) {
        assert!(!q.body_text.contains("<p>"), "{}", q.body_text);
        assert!(q.tags.iter().any(|t| t == "python" || t == "javascript"));
        assert!(!q.title.is_empty());
    }
}

#[test]
fn fixture_through_jsonl_matches_xml() {
    // Re-encode the XML rows as JSONL and parse them back.
    let posts = fixture_posts();
    let mut jsonl = String::new();
    for p in &posts {
        let v = serde_json::json!({
            "id": p.id,
            "postTypeId": p.post_type,
            "title": p.title,
            "body": p.body,
            "tags": p.tags,
            "acceptedAnswerId": p.accepted_answer_id,
            "answerCount": p.answer_count,
        });
        jsonl.push_str(&v.to_string());
        jsonl.push('\n');
    }
    let again: Vec<RawPost> = parse_posts(jsonl.as_bytes(), PostFormat::Jsonl).collect::<Result<_, _>>().unwrap();
    assert_eq!(again, posts);
}

#[test]
fn accepted_only_policy_on_fixture() {
    let posts = fixture_posts();
    let strict = FilterConfig { answered_policy: AnsweredPolicy::AcceptedOnly, ..FilterConfig::default() };
    let any: Vec<Question> = posts.iter().filter_map(|p| filter_post(p, &FilterConfig::default())).collect();
    let acc: Vec<Question> = posts.iter().filter_map(|p| filter_post(p, &strict)).collect();
    assert_eq!(any.len(), acc.len());
    for (a, s) in any.iter().zip(&acc) {
        // accepted implies answered
        assert!(!s.answered || a.answered);
    }
    assert!(any.iter().any(|q| q.answered) && any.iter().any(|q| !q.answered));
}
