//! Wikitext to plain paragraph text.
//!
//! Templates (infoboxes, citations), tables, references, comments, file and
//! category links and everything from the reference-style trailing sections
//! onward are dropped. Internal links keep their label; external links keep
//! their caption.

use std::collections::HashMap;

const STOP_SECTIONS: &[&str] = &[
    "references",
    "external links",
    "see also",
    "further reading",
    "notes",
    "bibliography",
    "sources",
    "footnotes",
];

const DROPPED_NAMESPACES: &[&str] = &["file:", "image:", "category:", "media:"];

pub fn strip_wikitext(src: &str) -> String {
    let s = remove_delimited(src, "<!--", "-->");
    let s = remove_refs(&s);
    let s = remove_nested(&s, "{{", "}}");
    let s = remove_nested(&s, "{|", "|}");
    let s = render_links(&s, 0);
    render_lines(&s)
}

fn char_len_at(s: &str, i: usize) -> usize {
    s[i..].chars().next().map_or(1, char::len_utf8)
}

/// Removes `open ... close` spans (non-nesting); an unterminated span drops
/// the rest of the input.
fn remove_delimited(s: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find(open) {
        out.push_str(&rest[..start]);
        match rest[start + open.len()..].find(close) {
            Some(end) => rest = &rest[start + open.len() + end + close.len()..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn remove_refs(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = find_ci(rest, "<ref") {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        let Some(tag_end) = after.find('>') else {
            return out;
        };
        if after[..tag_end].ends_with('/') {
            rest = &after[tag_end + 1..];
            continue;
        }
        match find_ci(&after[tag_end..], "</ref>") {
            Some(close) => rest = &after[tag_end + close + "</ref>".len()..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Removes nested `open ... close` spans such as templates.
fn remove_nested(s: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with(open) {
            depth += 1;
            i += open.len();
        } else if depth > 0 && rest.starts_with(close) {
            depth -= 1;
            i += close.len();
        } else {
            let len = char_len_at(s, i);
            if depth == 0 {
                out.push_str(&s[i..i + len]);
            }
            i += len;
        }
    }
    out
}

/// Pairs each `[[` with its matching `]]` (byte offsets), in one pass.
fn link_pairs(s: &str) -> HashMap<usize, usize> {
    let mut pairs = HashMap::new();
    let mut stack = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with("[[") {
            stack.push(i);
            i += 2;
        } else if rest.starts_with("]]") {
            if let Some(open) = stack.pop() {
                pairs.insert(open, i);
            }
            i += 2;
        } else {
            i += char_len_at(s, i);
        }
    }
    pairs
}

/// Splits on `|` at link depth zero.
fn split_top_level_pipes(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with("[[") {
            depth += 1;
            i += 2;
        } else if rest.starts_with("]]") {
            depth = depth.saturating_sub(1);
            i += 2;
        } else {
            if depth == 0 && rest.starts_with('|') {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            i += char_len_at(s, i);
        }
    }
    parts.push(&s[start..]);
    parts
}

const MAX_LINK_DEPTH: usize = 16;

fn render_links(s: &str, depth: usize) -> String {
    if depth > MAX_LINK_DEPTH {
        return s.replace("[[", "").replace("]]", "");
    }
    let pairs = link_pairs(s);
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with("[[") {
            match pairs.get(&i).copied() {
                Some(end) => {
                    let inner = &s[i + 2..end];
                    let lower = inner.trim_start().to_ascii_lowercase();
                    if !DROPPED_NAMESPACES.iter().any(|ns| lower.starts_with(ns)) {
                        let parts = split_top_level_pipes(inner);
                        let label = parts.last().copied().unwrap_or("");
                        let label = if label.trim().is_empty() { parts[0] } else { label };
                        out.push_str(&render_links(label, depth + 1));
                    }
                    i = end + 2;
                }
                None => i += 2,
            }
        } else if rest.starts_with('[')
            && (rest[1..].starts_with("http") || rest[1..].starts_with("//"))
        {
            match rest.find(']') {
                Some(close) => {
                    let inner = &rest[1..close];
                    if let Some(space) = inner.find(char::is_whitespace) {
                        out.push_str(inner[space..].trim());
                    }
                    i += close + 1;
                }
                None => {
                    out.push_str(rest);
                    break;
                }
            }
        } else {
            let len = char_len_at(s, i);
            out.push_str(&s[i..i + len]);
            i += len;
        }
    }
    out
}

fn strip_html_tags(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    while let Some(lt) = rest.find('<') {
        let after = &rest[lt + 1..];
        let tag_like = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '/');
        match (tag_like, after.find('>')) {
            (true, Some(gt)) => {
                out.push_str(&rest[..lt]);
                out.push(' ');
                rest = &after[gt + 1..];
            }
            _ => {
                out.push_str(&rest[..lt + 1]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entities(s: &str) -> String {
    s.replace("&nbsp;", " ")
        .replace("&ndash;", "-")
        .replace("&mdash;", "-")
        .replace("&quot;", "\"")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn heading_name(line: &str) -> Option<String> {
    let t = line.trim();
    if t.len() >= 2 && t.starts_with('=') && t.ends_with('=') {
        Some(t.trim_matches('=').trim().to_lowercase())
    } else {
        None
    }
}

fn render_lines(s: &str) -> String {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let flush = |current: &mut Vec<String>, paragraphs: &mut Vec<String>| {
        if !current.is_empty() {
            paragraphs.push(current.join(" "));
            current.clear();
        }
    };
    for raw in s.lines() {
        if let Some(name) = heading_name(raw) {
            flush(&mut current, &mut paragraphs);
            if STOP_SECTIONS.contains(&name.as_str()) {
                break;
            }
            continue;
        }
        let t = raw.trim();
        if t.starts_with('|') || t.starts_with('!') || t.starts_with("__") {
            continue;
        }
        let t = t.trim_start_matches(['*', '#', ':', ';']);
        let t = t.replace("'''", "").replace("''", "");
        let t = decode_entities(&strip_html_tags(&t));
        let words: Vec<&str> = t.split_whitespace().collect();
        if words.is_empty() {
            flush(&mut current, &mut paragraphs);
        } else {
            current.push(words.join(" "));
        }
    }
    flush(&mut current, &mut paragraphs);
    paragraphs.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_infobox_refs_and_links() {
        let src = "{{Infobox website\n| name = CNN\n| url = {{URL|cnn.com}}\n}}\n'''CNN''' is an American [[news channel|news-based]] [[pay television]] channel.<ref name=\"a\">{{cite web|url=x}}</ref> It was founded in 1980.<ref>Some book</ref>\n\n[[File:CNN.svg|thumb|The [[logo]]]]\nSecond paragraph with [https://example.com a site].\n\n== History ==\nLaunched by Ted Turner.\n\n== References ==\n{{reflist}}\nShould not appear.\n[[Category:News]]";
        let got = strip_wikitext(src);
        assert_eq!(
            got,
            "CNN is an American news-based pay television channel. It was founded in 1980.\nSecond paragraph with a site.\nLaunched by Ted Turner."
        );
    }

    #[test]
    fn tables_and_comments_removed() {
        let src = "Intro <!-- hidden --> text.\n{| class=\"wikitable\"\n|-\n| a || b\n|}\nAfter.";
        assert_eq!(strip_wikitext(src), "Intro text.\nAfter.");
    }

    #[test]
    fn unterminated_constructs_do_not_panic() {
        for src in ["{{open", "[[open", "<ref>open", "<!-- open", "[http://x", "a < b > c", "é[[ü|", "]]}}|}"] {
            let _ = strip_wikitext(src);
        }
        assert_eq!(strip_wikitext("a < b"), "a < b");
    }

    #[test]
    fn self_closing_ref() {
        assert_eq!(strip_wikitext("Fact.<ref name=x/> More."), "Fact. More.");
    }

    #[test]
    fn deep_link_nesting_is_bounded() {
        let src = format!("{}x{}", "[[".repeat(50_000), "]]".repeat(50_000));
        assert_eq!(strip_wikitext(&src), "x");
    }

    #[test]
    fn many_unmatched_openers_stay_linear() {
        let src = "[[a ".repeat(100_000);
        let out = strip_wikitext(&src);
        assert!(out.starts_with("a a"));
    }

    #[test]
    fn empty_input() {
        assert_eq!(strip_wikitext(""), "");
        assert_eq!(strip_wikitext("{{only template}}"), "");
    }
}
