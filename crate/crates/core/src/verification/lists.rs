//! Numbered-list extraction for `VERIFICATION_QUESTIONS:` and `ANSWERS:` blocks.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

static ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*[*#>]*\s*(?:\[(\d+)\]|\((\d+)\)|(?:q(?:uestion)?|a(?:nswer)?)?\s*(\d+)\s*\**\s*[.):\]-])\s*\**\s*(.*)$",
    )
    .unwrap()
});
static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*[-*•]\s+(.+)$").unwrap());

/// Items keyed by their one-based number.
///
/// Parsing starts after `header` when present (case-insensitive). Lines
/// that continue an item are joined to it with a space. Repeated numbers
/// keep their first occurrence. A list without any numbering falls back
/// to `-`/`*` bullets taken positionally.
pub fn parse_numbered(text: &str, header: &str) -> BTreeMap<usize, String> {
    let header_re = Regex::new(&format!("(?i){}", regex::escape(header))).expect("escaped header");
    let body = match header_re.find(text) {
        Some(m) => &text[m.end()..],
        None => text,
    };

    let mut items: Vec<(usize, String)> = Vec::new();
    for line in body.lines() {
        if let Some(c) = ITEM.captures(line) {
            let num = c.get(1).or(c.get(2)).or(c.get(3)).unwrap().as_str().parse::<usize>().unwrap_or(0);
            items.push((num, c[4].trim().to_string()));
        } else if let Some((_, last)) = items.last_mut() {
            let t = line.trim();
            if !t.is_empty() {
                if !last.is_empty() {
                    last.push(' ');
                }
                last.push_str(t);
            }
        }
    }

    if items.is_empty() {
        items = body
            .lines()
            .filter_map(|l| BULLET.captures(l))
            .enumerate()
            .map(|(i, c)| (i + 1, c[1].trim().to_string()))
            .collect();
    }

    let mut out = BTreeMap::new();
    for (num, text) in items {
        if num >= 1 && !text.is_empty() {
            out.entry(num).or_insert(text);
        }
    }
    out
}
