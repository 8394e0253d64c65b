//! Extraction of `Label:`, `Reasoning:`, `Claim:`, `Counterpoint:` and
//! `Summary:` fields from model output.
//!
//! A field line may start with bullets (`-`, `*`, `•`, `+`, `>`), list
//! numbering and Markdown emphasis; the field name is matched
//! case-insensitively and must be followed by a colon. The first matching
//! line wins.

use crate::corpus::normalize_label;

const MARKUP: &[char] = &['*', '_', '`'];

fn skip_prefix(line: &str) -> &str {
    let mut s = line.trim_start();
    loop {
        let before = s.len();
        s = s.trim_start_matches(['-', '•', '+', '>', '#', '*', '_', '`']);
        // list numbering such as "1." or "2)"
        let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 {
            let rest = &s[digits..];
            if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                s = r;
            }
        }
        s = s.trim_start();
        if s.len() == before {
            return s;
        }
    }
}

/// If `line` is a `name:` field line, return the text after the colon.
fn field_value<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let s = skip_prefix(line);
    let head = s.get(..name.len())?;
    if !head.eq_ignore_ascii_case(name) {
        return None;
    }
    let rest = s[name.len()..].trim_start_matches(MARKUP).trim_start();
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches(MARKUP).trim())
}

/// Locate the first `name:` line. Returns its line index and inline value.
fn find_field<'a>(lines: &[&'a str], name: &str) -> Option<(usize, &'a str)> {
    lines
        .iter()
        .enumerate()
        .find_map(|(i, l)| field_value(l, name).map(|v| (i, v)))
}

/// Inline value, or the next non-empty line when the value is on its own line.
fn single_value(lines: &[&str], name: &str) -> Option<String> {
    let (i, v) = find_field(lines, name)?;
    if !v.is_empty() {
        return Some(v.to_string());
    }
    lines[i + 1..]
        .iter()
        .map(|l| l.trim())
        .find(|l| !l.is_empty())
        .map(|l| skip_prefix(l).to_string())
}

/// Everything from the field's inline value to the end of the text.
fn trailing_value(lines: &[&str], name: &str) -> Option<String> {
    let (i, v) = find_field(lines, name)?;
    let mut parts = vec![v];
    parts.extend(lines[i + 1..].iter().copied());
    let text = parts.join("\n").trim().to_string();
    (!text.is_empty()).then_some(text)
}

fn clean_label_value(value: &str) -> String {
    let mut v: String = value.chars().filter(|c| !MARKUP.contains(c)).collect();
    loop {
        let t = v.trim();
        let stripped = [
            ('"', '"'),
            ('\'', '\''),
            ('[', ']'),
            ('(', ')'),
            ('“', '”'),
            ('‘', '’'),
        ]
        .iter()
        .find_map(|(open, close)| t.strip_prefix(*open).and_then(|r| r.strip_suffix(*close)));
        match stripped {
            Some(inner) => v = inner.to_string(),
            None => return normalize_label(t),
        }
    }
}

/// Parse a survey answer: the first `Label:` line's value must equal one of
/// `labels` after normalization. Reasoning is the text after the first
/// `Reasoning:` sigil, if any.
pub fn parse_label<S: AsRef<str>>(
    raw_text: &str,
    labels: &[S],
) -> Option<(String, Option<String>)> {
    let lines: Vec<&str> = raw_text.lines().collect();
    let value = single_value(&lines, "label")?;
    let label = clean_label_value(&value);
    let label = labels
        .iter()
        .map(|l| l.as_ref())
        .find(|l| normalize_label(l) == label)?
        .to_string();
    Some((label, trailing_value(&lines, "reasoning")))
}

/// Parse a claim-generation response into `(claim, counterpoint)`.
pub fn parse_claim(raw_text: &str) -> Option<(String, Option<String>)> {
    let lines: Vec<&str> = raw_text.lines().collect();
    let claim = single_value(&lines, "claim").filter(|c| !c.is_empty())?;
    let counterpoint = single_value(&lines, "counterpoint").filter(|c| !c.is_empty());
    Some((claim, counterpoint))
}

pub fn parse_summary(raw_text: &str) -> Option<String> {
    let lines: Vec<&str> = raw_text.lines().collect();
    trailing_value(&lines, "summary")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: [&str; 4] = ["strongly agree", "agree", "disagree", "strongly disagree"];

    #[test]
    fn normalizes_case_and_extracts_reasoning() {
        assert_eq!(
            parse_label("- Label: Strongly Disagree\n- Reasoning: x", &FOUR),
            Some(("strongly disagree".into(), Some("x".into())))
        );
    }

    #[test]
    fn trailing_punctuation_fails() {
        assert_eq!(parse_label("Label: AGREE!", &FOUR), None);
        assert_eq!(parse_label("Label: disagree.", &FOUR), None);
    }

    #[test]
    fn markup_is_stripped() {
        assert_eq!(
            parse_label("**Label**: agree", &FOUR),
            Some(("agree".into(), None))
        );
    }

    #[test]
    fn first_label_line_wins() {
        let (l, _) = parse_label("- Label: agree\n- Label: disagree", &FOUR).unwrap();
        assert_eq!(l, "agree");
        // a first line that does not match a label is not skipped over
        assert_eq!(parse_label("Label: maybe\nLabel: agree", &FOUR), None);
    }

    #[test]
    fn cot_response_keeps_multiline_reasoning() {
        let raw = "- Label: Disagree\n- Reasoning:\n1. Understanding the statement.\n6. Conclusion: I disagree.";
        let (l, r) = parse_label(raw, &FOUR).unwrap();
        assert_eq!(l, "disagree");
        assert_eq!(
            r.unwrap(),
            "1. Understanding the statement.\n6. Conclusion: I disagree."
        );
    }

    #[test]
    fn no_label_line() {
        assert_eq!(
            parse_label("I think I would disagree with that.", &FOUR),
            None
        );
        assert_eq!(parse_label("", &FOUR), None);
        // "Labels:" is not "Label:"
        assert_eq!(parse_label("Labels: agree", &FOUR), None);
    }

    #[test]
    fn claim_and_counterpoint() {
        let raw = "- Topic: Child development\n- Claim: Children benefit from a working mother.\n- Evidence_for_claim: x\n- Counterpoint: Less time together.\n- Evidence_for_counterpoint: y";
        assert_eq!(
            parse_claim(raw),
            Some((
                "Children benefit from a working mother.".into(),
                Some("Less time together.".into())
            ))
        );
        assert_eq!(
            parse_claim("- **Claim**: Only a claim."),
            Some(("Only a claim.".into(), None))
        );
        assert_eq!(parse_claim("Claim (A clear expression)"), None);
        assert_eq!(parse_claim("no sigil here"), None);
    }

    #[test]
    fn summary_sigil_or_none() {
        assert_eq!(
            parse_summary("- Summary: All five claims emphasize negative impacts."),
            Some("All five claims emphasize negative impacts.".into())
        );
        assert_eq!(parse_summary("Just prose."), None);
        assert_eq!(
            parse_summary("Summary:\nFirst sentence.\nSecond sentence."),
            Some("First sentence.\nSecond sentence.".into())
        );
    }
}
