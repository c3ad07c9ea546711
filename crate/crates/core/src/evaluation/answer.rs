use crate::taxonomy::IntentTaxonomy;

const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

/// First standalone `A`–`D` at or after `prefix` (start of text when `None`).
/// Standalone means not adjacent to another letter or digit.
pub fn parse_answer(raw: &str, prefix: Option<&str>) -> Option<char> {
    let start = match prefix {
        Some(p) if !p.is_empty() => raw.find(p)? + p.len(),
        _ => 0,
    };
    let chars: Vec<char> = raw[start..].chars().collect();
    let word = |c: Option<&char>| c.is_some_and(|c| c.is_alphanumeric());
    (0..chars.len()).find_map(|i| {
        let standalone = !word(i.checked_sub(1).and_then(|j| chars.get(j))) && !word(chars.get(i + 1));
        (LETTERS.contains(&chars[i]) && standalone).then_some(chars[i])
    })
}

/// Longest taxonomy label name occurring in `text`.
pub fn match_class_name(text: &str, taxonomy: &IntentTaxonomy) -> Option<String> {
    taxonomy
        .labels()
        .iter()
        .filter(|l| text.contains(l.name.as_str()))
        .max_by_key(|l| l.name.len())
        .map(|l| l.name.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction() {
        assert_eq!(parse_answer("B. The cat is grooming.", None), Some('B'));
        assert_eq!(parse_answer("the answer is (C)", None), Some('C'));
        assert_eq!(parse_answer("no idea", None), None);
        assert_eq!(parse_answer("Walk (D)", None), Some('D'));
        assert_eq!(parse_answer("BAD ideas, A", None), Some('A'));
        assert_eq!(parse_answer("A then Answer: C", Some("Answer:")), Some('C'));
        assert_eq!(parse_answer("A only", Some("Answer:")), None);
        assert_eq!(parse_answer("", None), None);
    }

    #[test]
    fn class_names_prefer_longest() {
        let t = IntentTaxonomy::from_pairs(&[("Run", ""), ("Runaway", ""), ("Walk", ""), ("Feed", "")]).unwrap();
        assert_eq!(match_class_name("it will Runaway now", &t).as_deref(), Some("Runaway"));
        assert_eq!(match_class_name("walk", &t), None);
    }
}
