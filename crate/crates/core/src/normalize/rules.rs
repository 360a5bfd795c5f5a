//! Whole-word rewrite rules applied to a fixpoint.
//!
//! One pass lowercases, drops parenthesized content, fires every rule in
//! order, removes punctuation other than `,` `*` and `'`, and normalizes
//! whitespace. Passes repeat until the text stops changing.

use thiserror::Error;

use crate::text::fold_char;

/// Upper bound on passes before a rule set is declared cyclic for a phrase.
pub const MAX_PASSES: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rewrite rules did not converge within {MAX_PASSES} passes for phrase {0:?}")]
    Cycle(String),
    #[error("rules file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub sources: Vec<String>,
    pub target: String,
    pub order: usize,
}

impl RewriteRule {
    pub fn new<S: AsRef<str>>(sources: &[S], target: &str, order: usize) -> Result<Self, String> {
        let target = clean_phrase(target);
        let mut srcs: Vec<String> = Vec::new();
        for s in sources {
            let s = clean_phrase(s.as_ref());
            if s.is_empty() {
                continue;
            }
            if s == target {
                return Err(format!("source {s:?} equals its target"));
            }
            if !srcs.contains(&s) {
                srcs.push(s);
            }
        }
        if srcs.is_empty() {
            return Err("rule has no sources".into());
        }
        // longest phrase first so "suffer from" wins over "suffer"
        srcs.sort_by(|a, b| b.split(' ').count().cmp(&a.split(' ').count()).then(b.len().cmp(&a.len())));
        Ok(Self {
            sources: srcs,
            target,
            order,
        })
    }
}

fn clean_phrase(s: &str) -> String {
    crate::text::normalize_phrase(s)
}

#[derive(Debug, Clone)]
struct CompiledRule {
    sources: Vec<Vec<String>>,
    target: Vec<String>,
}

/// An ordered rule list ready for application.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<RewriteRule>,
    compiled: Vec<CompiledRule>,
}

impl Default for RuleSet {
    /// The bundled pre-cleaning table.
    fn default() -> Self {
        Self::parse(include_str!("../../assets/rules-default.tsv")).expect("bundled rules parse")
    }
}

impl RuleSet {
    pub fn new(mut rules: Vec<RewriteRule>) -> Self {
        rules.sort_by_key(|r| r.order);
        let compiled = rules
            .iter()
            .map(|r| CompiledRule {
                sources: r.sources.iter().map(|s| s.split(' ').map(str::to_string).collect()).collect(),
                target: r.target.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
            })
            .collect();
        Self { rules, compiled }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    /// Parses the rules TSV: `sources TAB target`, sources comma-separated.
    /// `#` lines are comments; an optional `sources\ttarget` header is skipped.
    pub fn parse(src: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') || line == "sources\ttarget" {
                continue;
            }
            let (sources, target) = line.split_once('\t').ok_or_else(|| RuleError::Parse {
                line: i + 1,
                message: "expected sources<TAB>target".into(),
            })?;
            let sources: Vec<&str> = sources.split(',').collect();
            let rule = RewriteRule::new(&sources, target, rules.len()).map_err(|message| RuleError::Parse { line: i + 1, message })?;
            rules.push(rule);
        }
        Ok(Self::new(rules))
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    fn fire(&self, tokens: Vec<String>) -> Vec<String> {
        let mut tokens = tokens;
        for rule in &self.compiled {
            let mut out = Vec::with_capacity(tokens.len());
            let mut i = 0;
            'scan: while i < tokens.len() {
                for src in &rule.sources {
                    if tokens[i..].starts_with(src) {
                        out.extend(rule.target.iter().cloned());
                        i += src.len();
                        continue 'scan;
                    }
                }
                out.push(std::mem::take(&mut tokens[i]));
                i += 1;
            }
            tokens = out;
        }
        tokens
    }

    fn pass(&self, phrase: &str) -> String {
        let lowered: String = phrase
            .chars()
            .map(|c| match c {
                '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
                c => fold_char(c),
            })
            .collect();
        let unparened = strip_parens(&lowered);
        let tokens: Vec<String> = unparened.split_whitespace().map(str::to_string).collect();
        let rewritten = self.fire(tokens).join(" ");
        let kept: String = rewritten.chars().filter(|&c| keep_char(c)).collect();
        kept.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Rewrites a phrase to the fixpoint of one rule pass.
    pub fn apply(&self, phrase: &str) -> Result<String, RuleError> {
        let mut current = phrase.to_string();
        for _ in 0..MAX_PASSES {
            let next = self.pass(&current);
            if next == current {
                return Ok(next);
            }
            current = next;
        }
        Err(RuleError::Cycle(phrase.to_string()))
    }
}

/// Free-function form of [`RuleSet::apply`].
pub fn apply_rules(phrase: &str, rules: &RuleSet) -> Result<String, RuleError> {
    rules.apply(phrase)
}

#[inline]
fn keep_char(c: char) -> bool {
    c.is_alphanumeric() || c.is_whitespace() || matches!(c, ',' | '*' | '\'')
}

/// Removes `( ... )` groups including nesting; unbalanced parentheses are left
/// for punctuation removal.
fn strip_parens(s: &str) -> String {
    if !s.contains('(') {
        return s.to_string();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut keep = vec![true; chars.len()];
    let mut open: Vec<usize> = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' => open.push(i),
            ')' => {
                if let Some(start) = open.pop() {
                    keep[start..=i].iter_mut().for_each(|k| *k = false);
                }
            }
            _ => {}
        }
    }
    chars
        .iter()
        .zip(keep)
        .map(|(&c, k)| if k { c } else { ' ' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_rules() -> RuleSet {
        RuleSet::default()
    }

    #[test]
    fn table_examples() {
        let r = default_rules();
        assert_eq!(r.apply("hard to breathe").unwrap(), "can't breathe");
        assert_eq!(r.apply("my head hurt").unwrap(), "head hurt");
        assert_eq!(r.apply("reissues").unwrap(), "reissues");
        assert_eq!(r.apply("could barely walk").unwrap(), "can't walk");
    }

    #[test]
    fn cleaning_steps() {
        let r = RuleSet::empty();
        assert_eq!(r.apply("Sore (really bad) Throat!!").unwrap(), "sore throat");
        assert_eq!(r.apply("f*ck, my back").unwrap(), "f*ck, my back");
        assert_eq!(r.apply("a ((nested) x) b").unwrap(), "a b");
        assert_eq!(r.apply("can’t smell").unwrap(), "can't smell");
        assert_eq!(r.apply("covid-19 :(").unwrap(), "covid19");
    }

    #[test]
    fn adjacent_and_multiword() {
        let r = default_rules();
        assert_eq!(r.apply("my my my head").unwrap(), "head");
        assert_eq!(r.apply("i suffer from migraines").unwrap(), "problem migraines");
        assert_eq!(r.apply("issues with sleep").unwrap(), "problem sleep");
        assert_eq!(r.apply("102 ° fever").unwrap(), "102 degree fever");
        assert_eq!(r.apply("lack of taste").unwrap(), "loss of taste");
    }

    #[test]
    fn deletion_to_empty() {
        assert_eq!(default_rules().apply("it is").unwrap(), "");
    }

    #[test]
    fn growing_rule_is_a_cycle() {
        let rules = RuleSet::new(vec![RewriteRule::new(&["a"], "a a", 0).unwrap()]);
        assert_eq!(rules.apply("a"), Err(RuleError::Cycle("a".into())));
    }

    #[test]
    fn self_target_rejected() {
        assert!(RewriteRule::new(&["loss of"], "loss of", 0).is_err());
        assert!(RuleSet::parse("x\tx\n").is_err());
        assert!(RuleSet::parse("no tab here\n").is_err());
    }

    #[test]
    fn bundled_table_shape() {
        let r = default_rules();
        assert_eq!(r.rules().len(), 9);
        assert_eq!(r.rules()[1].target, "can't");
        assert_eq!(r.rules()[1].sources.len(), 17);
        assert!(r.rules()[6].target.is_empty());
    }

    fn phrase() -> impl Strategy<Value = String> {
        let words = prop_oneof![
            Just("my"), Just("could"), Just("barely"), Just("hard"), Just("to"), Just("breathe"),
            Just("issue"), Just("issues"), Just("problem"), Just("with"), Just("in"), Just("can"),
            Just("not"), Just("lack"), Just("of"), Just("loss"), Just("°"), Just("("), Just(")"),
            Just(","), Just("*"), Just("!"), Just("it's"), Just("Fever"), Just("head"), Just("very"),
            Just("suffer"), Just("from"), Just("cant"), Just("can't"), Just("’"), Just("-"), Just("é"),
        ];
        proptest::collection::vec((words, prop_oneof![Just(" "), Just(""), Just("  ")]), 0..12)
            .prop_map(|v| v.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
    }

    proptest! {
        #[test]
        fn idempotent_and_clean(p in phrase()) {
            let r = default_rules();
            let once = r.apply(&p).unwrap();
            prop_assert_eq!(r.apply(&once).unwrap(), once.clone());
            prop_assert!(once.chars().all(|c| c.is_alphanumeric() || matches!(c, ' ' | ',' | '*' | '\'')));
            prop_assert!(!once.contains("  ") && once.trim() == once);
        }
    }
}
