//! Ordered rewrite rules for social-media feedback text.
//!
//! A [`RuleSet`] is an ordered list of regex rules. Text is carried through
//! the rules as a sequence of segments: raw text, or replacement tokens
//! emitted by an earlier rule. Rules only ever see raw segments, so a
//! replacement token is never re-matched by a later rule. After the last
//! rule, tokens are spliced back in surrounded by spaces, whitespace is
//! collapsed and, in lowercased mode, the result is case-folded.
//!
//! Default order:
//!
//! | # | class       | effect                                                   |
//! |---|-------------|----------------------------------------------------------|
//! | 1 | url         | `http(s)://…`, `www.…`, `t.co/…` → `URL`                 |
//! | 2 | emoticon    | `:(` `:-(` → sadsmiley, `:)` `:-)` `;-)` `:-))` `:D` → happysmiley, `:-D` `XD` → laughingsmiley, other eye-nose-mouth → emote |
//! | 3 | dbhandle    | `@DB_Bahn`, `@Bahnansagen`, `@Bahn_Info` → dbusername     |
//! | 4 | handle      | other `@handle` → twitterusername                         |
//! | 5 | hashtag     | `#tag` → `tag`                                           |
//! | 6 | sbahn       | `S-Bahn`, `S Bahn`, … → sbahn                            |
//! | 7 | money/dates/number | currency amounts, dates and clock times, other numbers |
//! | 8 | repeat      | `??`+ `!!`+ `..`+ → strongquestion/strongexclamation/annoyeddots |
//! | 9 | punctuation | deleted                                                  |
//! |10 | symbol      | emoji, symbols, format characters deleted                |

use std::fmt;
use std::str::FromStr;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::LabeledDataset;
use crate::error::{Error, Result};

pub const RULESET_VERSION: u32 = 1;

/// Deutsche Bahn handles pooled into `dbusername` by default.
pub const DEFAULT_DB_HANDLES: [&str; 3] = ["DB_Bahn", "Bahnansagen", "Bahn_Info"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CasingMode {
    Cased,
    Lowercased,
}

impl FromStr for CasingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cased" => Ok(CasingMode::Cased),
            "lowercased" => Ok(CasingMode::Lowercased),
            other => Err(format!("unknown casing mode {other:?}")),
        }
    }
}

impl fmt::Display for CasingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CasingMode::Cased => "cased",
            CasingMode::Lowercased => "lowercased",
        })
    }
}

/// The closed set of replacement tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    StrongQuestion,
    StrongExclamation,
    AnnoyedDots,
    Url,
    Number,
    Money,
    Dates,
    TwitterUsername,
    DbUsername,
    Sbahn,
    SadSmiley,
    HappySmiley,
    LaughingSmiley,
    Emote,
}

impl Token {
    pub const ALL: [Token; 14] = [
        Token::StrongQuestion,
        Token::StrongExclamation,
        Token::AnnoyedDots,
        Token::Url,
        Token::Number,
        Token::Money,
        Token::Dates,
        Token::TwitterUsername,
        Token::DbUsername,
        Token::Sbahn,
        Token::SadSmiley,
        Token::HappySmiley,
        Token::LaughingSmiley,
        Token::Emote,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Token::StrongQuestion => "strongquestion",
            Token::StrongExclamation => "strongexclamation",
            Token::AnnoyedDots => "annoyeddots",
            Token::Url => "URL",
            Token::Number => "number",
            Token::Money => "money",
            Token::Dates => "dates",
            Token::TwitterUsername => "twitterusername",
            Token::DbUsername => "dbusername",
            Token::Sbahn => "sbahn",
            Token::SadSmiley => "sadsmiley",
            Token::HappySmiley => "happysmiley",
            Token::LaughingSmiley => "laughingsmiley",
            Token::Emote => "emote",
        }
    }

    fn parse(s: &str) -> Option<Token> {
        Token::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleClass {
    Url,
    Emoticon,
    DbHandle,
    Handle,
    Hashtag,
    Sbahn,
    Money,
    Dates,
    Number,
    Repeat,
    Punctuation,
    Symbol,
}

impl RuleClass {
    const NAMES: [(RuleClass, &'static str); 12] = [
        (RuleClass::Url, "url"),
        (RuleClass::Emoticon, "emoticon"),
        (RuleClass::DbHandle, "dbhandle"),
        (RuleClass::Handle, "handle"),
        (RuleClass::Hashtag, "hashtag"),
        (RuleClass::Sbahn, "sbahn"),
        (RuleClass::Money, "money"),
        (RuleClass::Dates, "dates"),
        (RuleClass::Number, "number"),
        (RuleClass::Repeat, "repeat"),
        (RuleClass::Punctuation, "punctuation"),
        (RuleClass::Symbol, "symbol"),
    ];

    pub fn as_str(self) -> &'static str {
        Self::NAMES.iter().find(|(c, _)| *c == self).map(|(_, n)| *n).unwrap()
    }

    fn parse(s: &str) -> Option<RuleClass> {
        Self::NAMES.iter().find(|(_, n)| *n == s).map(|(c, _)| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Replace(Token),
    Delete,
    /// Keep capture group 1 as raw text, drop the rest of the match.
    Unwrap,
}

impl Action {
    fn as_str(self) -> &'static str {
        match self {
            Action::Replace(t) => t.as_str(),
            Action::Delete => "<delete>",
            Action::Unwrap => "<unwrap>",
        }
    }

    fn parse(s: &str) -> Option<Action> {
        match s {
            "<delete>" => Some(Action::Delete),
            "<unwrap>" => Some(Action::Unwrap),
            t => Token::parse(t).map(Action::Replace),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub class: RuleClass,
    /// When set, a match whose first (last) character is a word character
    /// is rejected if the preceding (following) character is one too.
    pub bounded: bool,
    pub action: Action,
    regex: Regex,
}

impl Rule {
    pub fn new(class: RuleClass, bounded: bool, pattern: &str, action: Action) -> Result<Self> {
        if pattern.contains(['\t', '\n']) {
            return Err(Error::invalid("rule patterns may not contain tabs or newlines"));
        }
        let regex = Regex::new(pattern)
            .map_err(|e| Error::invalid(format!("bad {} pattern: {e}", class.as_str())))?;
        if action == Action::Unwrap && regex.captures_len() < 2 {
            return Err(Error::invalid("<unwrap> rules need a capture group"));
        }
        Ok(Rule {
            class,
            bounded,
            action,
            regex,
        })
    }

    pub fn pattern(&self) -> &str {
        self.regex.as_str()
    }
}

/// An immutable, ordered normalization pipeline.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: u32,
    pub casing: CasingMode,
    rules: Vec<Rule>,
}

const URL_PATTERN: &str = r#"(?i)(?:https?://|www\.|\bt\.co/)(?:\S*[^\s.,;:!?)\]}"'»“”…])?"#;
const NUMBER: &str = r"\d+(?:[.,]\d+)*(?:,-)?";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn db_handle_pattern(handles: &[&str]) -> String {
    let alternatives: Vec<String> = handles.iter().map(|h| regex::escape(h)).collect();
    format!("(?i)@(?:{})", alternatives.join("|"))
}

impl RuleSet {
    /// The default rule list with the default Deutsche Bahn handles.
    pub fn standard(casing: CasingMode) -> Self {
        Self::with_db_handles(casing, &DEFAULT_DB_HANDLES).expect("built-in rules compile")
    }

    pub fn with_db_handles(casing: CasingMode, db_handles: &[&str]) -> Result<Self> {
        use Action::*;
        use RuleClass as C;
        if db_handles.is_empty() {
            return Err(Error::invalid("at least one Deutsche Bahn handle is required"));
        }
        let money = format!(
            r"(?:€|\bEUR\b|\bEuro\b)\s?{NUMBER}|{NUMBER}\s?(?:€|EUR\b|Euros?\b)"
        );
        let specs: Vec<(RuleClass, bool, String, Action)> = vec![
            (C::Url, false, URL_PATTERN.into(), Replace(Token::Url)),
            (C::Emoticon, true, r":-\(|:\(".into(), Replace(Token::SadSmiley)),
            (C::Emoticon, true, r":-D".into(), Replace(Token::LaughingSmiley)),
            (C::Emoticon, true, r":-\)\)|:-\)|:\)|;-\)|:D".into(), Replace(Token::HappySmiley)),
            (C::Emoticon, true, r"XD|xD".into(), Replace(Token::LaughingSmiley)),
            (C::Emoticon, true, r"[:;=][-'^o]?[()\[\]DPp/\\|*]".into(), Replace(Token::Emote)),
            (C::DbHandle, true, db_handle_pattern(db_handles), Replace(Token::DbUsername)),
            (C::Handle, false, r"@\w+".into(), Replace(Token::TwitterUsername)),
            (C::Hashtag, false, r"#(\w+)".into(), Unwrap),
            (C::Sbahn, false, r"(?i)\bs[\s\p{P}\p{S}]*bahn\b".into(), Replace(Token::Sbahn)),
            (C::Money, true, money, Replace(Token::Money)),
            (
                C::Dates,
                true,
                r"(?:0?[1-9]|[12]\d|3[01])\.(?:0?[1-9]|1[0-2])\.(?:\d{4}|\d{2})?|(?:0?[1-9]|[12]\d|3[01])/(?:0?[1-9]|1[0-2])(?:/(?:\d{4}|\d{2}))?|(?:[01]?\d|2[0-3]):[0-5]\d(?::[0-5]\d)?".into(),
                Replace(Token::Dates),
            ),
            (C::Number, true, NUMBER.into(), Replace(Token::Number)),
            (C::Repeat, false, r"\?{2,}".into(), Replace(Token::StrongQuestion)),
            (C::Repeat, false, r"!{2,}".into(), Replace(Token::StrongExclamation)),
            (C::Repeat, false, r"\.{2,}|…+".into(), Replace(Token::AnnoyedDots)),
            (C::Punctuation, false, r"\p{P}+".into(), Delete),
            (
                C::Symbol,
                false,
                r"[\p{S}\p{Extended_Pictographic}\p{Cf}\p{Co}\p{Me}\x{FE00}-\x{FE0F}\x00-\x08\x0B\x0C\x0E-\x1F\x7F]+".into(),
                Delete,
            ),
        ];
        let rules = specs
            .into_iter()
            .map(|(class, bounded, pattern, action)| Rule::new(class, bounded, &pattern, action))
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet {
            version: RULESET_VERSION,
            casing,
            rules,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Serializes to the line-oriented rules format:
    ///
    /// ```text
    /// @version <n>
    /// @casing cased|lowercased
    /// <class>\t<bounded|free>\t<pattern>\t<replacement|<delete>|<unwrap>>
    /// ```
    pub fn to_rules_text(&self) -> String {
        let mut out = format!(
            "# germfeed normalization rules\n@version {}\n@casing {}\n",
            self.version, self.casing
        );
        for rule in &self.rules {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                rule.class.as_str(),
                if rule.bounded { "bounded" } else { "free" },
                rule.pattern(),
                rule.action.as_str()
            ));
        }
        out
    }

    pub fn from_rules_text(text: &str) -> Result<Self> {
        let mut version = None;
        let mut casing = None;
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("@version ") {
                version = Some(
                    rest.trim()
                        .parse::<u32>()
                        .map_err(|e| Error::record(line_no, format!("bad version: {e}")))?,
                );
                continue;
            }
            if let Some(rest) = line.strip_prefix("@casing ") {
                casing = Some(rest.trim().parse::<CasingMode>().map_err(|m| Error::record(line_no, m))?);
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [class, bound, pattern, action] = fields[..] else {
                return Err(Error::record(line_no, "expected class, bound, pattern, replacement"));
            };
            let class = RuleClass::parse(class)
                .ok_or_else(|| Error::record(line_no, format!("unknown rule class {class:?}")))?;
            let bounded = match bound {
                "bounded" => true,
                "free" => false,
                other => return Err(Error::record(line_no, format!("unknown bound {other:?}"))),
            };
            let action = Action::parse(action)
                .ok_or_else(|| Error::record(line_no, format!("unknown replacement {action:?}")))?;
            rules.push(
                Rule::new(class, bounded, pattern, action)
                    .map_err(|e| Error::record(line_no, e.to_string()))?,
            );
        }
        Ok(RuleSet {
            version: version.ok_or_else(|| Error::invalid("rules file lacks @version"))?,
            casing: casing.ok_or_else(|| Error::invalid("rules file lacks @casing"))?,
            rules,
        })
    }

    /// Content address of the rules text: the first 16 hex digits of its SHA-256.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.to_rules_text().as_bytes());
        hex::encode(&digest[..8])
    }
}

enum Segment {
    Raw(String),
    Tok(Token),
}

fn edges_ok(text: &str, start: usize, end: usize) -> bool {
    let matched = &text[start..end];
    let first_is_word = matched.chars().next().is_some_and(is_word_char);
    let last_is_word = matched.chars().next_back().is_some_and(is_word_char);
    let before_is_word = text[..start].chars().next_back().is_some_and(is_word_char);
    let after_is_word = text[end..].chars().next().is_some_and(is_word_char);
    !(first_is_word && before_is_word) && !(last_is_word && after_is_word)
}

fn next_boundary(text: &str, pos: usize) -> usize {
    pos + text[pos..].chars().next().map_or(1, char::len_utf8)
}

fn emit(rule: &Rule, caps: &Captures<'_>, out: &mut Vec<Segment>) {
    match rule.action {
        Action::Replace(t) => out.push(Segment::Tok(t)),
        Action::Delete => {}
        Action::Unwrap => {
            if let Some(inner) = caps.get(1) {
                out.push(Segment::Raw(inner.as_str().to_string()));
            }
        }
    }
}

fn apply_to_raw(text: &str, rule: &Rule, out: &mut Vec<Segment>) {
    let mut last = 0;
    let mut pos = 0;
    while pos <= text.len() {
        let Some(caps) = rule.regex.captures_at(text, pos) else {
            break;
        };
        let m = caps.get(0).expect("group 0 always participates");
        if m.is_empty() || (rule.bounded && !edges_ok(text, m.start(), m.end())) {
            if m.start() >= text.len() {
                break;
            }
            pos = next_boundary(text, m.start());
            continue;
        }
        if m.start() > last {
            out.push(Segment::Raw(text[last..m.start()].to_string()));
        }
        emit(rule, &caps, out);
        last = m.end();
        pos = m.end();
    }
    if last < text.len() {
        out.push(Segment::Raw(text[last..].to_string()));
    }
}

fn apply_rule(segments: Vec<Segment>, rule: &Rule) -> Vec<Segment> {
    let mut rewritten = Vec::with_capacity(segments.len());
    for segment in segments {
        match segment {
            Segment::Raw(text) => apply_to_raw(&text, rule, &mut rewritten),
            tok => rewritten.push(tok),
        }
    }
    // Deletions and unwraps leave neighbouring raw pieces; later rules must
    // see them as one string.
    let mut merged: Vec<Segment> = Vec::with_capacity(rewritten.len());
    for segment in rewritten {
        match (merged.last_mut(), segment) {
            (Some(Segment::Raw(prev)), Segment::Raw(next)) => prev.push_str(&next),
            (_, segment) => merged.push(segment),
        }
    }
    merged
}

/// Normalizes one text. Total: never fails.
pub fn normalize(text: &str, ruleset: &RuleSet) -> String {
    let mut segments = vec![Segment::Raw(text.to_string())];
    for rule in &ruleset.rules {
        segments = apply_rule(segments, rule);
    }
    let mut joined = String::with_capacity(text.len() + 16);
    for segment in &segments {
        match segment {
            Segment::Raw(s) => joined.push_str(s),
            Segment::Tok(t) => {
                joined.push(' ');
                joined.push_str(t.as_str());
                joined.push(' ');
            }
        }
    }
    let collapsed = joined.split_whitespace().collect::<Vec<_>>().join(" ");
    match ruleset.casing {
        CasingMode::Cased => collapsed,
        CasingMode::Lowercased => collapsed.to_lowercase(),
    }
}

pub fn normalize_dataset(dataset: &LabeledDataset, ruleset: &RuleSet) -> LabeledDataset {
    let mut out = dataset.clone();
    for doc in &mut out.documents {
        doc.text = normalize(&doc.text, ruleset);
    }
    out
}
