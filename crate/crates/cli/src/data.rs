//! CoNLL-style datasets.
//!
//! One token per line as `token<TAB>tag`, sentences separated by blank lines.
//! The tag column may also hold a partial label: `A|B` allows either tag and
//! `*` allows any tag. Lines starting with `-DOCSTART-` are skipped.
//!
//! Sentences shorter than three tokens are padded on the left with the
//! reserved token `<s>` tagged `<BOS>`; the boundary tag is only allowed on
//! padding positions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const BOS_TAG: &str = "<BOS>";
pub const ANY_TAG: &str = "*";
pub const TAG_SEPARATOR: char = '|';
pub const MIN_LEN: usize = 3;

/// Strings interned in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.items
    }
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Token vocabulary with `<unk>` at id 0.
    pub fn tokens() -> Self {
        let mut v = Self::new();
        v.insert(UNK_TOKEN);
        v
    }

    pub fn insert(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), self.items.len() - 1);
        self.items.len() - 1
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// Supervision at one position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Gold(usize),
    /// Sorted, deduplicated candidate tags.
    OneOf(Vec<usize>),
    Any,
}

impl Label {
    pub fn gold(&self) -> Option<usize> {
        match self {
            Label::Gold(t) => Some(*t),
            _ => None,
        }
    }

    pub fn allows(&self, tag: usize) -> bool {
        match self {
            Label::Gold(t) => *t == tag,
            Label::OneOf(ts) => ts.binary_search(&tag).is_ok(),
            Label::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Tokens including any leading padding.
    pub tokens: Vec<String>,
    pub labels: Vec<Label>,
    /// Number of leading padding positions.
    pub padding: usize,
}

impl Record {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(|l| l.gold().is_some())
    }

    /// Gold tags, if every position has one.
    pub fn gold(&self) -> Option<Vec<usize>> {
        self.labels.iter().map(Label::gold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub tags: Vocab,
    pub tokens: Vocab,
}

/// How tags outside the known vocabulary are treated.
#[derive(Debug, Clone, Copy)]
pub enum TagPolicy<'a> {
    /// New tags are added as they appear.
    Grow,
    /// Only these tags are accepted.
    Fixed(&'a Vocab),
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn bos_tag(&self) -> Option<usize> {
        self.tags.get(BOS_TAG)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.records.iter().all(Record::is_fully_labeled)
    }

    pub fn num_labeled_tokens(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.labels[r.padding..].iter().filter(|l| l.gold().is_some()).count())
            .sum()
    }

    /// Splits off the records from `at` on, sharing vocabularies.
    pub fn split_at(mut self, at: usize) -> (Dataset, Dataset) {
        let tail = self.records.split_off(at.min(self.records.len()));
        let rest = Dataset {
            records: tail,
            tags: self.tags.clone(),
            tokens: self.tokens.clone(),
        };
        (self, rest)
    }
}

pub fn load_conll(path: &Path, policy: TagPolicy<'_>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_conll(&text, &path.display().to_string(), policy)
}

struct Pending {
    tokens: Vec<String>,
    tags: Vec<String>,
    first_line: usize,
}

pub fn parse_conll(text: &str, source: &str, policy: TagPolicy<'_>) -> Result<Dataset> {
    let mut raw = Vec::new();
    let mut current = Pending {
        tokens: vec![],
        tags: vec![],
        first_line: 1,
    };
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with("-DOCSTART-") {
            if !current.tokens.is_empty() {
                raw.push(std::mem::replace(
                    &mut current,
                    Pending {
                        tokens: vec![],
                        tags: vec![],
                        first_line: lineno + 1,
                    },
                ));
            } else {
                current.first_line = lineno + 1;
            }
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(token), Some(tag), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::format(source, lineno, "expected `token<TAB>tag`"));
        };
        if token.is_empty() || tag.is_empty() {
            return Err(CliError::format(source, lineno, "empty token or tag"));
        }
        current.tokens.push(token.to_string());
        current.tags.push(tag.to_string());
    }
    if !current.tokens.is_empty() {
        raw.push(current);
    }

    let mut tags = match policy {
        TagPolicy::Grow => Vocab::new(),
        TagPolicy::Fixed(v) => v.clone(),
    };
    let grow = matches!(policy, TagPolicy::Grow);
    let mut tokens = Vocab::tokens();
    let mut records = Vec::with_capacity(raw.len());
    for sentence in raw {
        let mut labels = Vec::with_capacity(sentence.tags.len());
        for (offset, tag) in sentence.tags.iter().enumerate() {
            let lineno = sentence.first_line + offset;
            labels.push(parse_label(tag, &mut tags, grow).map_err(|m| CliError::format(source, lineno, m))?);
        }
        let padding = MIN_LEN.saturating_sub(sentence.tokens.len());
        let mut padded_tokens = Vec::with_capacity(padding + sentence.tokens.len());
        let mut padded_labels = Vec::with_capacity(padding + labels.len());
        if padding > 0 {
            let bos = match tags.get(BOS_TAG) {
                Some(b) => b,
                None if grow => tags.insert(BOS_TAG),
                None => {
                    return Err(CliError::format(
                        source,
                        sentence.first_line,
                        format!("sentence shorter than {MIN_LEN} tokens but the tag set has no {BOS_TAG}"),
                    ))
                }
            };
            for _ in 0..padding {
                padded_tokens.push(BOS_TOKEN.to_string());
                padded_labels.push(Label::Gold(bos));
            }
        }
        padded_tokens.extend(sentence.tokens);
        padded_labels.extend(labels);
        for t in &padded_tokens {
            tokens.insert(t);
        }
        records.push(Record {
            tokens: padded_tokens,
            labels: padded_labels,
            padding,
        });
    }
    Ok(Dataset { records, tags, tokens })
}

fn parse_label(field: &str, tags: &mut Vocab, grow: bool) -> std::result::Result<Label, String> {
    if field == ANY_TAG {
        return Ok(Label::Any);
    }
    let mut lookup = |name: &str| -> std::result::Result<usize, String> {
        if name.is_empty() {
            return Err(format!("empty tag in `{field}`"));
        }
        if name == BOS_TAG || name == ANY_TAG {
            return Err(format!("`{name}` is reserved"));
        }
        match tags.get(name) {
            Some(t) => Ok(t),
            None if grow => Ok(tags.insert(name)),
            None => Err(format!("unknown tag `{name}`")),
        }
    };
    if field.contains(TAG_SEPARATOR) {
        let mut ids = field.split(TAG_SEPARATOR).map(&mut lookup).collect::<std::result::Result<Vec<_>, _>>()?;
        ids.sort_unstable();
        ids.dedup();
        Ok(if ids.len() == 1 { Label::Gold(ids[0]) } else { Label::OneOf(ids) })
    } else {
        lookup(field).map(Label::Gold)
    }
}

fn label_text(label: &Label, tags: &Vocab) -> String {
    match label {
        Label::Gold(t) => tags.name(*t).to_string(),
        Label::OneOf(ts) => ts.iter().map(|&t| tags.name(t)).collect::<Vec<_>>().join("|"),
        Label::Any => ANY_TAG.to_string(),
    }
}

/// Inverse of [`parse_conll`]; padding positions are dropped.
pub fn to_conll(data: &Dataset) -> String {
    let mut out = String::new();
    for r in &data.records {
        for (tok, label) in r.tokens.iter().zip(&r.labels).skip(r.padding) {
            let _ = writeln!(out, "{tok}\t{}", label_text(label, &data.tags));
        }
        out.push('\n');
    }
    out
}

/// `token<TAB>gold<TAB>pred` lines with blank-line separators.
pub fn predictions_to_conll(data: &Dataset, predictions: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for (r, pred) in data.records.iter().zip(predictions) {
        for k in r.padding..r.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                r.tokens[k],
                label_text(&r.labels[k], &data.tags),
                data.tags.name(pred[k])
            );
        }
        out.push('\n');
    }
    out
}
