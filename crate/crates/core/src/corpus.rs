//! Labeled code snippets: JSONL ingestion, cleaning, and stratified splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid cleaning policy: {0}")]
    InvalidPolicy(String),
    #[error("test fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One code snippet and its language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snippet {
    pub text: String,
    pub label: String,
}

impl Snippet {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
        }
    }
}

/// Ordered language names with dense ids. Order is lexicographic unless
/// built explicitly with [`LabelSet::from_ordered`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    /// Sorted set of the distinct names.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        Self::from_ordered(sorted.into_iter().collect()).expect("distinct by construction")
    }

    /// Keeps the given order; names must be unique.
    pub fn from_ordered(labels: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(CorpusError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Serialize for LabelSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.labels.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<String>::deserialize(d)?;
        LabelSet::from_ordered(labels).map_err(serde::de::Error::custom)
    }
}

/// Snippets in ingestion order plus their label set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    snippets: Vec<Snippet>,
    labels: LabelSet,
}

impl Corpus {
    /// Builds a corpus whose label set is the sorted set of snippet labels.
    pub fn new(snippets: Vec<Snippet>) -> Self {
        let labels = LabelSet::from_names(snippets.iter().map(|s| s.label.as_str()));
        Self { snippets, labels }
    }

    /// Builds a corpus over an explicit label set.
    pub fn with_labels(snippets: Vec<Snippet>, labels: LabelSet) -> Result<Self, CorpusError> {
        if let Some(s) = snippets.iter().find(|s| labels.id(&s.label).is_none()) {
            return Err(CorpusError::UnknownLabel(s.label.clone()));
        }
        Ok(Self { snippets, labels })
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    /// Label id of every snippet, in order.
    pub fn label_ids(&self) -> Vec<usize> {
        self.snippets
            .iter()
            .map(|s| self.labels.id(&s.label).expect("corpus invariant"))
            .collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.snippets.iter().map(|s| s.text.as_str())
    }
}

/// Parses JSON Lines records with exactly the keys `text` and `label`.
/// Blank lines are skipped; errors carry the 1-based line number.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut snippets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let snippet: Snippet = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        snippets.push(snippet);
    }
    Ok(Corpus::new(snippets))
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_jsonl(BufReader::new(file))
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in corpus.snippets() {
        let line = serde_json::to_string(s).expect("snippet serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Cleaning and filtering rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningPolicy {
    /// Snippets shorter than this (in chars, after normalization) are dropped.
    pub min_chars: usize,
    /// Longer snippets are truncated to this many chars.
    pub max_chars: usize,
    /// Rewrite CRLF and lone CR as LF.
    pub normalize_newlines: bool,
    /// Remove trailing whitespace from every line.
    pub strip_trailing_whitespace: bool,
    pub excluded_labels: Vec<String>,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self {
            min_chars: 10,
            max_chars: 10_000,
            normalize_newlines: true,
            strip_trailing_whitespace: true,
            excluded_labels: Vec::new(),
        }
    }
}

impl CleaningPolicy {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_chars == 0 || self.min_chars > self.max_chars {
            return Err(CorpusError::InvalidPolicy(format!(
                "need 0 < min_chars ({}) <= max_chars ({})",
                self.min_chars, self.max_chars
            )));
        }
        Ok(())
    }

    /// Cleans one text; `None` when it falls below `min_chars`.
    pub fn clean_text(&self, text: &str) -> Option<String> {
        let mut t = if self.normalize_newlines {
            text.replace("\r\n", "\n").replace('\r', "\n")
        } else {
            text.to_string()
        };
        if self.strip_trailing_whitespace {
            t = strip_line_ends(&t);
        }
        if t.chars().count() > self.max_chars {
            t = t.chars().take(self.max_chars).collect();
            if self.strip_trailing_whitespace {
                t = strip_line_ends(&t);
            }
        }
        (t.chars().count() >= self.min_chars).then_some(t)
    }
}

fn strip_line_ends(text: &str) -> String {
    text.split('\n')
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Drops excluded labels, cleans every text, and rebuilds the label set from
/// the surviving snippets. Idempotent.
pub fn clean_and_filter(corpus: &Corpus, policy: &CleaningPolicy) -> Result<Corpus, CorpusError> {
    policy.validate()?;
    let excluded: BTreeSet<&str> = policy.excluded_labels.iter().map(String::as_str).collect();
    let snippets = corpus
        .snippets()
        .iter()
        .filter(|s| !excluded.contains(s.label.as_str()))
        .filter_map(|s| {
            policy
                .clean_text(&s.text)
                .map(|text| Snippet::new(text, s.label.clone()))
        })
        .collect();
    Ok(Corpus::new(snippets))
}

/// Snippet count per label, in label order.
pub fn class_histogram(corpus: &Corpus) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for s in corpus.snippets() {
        *h.entry(s.label.clone()).or_insert(0) += 1;
    }
    h
}

fn round_half_up(x: f64) -> usize {
    // The small slack absorbs products like 4.4999999999999996 that are 4.5
    // in exact arithmetic.
    (x + 0.5 + 1e-9).floor() as usize
}

/// Per-class test sizes: round-half-up per class, then the total is forced
/// to `round(N·fraction)` by moving single snippets, largest classes first,
/// only where the move keeps that class within one snippet of its exact
/// share.
pub fn stratified_test_sizes(class_sizes: &[usize], test_fraction: f64) -> Result<Vec<usize>, CorpusError> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(CorpusError::InvalidFraction(test_fraction));
    }
    let exact: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * test_fraction).collect();
    let mut sizes: Vec<usize> = exact
        .iter()
        .zip(class_sizes)
        .map(|(&x, &n)| round_half_up(x).min(n))
        .collect();
    let total: usize = class_sizes.iter().sum();
    let target = round_half_up(total as f64 * test_fraction).min(total);

    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| class_sizes[b].cmp(&class_sizes[a]).then(a.cmp(&b)));

    let mut current: usize = sizes.iter().sum();
    while current != target {
        let shrink = current > target;
        let pick = order.iter().copied().find(|&c| {
            if shrink {
                sizes[c] > 0 && (sizes[c] as f64 - 1.0 - exact[c]) >= -1.0 - 1e-9
            } else {
                sizes[c] < class_sizes[c] && (sizes[c] as f64 + 1.0 - exact[c]) <= 1.0 + 1e-9
            }
        });
        let Some(c) = pick else { break };
        if shrink {
            sizes[c] -= 1;
            current -= 1;
        } else {
            sizes[c] += 1;
            current += 1;
        }
    }
    Ok(sizes)
}

/// Seeded stratified split. Each class is shuffled independently (classes
/// in label order, one generator) and its first `size` snippets go to test.
/// Both outputs keep the input order and the input label set.
pub fn stratified_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    let k = corpus.labels().len();
    let ids = corpus.label_ids();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in ids.iter().enumerate() {
        members[c].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let test_sizes = stratified_test_sizes(&sizes, test_fraction)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; corpus.len()];
    for (m, &t) in members.iter_mut().zip(&test_sizes) {
        m.shuffle(&mut rng);
        for &i in &m[..t] {
            in_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, &is_test) in corpus.snippets().iter().zip(&in_test) {
        if is_test {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((
        Corpus::with_labels(train, corpus.labels().clone())?,
        Corpus::with_labels(test, corpus.labels().clone())?,
    ))
}

/// Record of how a split was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub train_counts: BTreeMap<String, usize>,
    pub test_counts: BTreeMap<String, usize>,
}

impl SplitManifest {
    pub fn new(seed: u64, test_fraction: f64, train: &Corpus, test: &Corpus) -> Self {
        Self {
            seed,
            test_fraction,
            train_counts: class_histogram(train),
            test_counts: class_histogram(test),
        }
    }
}
