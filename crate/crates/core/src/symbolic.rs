//! Finite and eventually periodic words over the alphabet `{1, ..., N}`.
//!
//! Letters are stored 1-based in a `u8`, so alphabets of up to 255 symbols
//! are supported. The canonical iteration order everywhere in the crate is
//! lexicographic.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported alphabet.
pub const MAX_ALPHABET: usize = u8::MAX as usize;

/// A finite word; the empty word addresses the whole symbolic space.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(SmallVec<[u8; 32]>);

impl Word {
    pub fn empty() -> Self {
        Word(SmallVec::new())
    }

    /// Builds a word from 1-based letters. Letters are not range-checked
    /// against an alphabet here; see [`Word::validate`].
    pub fn from_letters(letters: &[u8]) -> Self {
        Word(SmallVec::from_slice(letters))
    }

    pub fn repeat(letter: u8, times: usize) -> Self {
        Word(SmallVec::from_elem(letter, times))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    /// `self|_n`, as a borrowed view.
    pub fn prefix(&self, n: usize) -> &[u8] {
        &self.0[..n.min(self.0.len())]
    }

    pub fn prefix_word(&self, n: usize) -> Word {
        Word::from_letters(self.prefix(n))
    }

    /// `σ^n(self)`: drops the first `n` letters.
    pub fn shift(&self, n: usize) -> Word {
        Word::from_letters(&self.0[n.min(self.0.len())..])
    }

    pub fn push(&mut self, letter: u8) {
        self.0.push(letter);
    }

    pub fn pop(&mut self) -> Option<u8> {
        self.0.pop()
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut w = self.clone();
        w.push(letter);
        w
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.clone();
        w.0.extend_from_slice(&other.0);
        w
    }

    pub fn extend_from(&mut self, letters: &[u8]) {
        self.0.extend_from_slice(letters);
    }

    pub fn starts_with(&self, prefix: &[u8]) -> bool {
        self.0.starts_with(prefix)
    }

    /// Checks that every letter lies in `1..=alphabet`.
    pub fn validate(&self, alphabet: usize) -> Result<()> {
        match self.0.iter().find(|&&c| c == 0 || c as usize > alphabet) {
            Some(&c) => Err(Error::Argument(format!(
                "letter {c} outside alphabet 1..={alphabet}"
            ))),
            None => Ok(()),
        }
    }

    /// Serializes the word: bare digits for alphabets of at most nine
    /// letters, comma-separated numbers otherwise.
    pub fn format(&self, alphabet: usize) -> String {
        if alphabet <= 9 {
            self.0.iter().map(|c| char::from(b'0' + c)).collect()
        } else {
            self.0
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// Inverse of [`Word::format`].
    pub fn parse(s: &str, alphabet: usize) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        let letters: Vec<u8> = if alphabet <= 9 {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|v| v as u8)
                        .ok_or_else(|| Error::Argument(format!("bad letter {c:?} in word {s:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::Argument(format!("bad letter {t:?} in word {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        let w = Word::from_letters(&letters);
        w.validate(alphabet)?;
        Ok(w)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        let alphabet = self.0.iter().copied().max().unwrap_or(0) as usize;
        write!(f, "{}", self.format(alphabet))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<&[u8]> for Word {
    fn from(letters: &[u8]) -> Self {
        Word::from_letters(letters)
    }
}

/// An infinite word represented as `head · period · period · ...`.
///
/// Only finite prefixes are ever evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfiniteWord {
    head: Word,
    period: Word,
}

impl InfiniteWord {
    pub fn new(head: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::Argument("infinite word needs a non-empty period".into()));
        }
        Ok(InfiniteWord { head, period })
    }

    /// `letter letter letter ...`
    pub fn constant(letter: u8) -> Self {
        InfiniteWord {
            head: Word::empty(),
            period: Word::repeat(letter, 1),
        }
    }

    pub fn periodic(period: Word) -> Result<Self> {
        Self::new(Word::empty(), period)
    }

    /// 0-based letter access.
    pub fn letter(&self, index: usize) -> u8 {
        if index < self.head.len() {
            self.head.letters()[index]
        } else {
            let p = self.period.letters();
            p[(index - self.head.len()) % p.len()]
        }
    }

    pub fn take(&self, n: usize) -> Word {
        let mut w = Word::empty();
        for i in 0..n {
            w.push(self.letter(i));
        }
        w
    }
}

/// `a ∧ b`: the longest common prefix.
pub fn longest_common_prefix(a: &[u8], b: &[u8]) -> Word {
    Word::from_letters(&a[..common_prefix_len(a, b)])
}

/// `|a ∧ b|`.
pub fn common_prefix_len(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Streams the `N^n` words of length `n` in lexicographic order.
#[derive(Clone, Debug)]
pub struct LevelIter {
    alphabet: u8,
    current: Option<Vec<u8>>,
}

impl Iterator for LevelIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let cur = self.current.as_mut()?;
        let out = Word::from_letters(cur);
        // Odometer increment from the right.
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.alphabet {
                cur[i] += 1;
                break;
            }
            cur[i] = 1;
        }
        Some(out)
    }
}

/// Streaming enumeration of `Σ_n`.
pub fn level_iter(alphabet: usize, n: usize) -> LevelIter {
    LevelIter {
        alphabet: alphabet.min(MAX_ALPHABET) as u8,
        current: Some(vec![1; n]),
    }
}

/// Number of words of length `n`, saturating at `u128::MAX`.
pub fn level_size(alphabet: usize, n: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(alphabet as u128);
    }
    total
}

/// Collects `Σ_n` in lexicographic order, refusing when `N^n` exceeds `cap`.
pub fn enumerate_level(alphabet: usize, n: usize, cap: u128) -> Result<Vec<Word>> {
    let size = level_size(alphabet, n);
    if size > cap {
        return Err(Error::Budget {
            what: "level enumeration",
            requested: size,
            cap,
        });
    }
    Ok(level_iter(alphabet, n).collect())
}

/// A repeated-letter block `letter^len` attached to one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub letter: u8,
    pub len: usize,
}

impl Block {
    pub fn word(&self) -> Word {
        Word::repeat(self.letter, self.len)
    }
}

/// Shape of the subsystem `𝒥_n`: free words of length `n` followed by the
/// fixed suffix `𝚕_1 𝚔_1 ⋯ 𝚕_d 𝚔_d`, where `𝚕_k` are the smoothing blocks and
/// `𝚔_k` the escape blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub alphabet: usize,
    pub n: usize,
    pub smoothing: Vec<Block>,
    pub escape: Vec<Block>,
}

impl SubsystemSpec {
    pub fn new(alphabet: usize, n: usize, smoothing: Vec<Block>, escape: Vec<Block>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("subsystem block length n must be positive".into()));
        }
        if smoothing.len() != escape.len() {
            return Err(Error::Argument(
                "smoothing and escape blocks must have one entry per axis".into(),
            ));
        }
        let spec = SubsystemSpec {
            alphabet,
            n,
            smoothing,
            escape,
        };
        spec.suffix().validate(alphabet)?;
        Ok(spec)
    }

    /// `p = p_1 + ... + p_d`.
    pub fn p(&self) -> usize {
        self.smoothing.iter().map(|b| b.len).sum()
    }

    /// `p' = p'_1 + ... + p'_d`.
    pub fn p_prime(&self) -> usize {
        self.escape.iter().map(|b| b.len).sum()
    }

    /// Block period `q_n = n + p + p'`.
    pub fn q(&self) -> usize {
        self.n + self.p() + self.p_prime()
    }

    /// `𝚕_1 𝚔_1 ⋯ 𝚕_d 𝚔_d`.
    pub fn suffix(&self) -> Word {
        let mut w = Word::empty();
        for (l, k) in self.smoothing.iter().zip(&self.escape) {
            w.extend_from(l.word().letters());
            w.extend_from(k.word().letters());
        }
        w
    }

    /// Number of words in `𝒥_n`.
    pub fn size(&self) -> u128 {
        level_size(self.alphabet, self.n)
    }
}

/// `𝒥_n` in lexicographic order of the free part.
pub fn build_subsystem_words(spec: &SubsystemSpec) -> Vec<Word> {
    let suffix = spec.suffix();
    level_iter(spec.alphabet, spec.n)
        .map(|w| w.concat(&suffix))
        .collect()
}

/// For distinct words `a`, `b` built from whole `𝒥_n` blocks, returns the
/// offset `u ∈ {1..n}` with `σ^{|a∧b|+u}(a)|_{p+p'}` equal to the suffix,
/// i.e. the start of the first designated block after the split point.
///
/// Returns `None` when the words agree, or when the split point falls
/// inside a suffix (which cannot happen for genuine `Γ_n` words).
pub fn locate_block_offset(spec: &SubsystemSpec, a: &[u8], b: &[u8]) -> Option<usize> {
    let h = common_prefix_len(a, b);
    if h == a.len().min(b.len()) {
        return None;
    }
    let q = spec.q();
    let within = h % q;
    if within >= spec.n {
        return None;
    }
    let u = spec.n - within;
    let start = h + u;
    let suffix = spec.suffix();
    if a.len() >= start + suffix.len() && a[start..start + suffix.len()] != *suffix.letters() {
        return None;
    }
    Some(u)
}
