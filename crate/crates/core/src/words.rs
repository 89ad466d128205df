//! Free-group words: reduction, conjugacy normal forms, commutators and the
//! bounded commutator-length search used as ground truth elsewhere.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("generator {generator} out of range for rank {rank}")]
    GeneratorOutOfRange { generator: usize, rank: usize },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("rank must be between 1 and 26, got {0}")]
    BadRank(usize),
    #[error("invalid character {ch:?} at column {column}")]
    BadCharacter { ch: char, column: usize },
    #[error("element {0} is not in the commutator subgroup")]
    NotInCommutatorSubgroup(String),
}

/// A signed generator. Generator ids are 1-based; the sign marks inverses.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter(i16);

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Letter {
        assert!((1..=26).contains(&generator), "generator id {generator}");
        let g = generator as i16;
        Letter(if inverse { -g } else { g })
    }

    pub fn generator(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    /// Position in the order a < A < b < B < ...
    pub fn rank_key(self) -> usize {
        2 * (self.generator() - 1) + usize::from(self.is_inverse())
    }

    pub fn from_rank_key(key: usize) -> Letter {
        Letter::new(key / 2 + 1, key % 2 == 1)
    }

    pub fn to_char(self) -> char {
        let base = if self.is_inverse() { b'A' } else { b'a' };
        (base + (self.generator() - 1) as u8) as char
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_key().cmp(&other.rank_key())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word in the free group of the given rank.
///
/// Words are only ever built through reduction, so every value is reduced.
/// Ordering is shortlex with letters ordered a < A < b < B < ...
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

fn check_rank(rank: usize) -> Result<(), WordError> {
    if (1..=26).contains(&rank) {
        Ok(())
    } else {
        Err(WordError::BadRank(rank))
    }
}

/// One-pass stack reduction.
fn reduce_letters(raw: impl IntoIterator<Item = Letter>) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for l in raw {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

impl Word {
    pub fn identity(rank: usize) -> Word {
        check_rank(rank).expect("rank");
        Word { rank, letters: Vec::new() }
    }

    /// The `i`-th generator (1-based).
    pub fn generator(rank: usize, i: usize) -> Result<Word, WordError> {
        check_rank(rank)?;
        if i == 0 || i > rank {
            return Err(WordError::GeneratorOutOfRange { generator: i, rank });
        }
        Ok(Word { rank, letters: vec![Letter::new(i, false)] })
    }

    /// Freely reduce an arbitrary letter sequence.
    pub fn reduce(rank: usize, raw: impl IntoIterator<Item = Letter>) -> Result<Word, WordError> {
        check_rank(rank)?;
        let raw: Vec<Letter> = raw.into_iter().collect();
        if let Some(bad) = raw.iter().find(|l| l.generator() > rank) {
            return Err(WordError::GeneratorOutOfRange { generator: bad.generator(), rank });
        }
        Ok(Word { rank, letters: reduce_letters(raw) })
    }

    /// Build from signed 1-based generator ids (`-2` is `b⁻¹`).
    pub fn from_signed(rank: usize, raw: &[i32]) -> Result<Word, WordError> {
        check_rank(rank)?;
        let mut letters = Vec::with_capacity(raw.len());
        for &s in raw {
            let g = s.unsigned_abs() as usize;
            if g == 0 || g > rank {
                return Err(WordError::GeneratorOutOfRange { generator: g, rank });
            }
            letters.push(Letter::new(g, s < 0));
        }
        Word::reduce(rank, letters)
    }

    /// Parse `abAB`-style text. `1`, `e` and the empty string denote the identity.
    /// With `rank = None` the rank is the largest generator used (at least 1).
    pub fn parse(text: &str, rank: Option<usize>) -> Result<Word, WordError> {
        let text = text.trim();
        let mut letters = Vec::new();
        if !(text.is_empty() || text == "1" || text == "e" || text == "ε") {
            for (col, ch) in text.chars().enumerate() {
                let l = match ch {
                    'a'..='z' => Letter::new((ch as u8 - b'a') as usize + 1, false),
                    'A'..='Z' => Letter::new((ch as u8 - b'A') as usize + 1, true),
                    _ => return Err(WordError::BadCharacter { ch, column: col + 1 }),
                };
                letters.push(l);
            }
        }
        let used = letters.iter().map(|l| l.generator()).max().unwrap_or(1);
        let rank = rank.unwrap_or(used);
        Word::reduce(rank, letters)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn try_mul(&self, other: &Word) -> Result<Word, WordError> {
        if self.rank != other.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: other.rank });
        }
        Ok(self.mul_same_rank(other))
    }

    fn mul_same_rank(&self, other: &Word) -> Word {
        // Cancel the common boundary, then splice.
        let mut k = 0;
        let (a, b) = (&self.letters, &other.letters);
        while k < a.len() && k < b.len() && a[a.len() - 1 - k] == b[k].inverse() {
            k += 1;
        }
        let mut letters = Vec::with_capacity(a.len() + b.len() - 2 * k);
        letters.extend_from_slice(&a[..a.len() - k]);
        letters.extend_from_slice(&b[k..]);
        Word { rank: self.rank, letters }
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = Word::identity(self.rank);
        let mut sq = base;
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_same_rank(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_same_rank(&sq);
            }
        }
        acc
    }

    /// `self · other · self⁻¹`.
    pub fn conjugate_by(&self, conjugator: &Word) -> Word {
        &(conjugator * self) * &conjugator.inverse()
    }

    /// Signed letter counts per generator: the image in ℤ^rank.
    pub fn abelianization(&self) -> Vec<i64> {
        let mut v = vec![0i64; self.rank];
        for l in &self.letters {
            v[l.generator() - 1] += if l.is_inverse() { -1 } else { 1 };
        }
        v
    }

    pub fn in_commutator_subgroup(&self) -> bool {
        self.abelianization().iter().all(|&c| c == 0)
    }

    /// Split as `conjugator · core · conjugator⁻¹` with `core` cyclically reduced.
    pub fn cyclic_decomposition(&self) -> (Word, Word) {
        let l = &self.letters;
        let mut k = 0;
        while 2 * k + 1 < l.len() && l[k] == l[l.len() - 1 - k].inverse() {
            k += 1;
        }
        let conj = Word { rank: self.rank, letters: l[..k].to_vec() };
        let core = Word { rank: self.rank, letters: l[k..l.len() - k].to_vec() };
        (conj, core)
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(f), Some(l)) => self.letters.len() == 1 || *f != l.inverse(),
            _ => true,
        }
    }

    /// Translation length on the Cayley tree: length of the cyclic reduction.
    pub fn translation_length(&self) -> usize {
        self.cyclic_decomposition().1.len()
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word { rank: self.rank, letters: self.letters[..n.min(self.len())].to_vec() }
    }

    pub(crate) fn from_reduced_unchecked(rank: usize, letters: Vec<Letter>) -> Word {
        debug_assert!(letters.windows(2).all(|w| w[0] != w[1].inverse()));
        Word { rank, letters }
    }

    /// Index of `needle` occurrences, i.e. all `i` with `self[i..i+|needle|] == needle`.
    pub fn occurrences(&self, needle: &Word) -> Vec<usize> {
        let (h, n) = (&self.letters, &needle.letters);
        if n.is_empty() || n.len() > h.len() {
            return Vec::new();
        }
        (0..=h.len() - n.len()).filter(|&i| &h[i..i + n.len()] == n.as_slice()).collect()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mul<&Word> for &Word {
    type Output = Word;

    /// Panics on rank mismatch; use [`Word::try_mul`] for untrusted input.
    fn mul(self, rhs: &Word) -> Word {
        self.try_mul(rhs).expect("rank mismatch in word product")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// A conjugacy class, stored as its canonical representative: the least
/// rotation of the cyclic reduction.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct CyclicWord {
    word: Word,
}

impl CyclicWord {
    pub fn new(w: &Word) -> CyclicWord {
        let core = w.cyclic_decomposition().1;
        let n = core.len();
        if n == 0 {
            return CyclicWord { word: core };
        }
        let best = (0..n)
            .map(|r| {
                let mut v = core.letters[r..].to_vec();
                v.extend_from_slice(&core.letters[..r]);
                v
            })
            .min()
            .expect("nonempty");
        CyclicWord { word: Word::from_reduced_unchecked(w.rank, best) }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.word)
    }
}

/// `x y x⁻¹ y⁻¹`.
pub fn commutator(x: &Word, y: &Word) -> Result<Word, WordError> {
    let xy = x.try_mul(y)?;
    Ok(&(&xy * &x.inverse()) * &y.inverse())
}

/// Every reduced word of length at most `radius`, in shortlex order.
pub fn ball(rank: usize, radius: usize) -> Vec<Word> {
    let mut out = vec![Word::identity(rank)];
    let mut frontier = vec![Word::identity(rank)];
    for _ in 0..radius {
        let mut next = Vec::new();
        for w in &frontier {
            for key in 0..2 * rank {
                let l = Letter::from_rank_key(key);
                if w.letters.last() == Some(&l.inverse()) {
                    continue;
                }
                let mut letters = w.letters.clone();
                letters.push(l);
                next.push(Word { rank, letters });
            }
        }
        // Children of a shortlex-sorted list, extended by sorted letters, stay sorted.
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Uniformly random reduced word of exactly `len` letters.
pub fn random_word<R: Rng + ?Sized>(rank: usize, len: usize, rng: &mut R) -> Word {
    let mut letters: Vec<Letter> = Vec::with_capacity(len);
    while letters.len() < len {
        let l = Letter::from_rank_key(rng.gen_range(0..2 * rank));
        if letters.last() != Some(&l.inverse()) {
            letters.push(l);
        }
    }
    Word { rank, letters }
}

/// Outcome of a bounded commutator-length search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClSearch {
    /// `g = [x₁,y₁]⋯[x_c,y_c]` with the listed pairs.
    Found { count: usize, witness: Vec<(Word, Word)> },
    /// Exhaustive search over `|xᵢ|,|yᵢ| ≤ radius` and `c ≤ max_cl` failed.
    /// This is inconclusive: it does not show `cl(g) > max_cl`.
    NotFoundWithin { radius: usize },
    /// `g` has nonzero abelianization.
    Infinite,
}

/// Expand a list of commutator pairs into a reduced word.
pub fn expand_commutators(rank: usize, pairs: &[(Word, Word)]) -> Word {
    pairs
        .iter()
        .fold(Word::identity(rank), |acc, (x, y)| &acc * &commutator(x, y).expect("rank"))
}

struct CommutatorTable {
    words: Vec<Word>,
    /// value → least (x, y) index pair in lexicographic order
    first: HashMap<Word, (usize, usize)>,
}

impl CommutatorTable {
    fn build(rank: usize, radius: usize) -> CommutatorTable {
        let words = ball(rank, radius);
        let mut first = HashMap::new();
        for (i, x) in words.iter().enumerate() {
            for (j, y) in words.iter().enumerate() {
                let c = commutator(x, y).expect("same rank");
                if c.is_identity() {
                    continue;
                }
                first.entry(c).or_insert((i, j));
            }
        }
        CommutatorTable { words, first }
    }

    fn search(&self, target: &Word, c: usize, radius: usize) -> Option<Vec<(usize, usize)>> {
        if target.len() > 4 * radius * c {
            return None;
        }
        if c == 1 {
            return self.first.get(target).map(|&p| vec![p]);
        }
        for (i, x) in self.words.iter().enumerate() {
            for (j, y) in self.words.iter().enumerate() {
                let head = commutator(x, y).expect("rank");
                if head.is_identity() {
                    continue;
                }
                let rest = &head.inverse() * target;
                if let Some(mut tail) = self.search(&rest, c - 1, radius) {
                    let mut out = vec![(i, j)];
                    out.append(&mut tail);
                    return Some(out);
                }
            }
        }
        None
    }
}

/// Bounded search for an expression of `g` as a product of at most `max_cl`
/// commutators of words of length at most `radius`.
///
/// Witnesses are the lexicographically least tuple `(x₁, y₁, …, x_c, y_c)`
/// in shortlex order, for the least `c` that succeeds.
pub fn cl_search(g: &Word, max_cl: usize, radius: usize) -> ClSearch {
    if !g.in_commutator_subgroup() {
        return ClSearch::Infinite;
    }
    if g.is_identity() {
        return ClSearch::Found { count: 0, witness: Vec::new() };
    }
    let radius = radius.max(1);
    if max_cl == 0 {
        return ClSearch::NotFoundWithin { radius };
    }
    let rank = g.rank();

    // c = 1 is a plain scan so large radii stay memory-light.
    if g.len() <= 4 * radius {
        let words = ball(rank, radius);
        for x in &words {
            for y in &words {
                if 2 * (x.len() + y.len()) < g.len() {
                    continue;
                }
                if commutator(x, y).expect("rank") == *g {
                    return ClSearch::Found { count: 1, witness: vec![(x.clone(), y.clone())] };
                }
            }
        }
    }
    if max_cl == 1 {
        return ClSearch::NotFoundWithin { radius };
    }

    let table = CommutatorTable::build(rank, radius);
    for c in 2..=max_cl {
        if let Some(idx) = table.search(g, c, radius) {
            let witness = idx
                .into_iter()
                .map(|(i, j)| (table.words[i].clone(), table.words[j].clone()))
                .collect();
            return ClSearch::Found { count: c, witness };
        }
    }
    ClSearch::NotFoundWithin { radius }
}

/// Upper bound `min_n cl(gⁿ)/n` over `1 ≤ n ≤ n_max` from bounded searches.
///
/// Returns `Ok(None)` when no power has a witness within the budget.
pub fn scl_upper(
    g: &Word,
    n_max: usize,
    max_cl: usize,
    radius: usize,
) -> Result<Option<BigRational>, WordError> {
    if !g.in_commutator_subgroup() {
        return Err(WordError::NotInCommutatorSubgroup(g.to_string()));
    }
    if g.is_identity() {
        return Ok(Some(BigRational::from_integer(BigInt::from(0))));
    }
    let mut best: Option<BigRational> = None;
    for n in 1..=n_max.max(1) {
        if let ClSearch::Found { count, .. } = cl_search(&g.pow(n as i64), max_cl, radius) {
            let v = BigRational::new(BigInt::from(count), BigInt::from(n));
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
    }
    Ok(best)
}
