//! Symbolic scl-positivity classification of commuting products of pure
//! components (pseudo-Anosov pieces and Dehn-twist powers).
//!
//! A component `gᵢ` with `gᵢ^m ~ γ^r` contributes `r/m` to its class
//! representative `γ`. A chiral class is essential when these contributions
//! do not cancel; scl is positive exactly when some chiral class is
//! essential. All arithmetic is exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{int, lcm, parse_ratio, ratio, ratio_string};
use crate::words::{expand_commutators, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifierError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: {message}")]
    Inconsistent { line: usize, message: String },
    #[error("verdict is Positive; no commutator witness exists")]
    NotZero,
    #[error("decomposition {0} does not have a Positive verdict")]
    NotPositive(usize),
    #[error("level-subgroup mode is off; use scl_verdict")]
    ModeOff,
    #[error("multicurve is empty")]
    EmptyMulticurve,
    #[error("class {rep} has {size} members; witnesses support at most 25")]
    ClassTooLarge { rep: String, size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ComponentKind {
    PseudoAnosov,
    Twist(i64),
}

impl ComponentKind {
    fn family(&self) -> &'static str {
        match self {
            ComponentKind::PseudoAnosov => "pa",
            ComponentKind::Twist(_) => "twist",
        }
    }
}

/// `component^m` is conjugate to `rep^r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassRep {
    pub rep_id: String,
    pub m: i64,
    pub r: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PureComponent {
    pub id: String,
    pub kind: ComponentKind,
    pub complexity: i64,
    pub chiral: bool,
    pub rep: Option<ClassRep>,
    /// Power in the achirality relation `h gᵏ h⁻¹ = g⁻ᵏ`.
    pub achiral_k: i64,
    /// Declared root translation length, used to break ties.
    #[serde(serialize_with = "crate::exact::serialize_opt_ratio")]
    pub tau: Option<BigRational>,
    #[serde(skip)]
    pub line: usize,
}

impl PureComponent {
    pub fn pa(id: &str, complexity: i64) -> PureComponent {
        PureComponent {
            id: id.to_string(),
            kind: ComponentKind::PseudoAnosov,
            complexity,
            chiral: true,
            rep: None,
            achiral_k: 1,
            tau: None,
            line: 0,
        }
    }

    pub fn with_rep(mut self, rep_id: &str, m: i64, r: i64) -> PureComponent {
        self.rep = Some(ClassRep { rep_id: rep_id.to_string(), m, r });
        self
    }

    pub fn achiral(mut self, k: i64) -> PureComponent {
        self.chiral = false;
        self.achiral_k = k;
        self
    }

    /// `(rep_id, m, r)`, defaulting to the component itself with `(1, 1)`.
    pub fn relation(&self) -> (String, i64, i64) {
        match &self.rep {
            Some(c) => (c.rep_id.clone(), c.m, c.r),
            None => (self.id.clone(), 1, 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Curve {
    pub separating: bool,
    pub class: String,
    pub power: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NtDecomposition {
    pub n: i64,
    pub components: Vec<PureComponent>,
    pub curves: Vec<Curve>,
}

impl NtDecomposition {
    /// Validate and build.
    pub fn new(n: i64, components: Vec<PureComponent>, curves: Vec<Curve>) -> Result<NtDecomposition, ClassifierError> {
        let d = NtDecomposition { n, components, curves };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |line: usize, message: String| Err(ClassifierError::Inconsistent { line, message });
        if self.n < 1 {
            return bad(0, format!("power N must be positive, got {}", self.n));
        }
        let mut by_id: HashMap<&str, &PureComponent> = HashMap::new();
        for c in &self.components {
            if by_id.insert(c.id.as_str(), c).is_some() {
                return bad(c.line, format!("duplicate component id {:?}", c.id));
            }
            if let ComponentKind::Twist(0) = c.kind {
                return bad(c.line, "twist power must be nonzero".into());
            }
            if matches!(c.kind, ComponentKind::Twist(_)) && !c.chiral {
                return bad(c.line, format!("twist {:?} declared achiral; twist powers are chiral", c.id));
            }
            if c.complexity < 0 {
                return bad(c.line, "complexity must be nonnegative".into());
            }
            if !c.chiral && c.rep.is_some() {
                return bad(c.line, format!("achiral component {:?} cannot belong to a chiral class", c.id));
            }
            if !c.chiral && c.achiral_k == 0 {
                return bad(c.line, "achirality power k must be nonzero".into());
            }
            if let Some(rep) = &c.rep {
                if rep.m == 0 || rep.r == 0 {
                    return bad(c.line, "class exponents m and r must be nonzero".into());
                }
                if rep.rep_id == c.id && rep.m != rep.r {
                    // g^m ~ g^r with m ≠ r is impossible for chiral infinite-order g
                    return bad(c.line, format!("{:?} is its own representative but m = {} ≠ r = {}", c.id, rep.m, rep.r));
                }
            }
        }
        // class-level checks
        let mut family: HashMap<String, (&'static str, i64, usize)> = HashMap::new();
        for c in self.components.iter().filter(|c| c.chiral) {
            let (rep_id, _, _) = c.relation();
            if rep_id != c.id {
                if let Some(rc) = by_id.get(rep_id.as_str()) {
                    if !rc.chiral {
                        return bad(c.line, format!("representative {rep_id:?} is achiral"));
                    }
                    if rc.relation().0 != rc.id {
                        return bad(c.line, format!("representative {rep_id:?} is not its own class representative"));
                    }
                }
            }
            let key = (c.kind.family(), c.complexity, c.line);
            match family.get(&rep_id) {
                None => {
                    family.insert(rep_id, key);
                }
                Some(&(fam, cx, line)) => {
                    if fam != key.0 {
                        return bad(c.line, format!("class {rep_id:?} mixes {fam} and {} components (first at line {line})", key.0));
                    }
                    if cx != key.1 {
                        return bad(c.line, format!("class {rep_id:?} mixes complexities {cx} and {}", key.1));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<NtDecomposition, ClassifierError> {
        parse_decomposition(text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("N {}\n", self.n);
        for c in &self.components {
            let kind = match c.kind {
                ComponentKind::PseudoAnosov => "pa".to_string(),
                ComponentKind::Twist(n) => format!("twist:{n}"),
            };
            s.push_str(&format!("comp {} {} complexity {} {}", c.id, kind, c.complexity, if c.chiral { "chiral" } else { "achiral" }));
            if !c.chiral && c.achiral_k != 1 {
                s.push_str(&format!(" k {}", c.achiral_k));
            }
            if let Some(r) = &c.rep {
                s.push_str(&format!(" rep {} m {} r {}", r.rep_id, r.m, r.r));
            }
            if let Some(t) = &c.tau {
                s.push_str(&format!(" tau {}", ratio_string(t)));
            }
            s.push('\n');
        }
        for c in &self.curves {
            s.push_str(&format!("curve {} class {} power {}\n", if c.separating { "sep" } else { "nonsep" }, c.class, c.power));
        }
        s
    }
}

struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, content: &'a str) -> Tokens<'a> {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s + 1, &content[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s + 1, &content[s..]));
        }
        Tokens { line, items, pos: 0 }
    }

    fn err(&self, column: usize, message: impl Into<String>) -> ClassifierError {
        ClassifierError::Parse { line: self.line, column, message: message.into() }
    }

    fn end_column(&self) -> usize {
        self.items.last().map_or(1, |(c, t)| c + t.len())
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ClassifierError> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| self.err(self.end_column(), format!("expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ClassifierError> {
        let (c, t) = self.next(&format!("`{kw}`"))?;
        if t != kw {
            return Err(self.err(c, format!("expected `{kw}`, found {t:?}")));
        }
        Ok(())
    }

    fn int(&mut self, what: &str) -> Result<i64, ClassifierError> {
        let (c, t) = self.next(what)?;
        t.parse().map_err(|_| self.err(c, format!("expected integer {what}, found {t:?}")))
    }

    fn finish(&self) -> Result<(), ClassifierError> {
        match self.peek() {
            Some((c, t)) => Err(self.err(c, format!("unexpected token {t:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_component(t: &mut Tokens<'_>) -> Result<PureComponent, ClassifierError> {
    let (_, id) = t.next("component id")?;
    let (kc, kind) = t.next("component kind")?;
    let kind = if kind == "pa" {
        ComponentKind::PseudoAnosov
    } else if let Some(n) = kind.strip_prefix("twist:") {
        ComponentKind::Twist(n.parse().map_err(|_| t.err(kc + 6, format!("bad twist power {n:?}")))?)
    } else {
        return Err(t.err(kc, format!("expected `pa` or `twist:<n>`, found {kind:?}")));
    };
    t.keyword("complexity")?;
    let complexity = t.int("complexity")?;
    let (cc, ch) = t.next("`chiral` or `achiral`")?;
    let chiral = match ch {
        "chiral" => true,
        "achiral" => false,
        other => return Err(t.err(cc, format!("expected `chiral` or `achiral`, found {other:?}"))),
    };
    let mut comp = PureComponent {
        id: id.to_string(),
        kind,
        complexity,
        chiral,
        rep: None,
        achiral_k: 1,
        tau: None,
        line: t.line,
    };
    let mut seen = BTreeSet::new();
    while let Some((c, kw)) = t.peek() {
        t.pos += 1;
        if !seen.insert(kw) {
            return Err(t.err(c, format!("duplicate clause `{kw}`")));
        }
        match kw {
            "rep" => {
                let (_, rep_id) = t.next("representative id")?;
                t.keyword("m")?;
                let m = t.int("m")?;
                t.keyword("r")?;
                let r = t.int("r")?;
                comp.rep = Some(ClassRep { rep_id: rep_id.to_string(), m, r });
            }
            "k" => comp.achiral_k = t.int("k")?,
            "tau" => {
                let (vc, v) = t.next("translation length")?;
                let q = parse_ratio(v).filter(|q| q.is_positive()).ok_or_else(|| t.err(vc, format!("expected positive rational, found {v:?}")))?;
                comp.tau = Some(q);
            }
            other => return Err(t.err(c, format!("unknown clause {other:?}"))),
        }
    }
    Ok(comp)
}

/// Parse the decomposition format.
///
/// ```text
/// N <int>
/// comp <id> pa|twist:<n> complexity <c> chiral|achiral [k <int>] [rep <rep_id> m <int> r <int>] [tau <p/q>]
/// curve sep|nonsep class <label> power <int>
/// ```
///
/// `N` defaults to 1. `#` starts a comment.
pub fn parse_decomposition(text: &str) -> Result<NtDecomposition, ClassifierError> {
    let mut n: Option<i64> = None;
    let mut components = Vec::new();
    let mut curves = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut t = Tokens::new(li + 1, content);
        let Some((c, kw)) = t.peek() else { continue };
        t.pos += 1;
        match kw {
            "N" => {
                if n.is_some() {
                    return Err(t.err(c, "duplicate `N` line"));
                }
                n = Some(t.int("power N")?);
            }
            "comp" => components.push(parse_component(&mut t)?),
            "curve" => {
                let (sc, s) = t.next("`sep` or `nonsep`")?;
                let separating = match s {
                    "sep" => true,
                    "nonsep" => false,
                    other => return Err(t.err(sc, format!("expected `sep` or `nonsep`, found {other:?}"))),
                };
                t.keyword("class")?;
                let (_, class) = t.next("homology class label")?;
                t.keyword("power")?;
                let power = t.int("power")?;
                curves.push(Curve { separating, class: class.to_string(), power });
            }
            other => return Err(t.err(c, format!("unknown keyword {other:?}"))),
        }
        t.finish()?;
    }
    NtDecomposition::new(n.unwrap_or(1), components, curves)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassMember {
    pub component: String,
    pub m: i64,
    pub r: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChiralClass {
    pub rep_id: String,
    pub members: Vec<ClassMember>,
    pub complexity: i64,
    #[serde(serialize_with = "crate::exact::serialize_opt_ratio")]
    pub tau: Option<BigRational>,
    /// `Σ r_i/m_i`: the class total measured in powers of the representative.
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub weight: BigRational,
    /// `Σ 1/m_i` after rescaling every relation to the common power
    /// `R = lcm |r_i|` of the representative; equals `weight / R`.
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub inverse_power_sum: BigRational,
    pub essential: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub classes: Vec<ChiralClass>,
    pub achiral: Vec<String>,
}

/// Group chiral components by representative; achiral components are
/// set aside. Classes come out sorted by representative id.
pub fn partition_classes(d: &NtDecomposition) -> Partition {
    let mut groups: BTreeMap<String, Vec<&PureComponent>> = BTreeMap::new();
    let mut achiral = Vec::new();
    for c in &d.components {
        if c.chiral {
            groups.entry(c.relation().0).or_default().push(c);
        } else {
            achiral.push(c.id.clone());
        }
    }
    let classes = groups
        .into_iter()
        .map(|(rep_id, comps)| {
            let members: Vec<ClassMember> = comps
                .iter()
                .map(|c| {
                    let (_, m, r) = c.relation();
                    ClassMember { component: c.id.clone(), m, r }
                })
                .collect();
            let weight = members.iter().fold(BigRational::zero(), |acc, mb| acc + ratio(mb.r, mb.m));
            let big_r = members.iter().fold(BigInt::one(), |acc, mb| lcm(&acc, &BigInt::from(mb.r.abs())));
            let inverse_power_sum = members.iter().fold(BigRational::zero(), |acc, mb| {
                // m · R/r is an integer exponent of the common power R
                let scaled = BigRational::new(BigInt::from(mb.m) * &big_r, BigInt::from(mb.r));
                acc + scaled.recip()
            });
            let tau = comps
                .iter()
                .find(|c| c.id == rep_id)
                .and_then(|c| c.tau.clone())
                .or_else(|| comps.iter().filter_map(|c| c.tau.clone()).max());
            ChiralClass {
                essential: !weight.is_zero(),
                rep_id,
                members,
                complexity: comps[0].complexity,
                tau,
                weight,
                inverse_power_sum,
            }
        })
        .collect();
    Partition { classes, achiral }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ZeroReason {
    Achiral { component: String, k: i64 },
    Inessential { rep_id: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Positive { class: ChiralClass },
    Zero { certificates: Vec<ZeroReason> },
}

impl Verdict {
    pub fn is_positive(&self) -> bool {
        matches!(self, Verdict::Positive { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Positive { class } => write!(f, "Positive (class {})", class.rep_id),
            Verdict::Zero { .. } => write!(f, "Zero"),
        }
    }
}

/// Positive iff some chiral class is essential. The witness class has the
/// largest support complexity, then the largest declared translation
/// length, then the least representative id.
pub fn scl_verdict(d: &NtDecomposition) -> Verdict {
    let p = partition_classes(d);
    let best = p
        .classes
        .iter()
        .filter(|c| c.essential)
        .min_by(|a, b| b.complexity.cmp(&a.complexity).then_with(|| b.tau.cmp(&a.tau)).then_with(|| a.rep_id.cmp(&b.rep_id)));
    if let Some(class) = best {
        return Verdict::Positive { class: class.clone() };
    }
    let mut certificates: Vec<ZeroReason> = d
        .components
        .iter()
        .filter(|c| !c.chiral)
        .map(|c| ZeroReason::Achiral { component: c.id.clone(), k: c.achiral_k })
        .collect();
    certificates.extend(p.classes.iter().map(|c| ZeroReason::Inessential { rep_id: c.rep_id.clone() }));
    Verdict::Zero { certificates }
}

/// Sparse `rep_id → n_γ = (1/N)·Σ r_i/m_i`, zero entries omitted.
pub type ChiVector = BTreeMap<String, BigRational>;

pub fn chi_vector(d: &NtDecomposition) -> ChiVector {
    let mut v: ChiVector = BTreeMap::new();
    for c in d.components.iter().filter(|c| c.chiral) {
        let (rep, m, r) = c.relation();
        *v.entry(rep).or_insert_with(BigRational::zero) += ratio(r, m);
    }
    let n = int(d.n);
    v.into_iter().filter(|(_, x)| !x.is_zero()).map(|(k, x)| (k, x / &n)).collect()
}

/// A formal rational combination of decompositions.
pub type Chain = Vec<(BigRational, NtDecomposition)>;

pub fn chain_chi(chain: &Chain) -> ChiVector {
    let mut v: ChiVector = BTreeMap::new();
    for (q, d) in chain {
        for (k, x) in chi_vector(d) {
            *v.entry(k).or_insert_with(BigRational::zero) += q * x;
        }
    }
    v.retain(|_, x| !x.is_zero());
    v
}

/// Rank of a rational matrix by fraction-free (Bareiss) elimination after
/// clearing row denominators.
pub fn rational_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|row| {
            let den = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.iter().map(|x| (x * BigRational::from_integer(den.clone())).to_integer()).collect()
        })
        .collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..ncols {
        let Some(p) = (rank..nrows).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(rank, p);
        for i in rank + 1..nrows {
            for j in col + 1..ncols {
                let v = (&m[rank][col] * &m[i][j] - &m[i][col] * &m[rank][j]) / &prev;
                m[i][j] = v;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Dimension of the span of the χ-vectors of the given chains.
pub fn qm_dimension(items: &[Chain]) -> usize {
    let vecs: Vec<ChiVector> = items.iter().map(chain_chi).collect();
    let keys: BTreeSet<&String> = vecs.iter().flat_map(|v| v.keys()).collect();
    let rows: Vec<Vec<BigRational>> = vecs
        .iter()
        .map(|v| keys.iter().map(|k| v.get(*k).cloned().unwrap_or_else(BigRational::zero)).collect())
        .collect();
    rational_rank(&rows)
}

pub fn single(d: &NtDecomposition) -> Chain {
    vec![(int(1), d.clone())]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CharacteristicRatio {
    /// Every shared essential class has this ratio: inseparable.
    Ratio(#[serde(serialize_with = "crate::exact::serialize_ratio")] BigRational),
    /// A class occurs in exactly one input: separable.
    Undefined { rep_id: String },
    /// Two classes with different ratios: separable.
    Inconsistent {
        first: String,
        #[serde(serialize_with = "crate::exact::serialize_ratio")]
        first_ratio: BigRational,
        second: String,
        #[serde(serialize_with = "crate::exact::serialize_ratio")]
        second_ratio: BigRational,
    },
}

impl CharacteristicRatio {
    pub fn separable(&self) -> bool {
        !matches!(self, CharacteristicRatio::Ratio(_))
    }
}

pub fn characteristic_ratio(d1: &NtDecomposition, d2: &NtDecomposition) -> Result<CharacteristicRatio, ClassifierError> {
    if !scl_verdict(d1).is_positive() {
        return Err(ClassifierError::NotPositive(1));
    }
    if !scl_verdict(d2).is_positive() {
        return Err(ClassifierError::NotPositive(2));
    }
    let (v1, v2) = (chi_vector(d1), chi_vector(d2));
    if let Some(k) = v1.keys().find(|k| !v2.contains_key(*k)).or_else(|| v2.keys().find(|k| !v1.contains_key(*k))) {
        return Ok(CharacteristicRatio::Undefined { rep_id: k.clone() });
    }
    let mut it = v1.iter().map(|(k, x)| (k, x / &v2[k]));
    let (k0, r0) = it.next().expect("positive verdict has an essential class");
    for (k, r) in it {
        if r != r0 {
            return Ok(CharacteristicRatio::Inconsistent { first: k0.clone(), first_ratio: r0, second: k.clone(), second_ratio: r });
        }
    }
    Ok(CharacteristicRatio::Ratio(r0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessCase {
    Achiral { component: String, k: i64 },
    InessentialClass { rep_id: String, exponents: Vec<i64> },
}

/// A product of commutators in a free group on named abstract letters,
/// together with the word it must equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommutatorWitness {
    pub case: WitnessCase,
    /// Generator names: generator `i` prints as `letters[i-1]`.
    pub letters: Vec<String>,
    pub commutators: Vec<(Word, Word)>,
    pub target: Word,
    /// Derived letters expressed in the generators.
    pub substitution: BTreeMap<String, Word>,
    pub verified: bool,
}

fn named(w: &Word, names: &[String]) -> String {
    if w.is_identity() {
        return "1".into();
    }
    // run-length encode as name^e
    let mut out = Vec::new();
    let ls = w.letters();
    let mut i = 0;
    while i < ls.len() {
        let mut j = i;
        while j < ls.len() && ls[j] == ls[i] {
            j += 1;
        }
        let e = (j - i) as i64 * if ls[i].is_inverse() { -1 } else { 1 };
        let name = &names[ls[i].generator() - 1];
        out.push(if e == 1 { name.clone() } else { format!("{name}^{e}") });
        i = j;
    }
    out.join(" ")
}

impl CommutatorWitness {
    pub fn expression(&self) -> String {
        self.commutators
            .iter()
            .map(|(x, y)| format!("[{}, {}]", named(x, &self.letters), named(y, &self.letters)))
            .collect::<Vec<_>>()
            .join("")
    }

    pub fn target_text(&self) -> String {
        named(&self.target, &self.letters)
    }
}

/// Normal form `gᵃ hᵇ` in `⟨g, h | h g h⁻¹ = g⁻¹⟩` where `hᵇ g = g^{(−1)ᵇ} hᵇ`.
fn semidirect_eval(w: &Word) -> (i64, i64) {
    w.letters().iter().fold((0i64, 0i64), |(a, b), l| {
        let e = if l.is_inverse() { -1 } else { 1 };
        match l.generator() {
            1 => (a + if b.rem_euclid(2) == 0 { e } else { -e }, b),
            _ => (a, b + e),
        }
    })
}

fn achiral_witness(component: &str, k: i64) -> CommutatorWitness {
    let g = Word::generator(2, 1).expect("rank 2");
    let h = Word::generator(2, 2).expect("rank 2");
    let commutators = vec![(g.pow(k), h.inverse())];
    let target = g.pow(2 * k);
    let expanded = expand_commutators(2, &commutators);
    let verified = semidirect_eval(&expanded) == semidirect_eval(&target);
    CommutatorWitness {
        case: WitnessCase::Achiral { component: component.to_string(), k },
        letters: vec![component.to_string(), format!("h_{component}")],
        commutators,
        target,
        substitution: BTreeMap::new(),
        verified,
    }
}

fn letter_word(rank: usize, gen: usize) -> Word {
    Word::reduce(rank, [Letter::new(gen, false)]).expect("rank")
}

/// `h₁^{n₁}⋯h_p^{n_p} = [h₁^{S₁}, γ₂][h₂^{S₂}, γ₃]⋯[h_{p−1}^{S_{p−1}}, γ_p]`
/// with `Sᵢ = n₁+⋯+nᵢ` and `hᵢ = (γᵢ⋯γ₂) h₁ (γᵢ⋯γ₂)⁻¹`.
pub fn telescoping_witness(rep_id: &str, exponents: &[i64]) -> CommutatorWitness {
    let p = exponents.len();
    assert!((2..=25).contains(&p));
    let rank = p;
    let mut letters = vec!["h1".to_string()];
    letters.extend((2..=p).map(|i| format!("g{i}")));
    let mut hs = vec![letter_word(rank, 1)];
    let mut substitution = BTreeMap::new();
    for i in 2..=p {
        let gamma = letter_word(rank, i);
        let h = hs[i - 2].conjugate_by(&gamma);
        substitution.insert(format!("h{i}"), h.clone());
        hs.push(h);
    }
    let target = hs.iter().zip(exponents).fold(Word::identity(rank), |acc, (h, &e)| &acc * &h.pow(e));
    let mut s = 0;
    let commutators: Vec<(Word, Word)> = (0..p - 1)
        .map(|i| {
            s += exponents[i];
            (hs[i].pow(s), letter_word(rank, i + 2))
        })
        .collect();
    let verified = expand_commutators(rank, &commutators) == target;
    CommutatorWitness {
        case: WitnessCase::InessentialClass { rep_id: rep_id.to_string(), exponents: exponents.to_vec() },
        letters,
        commutators,
        target,
        substitution,
        verified,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessBundle {
    pub witnesses: Vec<CommutatorWitness>,
    /// The power of the element the witnesses express.
    pub power: i64,
    /// Number of commutators.
    pub count: usize,
}

/// Commutator witnesses for a Zero verdict.
///
/// An inessential class with `gᵢ^{mᵢ} ~ γ^{rᵢ}` gives `gᵢ^L ~ γ^{nᵢ}` with
/// `L = lcm |mᵢ|` and integer `nᵢ = rᵢL/mᵢ` summing to zero. An achiral
/// component contributes `g^{2k}`. The bundle's power is the lcm of these;
/// raising a witness to a multiple keeps its commutator count.
pub fn commutator_witness(d: &NtDecomposition) -> Result<WitnessBundle, ClassifierError> {
    if scl_verdict(d).is_positive() {
        return Err(ClassifierError::NotZero);
    }
    let p = partition_classes(d);
    let mut required = BigInt::one();
    let mut plan: Vec<(String, Vec<(i64, i64)>)> = Vec::new();
    for c in &p.classes {
        if c.members.len() > 25 {
            return Err(ClassifierError::ClassTooLarge { rep: c.rep_id.clone(), size: c.members.len() });
        }
        let l = c.members.iter().fold(BigInt::one(), |acc, mb| lcm(&acc, &BigInt::from(mb.m.abs())));
        required = lcm(&required, &l);
        plan.push((c.rep_id.clone(), c.members.iter().map(|mb| (mb.m, mb.r)).collect()));
    }
    for comp in d.components.iter().filter(|c| !c.chiral) {
        required = lcm(&required, &BigInt::from(2 * comp.achiral_k.abs()));
    }
    let power: i64 = required.try_into().expect("power fits in i64");
    let mut witnesses = Vec::new();
    for comp in d.components.iter().filter(|c| !c.chiral) {
        // g^{power} = (g^{j})^{2} with j = power/2, one commutator
        witnesses.push(achiral_witness(&comp.id, power / 2));
    }
    for (rep, members) in plan {
        if members.len() == 1 {
            // a single member is essential, so this cannot occur for Zero
            continue;
        }
        let exps: Vec<i64> = members.iter().map(|&(m, r)| r * power / m).collect();
        debug_assert_eq!(exps.iter().sum::<i64>(), 0);
        witnesses.push(telescoping_witness(&rep, &exps));
    }
    let count = witnesses.iter().map(|w| w.commutators.len()).sum();
    Ok(WitnessBundle { witnesses, power, count })
}

/// Bound on the commutator count: achiral components plus `Σ (pᵢ − 1)`.
pub fn witness_bound(d: &NtDecomposition) -> usize {
    let p = partition_classes(d);
    p.achiral.len() + p.classes.iter().map(|c| c.members.len() - 1).sum::<usize>()
}

pub fn multitwist_verdict(curves: &[Curve]) -> Result<bool, ClassifierError> {
    if curves.is_empty() {
        return Err(ClassifierError::EmptyMulticurve);
    }
    if curves.iter().any(|c| c.separating) {
        return Ok(true);
    }
    let mut sums: BTreeMap<&str, i64> = BTreeMap::new();
    for c in curves {
        *sums.entry(&c.class).or_default() += c.power;
    }
    Ok(sums.values().any(|&s| s != 0))
}

/// In level-subgroup mode every pseudo-Anosov component is chiral and its
/// own class, so any such component makes scl positive; otherwise the
/// element is a multitwist.
pub fn exponential_growth_verdict(d: &NtDecomposition, level_subgroup_mode: bool) -> Result<bool, ClassifierError> {
    if !level_subgroup_mode {
        return Err(ClassifierError::ModeOff);
    }
    if d.components.is_empty() && d.curves.is_empty() {
        return Ok(false);
    }
    let forced: Vec<PureComponent> = d
        .components
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if c.kind == ComponentKind::PseudoAnosov {
                c.chiral = true;
                c.rep = None;
            }
            c
        })
        .collect();
    if forced.iter().any(|c| c.kind == ComponentKind::PseudoAnosov) {
        let nd = NtDecomposition { n: d.n, components: forced, curves: Vec::new() };
        return Ok(scl_verdict(&nd).is_positive());
    }
    if !d.curves.is_empty() {
        return multitwist_verdict(&d.curves);
    }
    Ok(scl_verdict(d).is_positive())
}

/// Value on the element of the homogeneous function with `H(γ) = a` on
/// every representative: `Σ_γ a·Σ rᵢ/mᵢ`.
pub fn homogeneous_value(class: &ChiralClass, a: &BigRational) -> BigRational {
    class.members.iter().fold(BigRational::zero(), |acc, mb| acc + a * ratio(mb.r, mb.m))
}

/// What a Positive verdict feeds into the counting pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LowerBoundRecipe {
    pub rep_id: String,
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub n_gamma: BigRational,
    /// Per-power scl lower bound the tree pipeline certifies for a
    /// representative with exact `Ĥ = 1`.
    #[serde(serialize_with = "crate::exact::serialize_ratio")]
    pub per_power_constant: BigRational,
}

pub fn lower_bound_recipe(d: &NtDecomposition) -> Option<LowerBoundRecipe> {
    match scl_verdict(d) {
        Verdict::Positive { class } => {
            let n_gamma = chi_vector(d).get(&class.rep_id).cloned().unwrap_or_else(BigRational::zero);
            Some(LowerBoundRecipe { rep_id: class.rep_id, n_gamma, per_power_constant: ratio(1, 48) })
        }
        Verdict::Zero { .. } => None,
    }
}

/// Parameters for random symbolic decompositions.
#[derive(Clone, Copy, Debug)]
pub struct RandomParams {
    pub max_classes: usize,
    pub max_members: usize,
    pub max_achiral: usize,
    pub max_exponent: i64,
    /// Probability that a class is made inessential on purpose.
    pub balance_probability: f64,
    pub reps: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { max_classes: 3, max_members: 4, max_achiral: 2, max_exponent: 4, balance_probability: 0.5, reps: 6 }
    }
}

fn nonzero<R: Rng>(rng: &mut R, max: i64) -> i64 {
    let v = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

pub fn random_decomposition<R: Rng>(rng: &mut R, p: RandomParams) -> NtDecomposition {
    let mut comps = Vec::new();
    let mut next = 0;
    let mut reps: Vec<usize> = (0..p.reps).collect();
    use rand::seq::SliceRandom;
    reps.shuffle(rng);
    let nclasses = rng.gen_range(0..=p.max_classes.min(p.reps));
    for &rep in reps.iter().take(nclasses) {
        // a rep's kind and complexity are fixed by its label
        let twist = rep % 2 == 1;
        let complexity = if twist { 0 } else { 1 + (rep as i64 % 3) };
        let size = rng.gen_range(1..=p.max_members);
        let mut rel: Vec<(i64, i64)> = (0..size).map(|_| (nonzero(rng, p.max_exponent), nonzero(rng, p.max_exponent))).collect();
        if size >= 1 && rng.gen_bool(p.balance_probability) {
            let s = rel.iter().fold(BigRational::zero(), |acc, &(m, r)| acc + ratio(r, m));
            if !s.is_zero() {
                let r: i64 = (-s.numer()).try_into().unwrap();
                let m: i64 = s.denom().try_into().unwrap();
                rel.push((m, r));
            }
        }
        for (m, r) in rel {
            let kind = if twist { ComponentKind::Twist(nonzero(rng, 3)) } else { ComponentKind::PseudoAnosov };
            let mut c = PureComponent::pa(&format!("c{next}"), complexity).with_rep(&format!("h{rep}"), m, r);
            c.kind = kind;
            if rng.gen_bool(0.3) {
                c.tau = Some(ratio(rng.gen_range(1..=9), rng.gen_range(1..=3)));
            }
            comps.push(c);
            next += 1;
        }
    }
    for _ in 0..rng.gen_range(0..=p.max_achiral) {
        comps.push(PureComponent::pa(&format!("c{next}"), rng.gen_range(1..=3)).achiral(rng.gen_range(1..=3)));
        next += 1;
    }
    comps.shuffle(rng);
    NtDecomposition::new(rng.gen_range(1..=3), comps, Vec::new()).expect("generated decompositions are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_of(ms: &[(i64, i64)]) -> NtDecomposition {
        let comps = ms.iter().enumerate().map(|(i, &(m, r))| PureComponent::pa(&format!("c{i}"), 2).with_rep("h", m, r)).collect();
        NtDecomposition::new(1, comps, vec![]).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = partition_classes(&class_of(&[(2, 1), (3, 1)]));
        assert_eq!(p.classes.len(), 1);
        assert_eq!(p.classes[0].members.len(), 2);
        let d = NtDecomposition::new(1, vec![PureComponent::pa("x", 1).achiral(1)], vec![]).unwrap();
        let p = partition_classes(&d);
        assert!(p.classes.is_empty());
        assert_eq!(p.achiral, vec!["x".to_string()]);
        let enko = class_of(&[(1, 1), (-1, 1)]);
        assert!(!partition_classes(&enko).classes[0].essential);
    }

    #[test]
    fn verdict_examples() {
        assert!(scl_verdict(&NtDecomposition::new(1, vec![PureComponent::pa("x", 1)], vec![]).unwrap()).is_positive());
        assert!(!scl_verdict(&class_of(&[(1, 1), (-1, 1)])).is_positive());
        let d = class_of(&[(2, 1), (3, 1), (-6, 1)]);
        assert_eq!(partition_classes(&d).classes[0].inverse_power_sum, ratio(2, 3));
        assert!(scl_verdict(&d).is_positive());
    }

    #[test]
    fn inverse_power_sum_rescales_to_common_power() {
        // c0^2 ~ h^3, c1^1 ~ h^-2: common power h^6 gives c0^4, c1^-3
        let d = class_of(&[(2, 3), (1, -2)]);
        let c = &partition_classes(&d).classes[0];
        assert_eq!(c.inverse_power_sum, ratio(1, 4) - ratio(1, 3));
        assert_eq!(c.weight, ratio(3, 2) - ratio(2, 1));
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_vector(&class_of(&[(1, 1), (1, 1)]))["h"], ratio(2, 1));
        assert!(chi_vector(&class_of(&[(2, 1), (-2, 1)])).is_empty());
        let mut d = class_of(&[(2, 3)]);
        d.n = 2;
        assert_eq!(chi_vector(&d)["h"], ratio(3, 4));
    }

    #[test]
    fn dimension_examples() {
        let mut t1 = PureComponent::pa("t1", 0).with_rep("orbitA", 1, 1);
        t1.kind = ComponentKind::Twist(1);
        let mut t2 = PureComponent::pa("t2", 0).with_rep("orbitB", 1, 1);
        t2.kind = ComponentKind::Twist(1);
        let d1 = NtDecomposition::new(1, vec![t1], vec![]).unwrap();
        let d2 = NtDecomposition::new(1, vec![t2], vec![]).unwrap();
        assert_eq!(qm_dimension(&[single(&d1), single(&d2)]), 2);
        let g = class_of(&[(1, 1)]);
        let g3 = class_of(&[(1, 3)]);
        assert_eq!(qm_dimension(&[single(&g), single(&g3)]), 1);
    }

    #[test]
    fn bareiss_small() {
        let r = |v: &[i64]| v.iter().map(|&x| int(x)).collect::<Vec<_>>();
        assert_eq!(rational_rank(&[r(&[1, 2, 3]), r(&[2, 4, 6]), r(&[1, 0, 1])]), 2);
        assert_eq!(rational_rank(&[r(&[0, 0]), r(&[0, 0])]), 0);
        assert_eq!(rational_rank(&[vec![ratio(1, 2), ratio(1, 3)], vec![ratio(3, 1), ratio(2, 1)]]), 1);
    }

    #[test]
    fn ratio_examples() {
        let d1 = class_of(&[(1, 1), (2, 1)]);
        let d2 = class_of(&[(1, 2), (2, 2)]);
        assert_eq!(characteristic_ratio(&d1, &d2).unwrap(), CharacteristicRatio::Ratio(ratio(1, 2)));
        let other = NtDecomposition::new(1, vec![PureComponent::pa("y", 1)], vec![]).unwrap();
        assert!(matches!(characteristic_ratio(&d1, &other).unwrap(), CharacteristicRatio::Undefined { .. }));
        let two = NtDecomposition::new(1, vec![PureComponent::pa("a", 1), PureComponent::pa("b", 1)], vec![]).unwrap();
        let two2 = NtDecomposition::new(1, vec![PureComponent::pa("a", 1).with_rep("a", 2, 2), PureComponent::pa("b", 1).with_rep("b", 3, 3), PureComponent::pa("a2", 1).with_rep("a", 1, 1), PureComponent::pa("b2", 1).with_rep("b", 1, 1), PureComponent::pa("b3", 1).with_rep("b", 1, 1)], vec![]).unwrap();
        assert!(matches!(characteristic_ratio(&two, &two2).unwrap(), CharacteristicRatio::Inconsistent { .. }));
        assert_eq!(characteristic_ratio(&class_of(&[(1, 1), (-1, 1)]), &d1), Err(ClassifierError::NotPositive(1)));
    }

    #[test]
    fn witness_examples() {
        let d = NtDecomposition::new(1, vec![PureComponent::pa("x", 1).achiral(1)], vec![]).unwrap();
        let b = commutator_witness(&d).unwrap();
        assert_eq!((b.count, b.power), (1, 2));
        assert!(b.witnesses[0].verified);

        let b = commutator_witness(&class_of(&[(1, 1), (-1, 1)])).unwrap();
        assert_eq!(b.count, 1);
        let w = &b.witnesses[0];
        assert!(w.verified);
        // h1 · (g2 h1⁻¹ g2⁻¹) · [h1, g2]⁻¹ = 1
        assert_eq!(w.expression(), "[h1, g2]");

        let b = commutator_witness(&class_of(&[(1, 1), (1, 1), (-2, 4)])).unwrap();
        let w = &b.witnesses[0];
        assert_eq!(w.case, WitnessCase::InessentialClass { rep_id: "h".into(), exponents: vec![2, 2, -4] });
        assert_eq!(b.count, 2);
        assert!(w.verified);

        let b = commutator_witness(&class_of(&[(1, 1), (1, 1), (-1, 2)])).unwrap();
        assert_eq!(b.witnesses[0].case, WitnessCase::InessentialClass { rep_id: "h".into(), exponents: vec![1, 1, -2] });
        assert_eq!(b.witnesses[0].commutators[1].0, b.witnesses[0].substitution["h2"].pow(2));
        assert_eq!(commutator_witness(&class_of(&[(1, 1)])), Err(ClassifierError::NotZero));
    }

    #[test]
    fn achiral_identity_is_not_free() {
        let w = achiral_witness("x", 1);
        assert_ne!(expand_commutators(2, &w.commutators), w.target);
        assert!(w.verified);
    }

    #[test]
    fn multitwist_examples() {
        let c = |s: bool, cl: &str, p: i64| Curve { separating: s, class: cl.into(), power: p };
        assert!(multitwist_verdict(&[c(true, "x", 5)]).unwrap());
        assert!(!multitwist_verdict(&[c(false, "x", 3), c(false, "x", -3)]).unwrap());
        assert!(multitwist_verdict(&[c(false, "x", 2), c(false, "y", 1), c(false, "y", -1)]).unwrap());
        assert_eq!(multitwist_verdict(&[]), Err(ClassifierError::EmptyMulticurve));
    }

    #[test]
    fn exponential_examples() {
        let pa = NtDecomposition::new(1, vec![PureComponent::pa("x", 1).achiral(1)], vec![]).unwrap();
        assert!(exponential_growth_verdict(&pa, true).unwrap());
        assert_eq!(exponential_growth_verdict(&pa, false), Err(ClassifierError::ModeOff));
        let mt = NtDecomposition::new(1, vec![], vec![Curve { separating: false, class: "x".into(), power: 2 }]).unwrap();
        assert!(exponential_growth_verdict(&mt, true).unwrap());
        let empty = NtDecomposition::new(1, vec![], vec![]).unwrap();
        assert!(!exponential_growth_verdict(&empty, true).unwrap());
    }

    #[test]
    fn parse_and_errors() {
        let text = "N 2\ncomp g1 pa complexity 3 chiral rep h m 1 r 1\ncomp g2 pa complexity 3 chiral rep h m -1 r 1 tau 7/2\n# done\n";
        let d = parse_decomposition(text).unwrap();
        assert_eq!(d.n, 2);
        assert_eq!(parse_decomposition(&d.to_text()).unwrap(), d);
        let e = parse_decomposition("comp g pa complexity x chiral\n").unwrap_err();
        assert_eq!(e, ClassifierError::Parse { line: 1, column: 22, message: "expected integer complexity, found \"x\"".into() });
        assert!(matches!(parse_decomposition("N 1\ncomp t twist:2 complexity 0 achiral\n"), Err(ClassifierError::Inconsistent { line: 2, .. })));
        assert!(matches!(parse_decomposition("comp a pa complexity 1 chiral rep a m 2 r 1\n"), Err(ClassifierError::Inconsistent { .. })));
        assert!(matches!(
            parse_decomposition("comp a pa complexity 1 chiral\ncomp b twist:1 complexity 1 chiral rep a m 1 r 1\n"),
            Err(ClassifierError::Inconsistent { line: 2, .. })
        ));
        assert!(matches!(parse_decomposition("frob\n"), Err(ClassifierError::Parse { line: 1, column: 1, .. })));
        assert!(matches!(parse_decomposition("comp a pa complexity 1 chiral extra\n"), Err(ClassifierError::Parse { column: 31, .. })));
    }

    #[test]
    fn random_decompositions_validate() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let d = random_decomposition(&mut rng, RandomParams::default());
            assert_eq!(parse_decomposition(&d.to_text()).unwrap().components.len(), d.components.len());
        }
    }
}
