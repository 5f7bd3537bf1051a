//! Perfect matchings, binary step sequences and the pairing constant that
//! weights each matching in the trace-moment expansions.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::FieldKind;
use crate::error::{Error, Result};

/// Default cap on the number of jumps a sample may carry before it is
/// discarded.
pub const DEFAULT_N_MAX: usize = 12;

/// A jump of the color walk, from one color to a different one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
}

impl Jump {
    pub fn new(from: usize, to: usize) -> Self {
        debug_assert_ne!(from, to, "a jump must change color");
        Jump { from, to }
    }

    pub fn reversed(self) -> Self {
        Jump {
            from: self.to,
            to: self.from,
        }
    }
}

/// How two jumps relate to each other when they are paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairRelation {
    Same,
    Reversed,
    Unrelated,
}

pub fn relation(a: Jump, b: Jump) -> PairRelation {
    if a == b {
        PairRelation::Same
    } else if a == b.reversed() {
        PairRelation::Reversed
    } else {
        PairRelation::Unrelated
    }
}

/// Whether a pair with the given relation can carry nonzero weight.
fn pair_allowed(kind: FieldKind, rel: PairRelation) -> bool {
    match (kind, rel) {
        (_, PairRelation::Unrelated) => false,
        (FieldKind::Complex, PairRelation::Same) => false,
        _ => true,
    }
}

/// A perfect matching of `{0, .., n-1}`. Pairs are stored with the smaller
/// index first and sorted by it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matching {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn empty() -> Self {
        Matching {
            n: 0,
            pairs: Vec::new(),
        }
    }

    /// Validates and normalizes a list of zero-based pairs.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::OddSize { n });
        }
        let mut seen = vec![false; n];
        let mut norm = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b || seen[a] || seen[b] {
                return Err(Error::InvalidParameter {
                    name: "pairs",
                    reason: format!("({a}, {b}) is not a valid pair of a matching of {n}"),
                });
            }
            seen[a] = true;
            seen[b] = true;
            norm.push((a.min(b), a.max(b)));
        }
        if norm.len() * 2 != n {
            return Err(Error::InvalidParameter {
                name: "pairs",
                reason: format!("{} pairs cannot cover {n} points", norm.len()),
            });
        }
        norm.sort_unstable();
        Ok(Matching { n, pairs: norm })
    }

    /// Same as [`Matching::new`] but with indices counted from one.
    pub fn from_one_based(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let shifted: Vec<_> = pairs
            .iter()
            .map(|&(a, b)| (a.wrapping_sub(1), b.wrapping_sub(1)))
            .collect();
        Matching::new(n, &shifted)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `partner[i]` is the index matched with `i`.
    pub fn partners(&self) -> Vec<usize> {
        let mut p = vec![0; self.n];
        for &(a, b) in &self.pairs {
            p[a] = b;
            p[b] = a;
        }
        p
    }

    /// Relabels every index through `perm` (index `i` becomes `perm[i]`).
    pub fn relabel(&self, perm: &[usize]) -> Matching {
        let mut pairs: Vec<_> = self
            .pairs
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (perm[a], perm[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        pairs.sort_unstable();
        Matching { n: self.n, pairs }
    }

    /// Disjoint union with `other` placed after this matching's indices.
    pub fn concat(&self, other: &Matching) -> Matching {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().map(|&(a, b)| (a + self.n, b + self.n)));
        pairs.sort_unstable();
        Matching {
            n: self.n + other.n,
            pairs,
        }
    }
}

/// `(n-1)!!` for even `n`, i.e. the number of perfect matchings.
pub fn matching_count(n: usize) -> u64 {
    (1..n).step_by(2).map(|k| k as u64).product()
}

/// All perfect matchings of `n` points, in the canonical order obtained by
/// pairing the smallest free index with each remaining index in turn.
pub fn enumerate_matchings(n: usize, n_max: usize) -> Result<Vec<Matching>> {
    if n % 2 == 1 {
        return Err(Error::OddSize { n });
    }
    if n > n_max {
        return Err(Error::SizeLimit { n, max: n_max });
    }
    let mut out = Vec::with_capacity(matching_count(n) as usize);
    let mut stack = Vec::with_capacity(n / 2);
    let free: Vec<usize> = (0..n).collect();
    enumerate_into(&free, &mut stack, &mut |pairs| {
        out.push(Matching {
            n,
            pairs: pairs.to_vec(),
        })
    });
    Ok(out)
}

fn enumerate_into(
    free: &[usize],
    stack: &mut Vec<(usize, usize)>,
    emit: &mut dyn FnMut(&[(usize, usize)]),
) {
    let Some((&first, rest)) = free.split_first() else {
        let mut sorted = stack.clone();
        sorted.sort_unstable();
        emit(&sorted);
        return;
    };
    for (k, &partner) in rest.iter().enumerate() {
        let remaining: Vec<usize> = rest
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != k)
            .map(|(_, &v)| v)
            .collect();
        stack.push((first, partner));
        enumerate_into(&remaining, stack, emit);
        stack.pop();
    }
}

/// A uniformly random perfect matching of `n` points.
pub fn uniform_matching<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matching {
    debug_assert!(n % 2 == 0);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut pairs: Vec<_> = perm
        .chunks_exact(2)
        .map(|c| (c[0].min(c[1]), c[0].max(c[1])))
        .collect();
    pairs.sort_unstable();
    Matching { n, pairs }
}

/// A 0/1 sequence `m_0, .., m_n`; step `k` (zero-based) is `(m_k, m_{k+1})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinarySequence(pub Vec<u8>);

impl BinarySequence {
    pub fn steps(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn step(&self, k: usize) -> (u8, u8) {
        (self.0[k], self.0[k + 1])
    }

    /// Every sequence with `n` steps that starts at `h` and ends at `l`.
    pub fn all_with_ends(n: usize, h: u8, l: u8) -> Vec<BinarySequence> {
        if n == 0 {
            return if h == l {
                vec![BinarySequence(vec![h])]
            } else {
                Vec::new()
            };
        }
        (0..1u32 << (n - 1))
            .map(|bits| {
                let mut m = Vec::with_capacity(n + 1);
                m.push(h);
                m.extend((0..n - 1).map(|k| ((bits >> k) & 1) as u8));
                m.push(l);
                BinarySequence(m)
            })
            .collect()
    }
}

/// The step pairs a matched pair of jumps may take.
fn step_pair_allowed(rel: PairRelation, s1: (u8, u8), s2: (u8, u8)) -> bool {
    match rel {
        PairRelation::Same => {
            matches!(
                (s1, s2),
                ((0, 0), (1, 1)) | ((1, 1), (0, 0)) | ((0, 1), (1, 0)) | ((1, 0), (0, 1))
            )
        }
        PairRelation::Reversed => {
            matches!(
                (s1, s2),
                ((0, 0), (0, 0)) | ((1, 1), (1, 1)) | ((0, 1), (1, 0)) | ((1, 0), (0, 1))
            )
        }
        PairRelation::Unrelated => false,
    }
}

fn is_flip(rel: PairRelation, s1: (u8, u8)) -> bool {
    rel == PairRelation::Same && s1.0 != s1.1
}

/// Whether every matched pair of steps of `m` is admissible for the jump
/// relation of the pair.
pub fn respects(m: &BinarySequence, p: &Matching, jumps: &[Jump]) -> bool {
    if m.steps() != p.n() || jumps.len() != p.n() {
        return false;
    }
    p.pairs().iter().all(|&(a, b)| {
        step_pair_allowed(relation(jumps[a], jumps[b]), m.step(a), m.step(b))
    })
}

/// Number of same-direction pairs whose steps both change value.
pub fn count_flips(m: &BinarySequence, p: &Matching, jumps: &[Jump]) -> usize {
    p.pairs()
        .iter()
        .filter(|&&(a, b)| is_flip(relation(jumps[a], jumps[b]), m.step(a)))
        .count()
}

/// The pairing constant for the given field: 1 or 0 for the commutative
/// fields, and the signed binary-sequence sum for quaternions.
pub fn constant_c(kind: FieldKind, jumps: &[Jump], p: &Matching) -> f64 {
    assert_eq!(jumps.len(), p.n(), "jump count and matching size differ");
    if !p
        .pairs()
        .iter()
        .all(|&(a, b)| pair_allowed(kind, relation(jumps[a], jumps[b])))
    {
        return 0.0;
    }
    match kind {
        FieldKind::Real | FieldKind::Complex => 1.0,
        FieldKind::Quaternion => quaternion_sum(jumps, &p.partners()),
    }
}

/// `2^{-n/2}` times the signed count of admissible sequences in `B_n^{0,0}`.
///
/// Walks the sequence one entry at a time and checks each pair as soon as
/// both of its steps are known, so inadmissible prefixes are cut early.
fn quaternion_sum(jumps: &[Jump], partner: &[usize]) -> f64 {
    let n = jumps.len();
    if n == 0 {
        return 1.0;
    }
    let mut m = vec![0u8; n + 1];
    let total = dfs_sequences(1, &mut m, jumps, partner);
    total as f64 * 0.5f64.powi((n / 2) as i32)
}

fn dfs_sequences(pos: usize, m: &mut [u8], jumps: &[Jump], partner: &[usize]) -> i64 {
    let n = jumps.len();
    let choices: &[u8] = if pos == n { &[0] } else { &[0, 1] };
    let mut total = 0;
    for &v in choices {
        m[pos] = v;
        // step pos-1 is now fixed; check it against an earlier partner
        let k = pos - 1;
        let q = partner[k];
        let mut sign = 1;
        if q < k {
            let rel = relation(jumps[q], jumps[k]);
            let (sq, sk) = ((m[q], m[q + 1]), (m[k], m[k + 1]));
            if !step_pair_allowed(rel, sq, sk) {
                continue;
            }
            if is_flip(rel, sq) {
                sign = -1;
            }
        }
        total += if pos == n {
            sign
        } else {
            sign * dfs_sequences(pos + 1, m, jumps, partner)
        };
    }
    total
}

/// `Σ_p C(p, J) ∏_{(a,b) ∈ p} w(a, b)` over all perfect matchings of the
/// jumps, skipping pairs whose relation already forces a zero constant.
pub fn weighted_matching_sum(
    kind: FieldKind,
    jumps: &[Jump],
    w: &mut dyn FnMut(usize, usize) -> f64,
) -> f64 {
    let n = jumps.len();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut partner = vec![usize::MAX; n];
    let mut free: Vec<usize> = (0..n).collect();
    weighted_rec(kind, jumps, &mut free, &mut partner, 1.0, w)
}

fn weighted_rec(
    kind: FieldKind,
    jumps: &[Jump],
    free: &mut Vec<usize>,
    partner: &mut [usize],
    acc: f64,
    w: &mut dyn FnMut(usize, usize) -> f64,
) -> f64 {
    if free.is_empty() {
        return match kind {
            FieldKind::Quaternion => acc * quaternion_sum(jumps, partner),
            _ => acc,
        };
    }
    let first = free[0];
    let mut total = 0.0;
    for k in 1..free.len() {
        let other = free[k];
        if !pair_allowed(kind, relation(jumps[first], jumps[other])) {
            continue;
        }
        let wv = w(first, other);
        if wv == 0.0 {
            continue;
        }
        let mut rest: Vec<usize> = free[1..].to_vec();
        rest.remove(k - 1);
        partner[first] = other;
        partner[other] = first;
        total += weighted_rec(kind, jumps, &mut rest, partner, acc * wv, w);
    }
    total
}
