//! Order types of periodic critical orbits and their realization in the
//! quadratic family.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::UnimodalMap;

/// Largest period accepted by the admissibility search.
pub const MAX_ADMISSIBLE_PERIOD: usize = 12;

/// Ranks of the orbit points x0, H(x0), ..., H^{p-1}(x0), 1-based.
///
/// An order type and its mirror image (ranks r -> p+1-r) are the same
/// combinatorics; the stored representative has `perm[1] > perm[0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct OrderType {
    perm: Vec<usize>,
}

impl OrderType {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let p = perm.len();
        if p < 2 {
            return Err(Error::Validation(format!("order type needs p >= 2, got {p}")));
        }
        let mut seen = vec![false; p + 1];
        for &r in &perm {
            if r == 0 || r > p || seen[r] {
                return Err(Error::Validation(format!("{perm:?} is not a permutation of 1..{p}")));
            }
            seen[r] = true;
        }
        let perm = if perm[1] < perm[0] { perm.iter().map(|r| p + 1 - r).collect() } else { perm };
        Ok(OrderType { perm })
    }

    /// Period doubling.
    pub fn pd() -> Self {
        OrderType { perm: vec![1, 2] }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn period(&self) -> usize {
        self.perm.len()
    }
}

impl TryFrom<Vec<usize>> for OrderType {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        OrderType::new(v)
    }
}

impl From<OrderType> for Vec<usize> {
    fn from(t: OrderType) -> Vec<usize> {
        t.perm
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.perm.iter().map(|r| r.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl FromStr for OrderType {
    type Err = Error;
    /// Accepts `pd`, `[2,3,1]` or `2,3,1`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("pd") {
            return Ok(OrderType::pd());
        }
        let inner = t.trim_start_matches('[').trim_end_matches(']');
        let perm = inner
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| Error::Validation(format!("bad order type {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        OrderType::new(perm)
    }
}

/// Canonical order type of distinct points.
pub fn order_type_of(points: &[f64]) -> Result<OrderType> {
    if points.len() < 2 {
        return Err(Error::Validation("need at least two points".into()));
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| points[i].total_cmp(&points[j]));
    for w in idx.windows(2) {
        if (points[w[1]] - points[w[0]]).abs() <= 1e-12 {
            return Err(Error::Degenerate(format!("points {} and {} coincide", w[0], w[1])));
        }
    }
    let mut perm = vec![0; points.len()];
    for (rank, &i) in idx.iter().enumerate() {
        perm[i] = rank + 1;
    }
    OrderType::new(perm)
}

/// Order type of the first `p` points of the orbit of the critical point.
pub fn critical_orbit_type(m: &UnimodalMap, p: usize) -> Result<OrderType> {
    if p < 2 {
        return Err(Error::Validation(format!("period must be >= 2, got {p}")));
    }
    let orbit = m.orbit(m.x0, p);
    for &x in &orbit {
        if !m.e.contains(x) {
            return Err(Error::Escape(format!("orbit point {x} left the domain")));
        }
    }
    order_type_of(&orbit)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    L,
    C,
    R,
}

impl Symbol {
    fn of(y: f64) -> Symbol {
        if y < 0.0 {
            Symbol::L
        } else if y > 0.0 {
            Symbol::R
        } else {
            Symbol::C
        }
    }

    fn value(self) -> i32 {
        match self {
            Symbol::L => -1,
            Symbol::C => 0,
            Symbol::R => 1,
        }
    }

    fn flip(self) -> Symbol {
        match self {
            Symbol::L => Symbol::R,
            Symbol::R => Symbol::L,
            Symbol::C => Symbol::C,
        }
    }
}

/// A superstable parameter of g(y) = 1 - λy² together with its data.
#[derive(Clone, Debug)]
pub struct Superstable {
    pub lambda: f64,
    pub period: usize,
    /// Itinerary of g(0), ..., g^{p-1}(0).
    pub word: Vec<Symbol>,
    pub order_type: OrderType,
}

/// Sign of (kneading sequence at λ) - (word followed by C), in the
/// monotone kneading order.
fn compare_kneading(lambda: f64, word: &[Symbol]) -> i32 {
    let mut y = 0.0f64;
    let mut parity = 1;
    for k in 0..=word.len() {
        y = 1.0 - lambda * y * y;
        let s = Symbol::of(y);
        let t = if k < word.len() { word[k] } else { Symbol::C };
        if s != t {
            return parity * (s.value() - t.value()).signum();
        }
        if s == Symbol::R {
            parity = -parity;
        }
    }
    0
}

/// g_λ^p(0) and its λ-derivative.
fn critical_return(lambda: f64, p: usize) -> (f64, f64) {
    let (mut y, mut dy) = (0.0f64, 0.0f64);
    for _ in 0..p {
        let ny = 1.0 - lambda * y * y;
        dy = -y * y - 2.0 * lambda * y * dy;
        y = ny;
    }
    (y, dy)
}

/// Parameter where the kneading sequence crosses `word`·C.
fn bisect_word(word: &[Symbol]) -> f64 {
    let (mut a, mut b) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if compare_kneading(m, word) < 0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Superstable parameter of exact period `p` for `word`, if it exists.
fn realize(word: &[Symbol]) -> Option<f64> {
    let p = word.len() + 1;
    let mut lambda = bisect_word(word);
    for _ in 0..4 {
        let (y, dy) = critical_return(lambda, p);
        if dy == 0.0 {
            break;
        }
        let next = lambda - y / dy;
        if !(0.0..=2.0).contains(&next) {
            break;
        }
        lambda = next;
    }
    let mut y = 0.0f64;
    for k in 1..=p {
        y = 1.0 - lambda * y * y;
        if k < p && y.abs() < 1e-7 {
            return None;
        }
    }
    (y.abs() < 1e-9).then_some(lambda)
}

fn h_orbit_type(lambda: f64, p: usize) -> Result<OrderType> {
    let mut x = 1.0 / lambda;
    let mut pts = Vec::with_capacity(p);
    for _ in 0..p {
        pts.push(x);
        let e = 1.0 - lambda * x;
        x = e * e;
    }
    order_type_of(&pts)
}

fn word_from_bits(bits: u32, len: usize) -> Vec<Symbol> {
    (0..len).map(|i| if bits >> i & 1 == 1 { Symbol::R } else { Symbol::L }).collect()
}

/// All superstable parameters of exact period `p` in λ ∈ (0, 2], sorted.
pub fn superstable_parameters(p: usize) -> Result<Vec<Superstable>> {
    if p < 2 {
        return Err(Error::Validation(format!("period must be >= 2, got {p}")));
    }
    if p > MAX_ADMISSIBLE_PERIOD {
        return Err(Error::Unsupported(format!("admissibility search limited to p <= {MAX_ADMISSIBLE_PERIOD}, got {p}")));
    }
    let len = p - 1;
    let mut found: Vec<(f64, Vec<Symbol>)> = (0..1u32 << len)
        .into_par_iter()
        .filter_map(|bits| {
            let word = word_from_bits(bits, len);
            // g(0) = 1 > 0 for every λ > 0
            if word[0] != Symbol::R {
                return None;
            }
            realize(&word).map(|l| (l, word))
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
    found
        .into_iter()
        .map(|(lambda, word)| Ok(Superstable { lambda, period: p, order_type: h_orbit_type(lambda, p)?, word }))
        .collect()
}

/// True iff `t` is the order type of a superstable critical orbit of the
/// quadratic family.
pub fn validate_admissible(t: &OrderType) -> Result<bool> {
    Ok(find_superstable(t)?.is_some())
}

/// The superstable parameter realizing `t`, if any.
pub fn find_superstable(t: &OrderType) -> Result<Option<Superstable>> {
    Ok(superstable_parameters(t.period())?.into_iter().find(|s| &s.order_type == t))
}

/// Renormalization product of kneading words: the word of the period-pq
/// orbit obtained by replacing each point of the period-q pattern `b` by a
/// copy of the period-p pattern `a`.
pub fn star_product(a: &[Symbol], b: &[Symbol]) -> Vec<Symbol> {
    let odd = a.iter().filter(|&&s| s == Symbol::R).count() % 2 == 1;
    let mut out = a.to_vec();
    for &s in b {
        out.push(if odd { s.flip() } else { s });
        out.extend_from_slice(a);
    }
    out
}

/// Parameter of the superstable orbit with combinatorics t∗t, used to seed
/// the fixed-point solver at ℓ = 2.
pub fn seed_parameter(t: &OrderType) -> Result<f64> {
    let s = find_superstable(t)?.ok_or_else(|| Error::Combinatorics(format!("{t} is not admissible")))?;
    let w = star_product(&s.word, &s.word);
    Ok(bisect_word(&w))
}
