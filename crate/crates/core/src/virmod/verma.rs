use super::partition::Partition;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

/// Coefficient field for Verma-module arithmetic: `f64` or exact rationals.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational from a float (binary expansion, so 0.0625 stays 1/16).
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub type Combination<S> = BTreeMap<Partition, S>;

fn central<S: Scalar>(c: &S, m: i64) -> S {
    c.clone() * S::from_i64(m * m * m - m) / S::from_i64(12)
}

/// Rewrites L_{n1}⋯L_{nk} v into ordered lowering words by repeated use of the
/// bracket, L_m v = 0 (m > 0) and L_0 v = h v. Slow and direct; used as the
/// reference for everything computed by [`VermaAction`].
pub fn normal_order_reduce<S: Scalar>(word: &[i32], c: &S, h: &S) -> Combination<S> {
    let mut out: Combination<S> = BTreeMap::new();
    let mut pending: HashMap<Vec<i32>, S> = HashMap::new();
    pending.insert(word.to_vec(), S::one());
    while let Some(w) = pending.keys().next().cloned() {
        let coeff = pending.remove(&w).unwrap();
        if coeff.is_zero() {
            continue;
        }
        let mut push = |word: Vec<i32>, k: S| {
            let e = pending.entry(word).or_insert_with(S::zero);
            *e = e.clone() + k;
        };
        let Some(&last) = w.last() else {
            let e = out.entry(Partition::empty()).or_insert_with(S::zero);
            *e = e.clone() + coeff;
            continue;
        };
        if last > 0 {
            continue;
        }
        if last == 0 {
            push(w[..w.len() - 1].to_vec(), coeff * h.clone());
            continue;
        }
        match (0..w.len() - 1).rev().find(|&i| w[i] > w[i + 1]) {
            None => {
                let p = Partition::new(w.iter().map(|&m| (-m) as u32).collect());
                let e = out.entry(p).or_insert_with(S::zero);
                *e = e.clone() + coeff;
            }
            Some(i) => {
                let (a, b) = (w[i], w[i + 1]);
                let mut swapped = w.clone();
                swapped.swap(i, i + 1);
                push(swapped, coeff.clone());
                if a != b {
                    let mut merged = w[..i].to_vec();
                    merged.push(a + b);
                    merged.extend_from_slice(&w[i + 2..]);
                    push(merged, coeff.clone() * S::from_i64((a - b) as i64));
                }
                if a + b == 0 {
                    let mut dropped = w[..i].to_vec();
                    dropped.extend_from_slice(&w[i + 2..]);
                    push(dropped, coeff * central(c, a as i64));
                }
            }
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Shapovalov form ⟨L_{-λ}v, L_{-μ}v⟩ through the oracle.
pub fn oracle_inner<S: Scalar>(lam: &Partition, mu: &Partition, c: &S, h: &S) -> S {
    let mut word: Vec<i32> = lam.parts().iter().rev().map(|&p| p as i32).collect();
    word.extend(mu.parts().iter().map(|&p| -(p as i32)));
    normal_order_reduce(&word, c, h)
        .get(&Partition::empty())
        .cloned()
        .unwrap_or_else(S::zero)
}

type Terms<S> = Rc<Vec<(Partition, S)>>;

/// Memoized action of single generators on partition basis vectors.
pub struct VermaAction<S: Scalar> {
    c: S,
    h: S,
    memo: HashMap<(i32, Partition), Terms<S>>,
}

impl<S: Scalar> VermaAction<S> {
    pub fn new(c: S, h: S) -> Self {
        VermaAction {
            c,
            h,
            memo: HashMap::new(),
        }
    }

    /// L_m applied to L_{-λ} v, as a combination of partition basis vectors.
    pub fn act(&mut self, m: i32, lam: &Partition) -> Terms<S> {
        if let Some(r) = self.memo.get(&(m, lam.clone())) {
            return r.clone();
        }
        let res: Vec<(Partition, S)> = match lam.first() {
            None => match m.cmp(&0) {
                std::cmp::Ordering::Greater => Vec::new(),
                std::cmp::Ordering::Equal => vec![(Partition::empty(), self.h.clone())],
                std::cmp::Ordering::Less => vec![(Partition(vec![(-m) as u32]), S::one())],
            },
            Some(first) if m < 0 && (-m) as u32 >= first => {
                vec![(lam.prepend((-m) as u32), S::one())]
            }
            Some(first) => {
                // L_m L_{-f} w = L_{-f} L_m w + (m + f) L_{m-f} w + δ_{m,f} (c/12)(m³ - m) w
                let f = first as i32;
                let rest = lam.rest();
                let mut acc: BTreeMap<Partition, S> = BTreeMap::new();
                let inner = self.act(m, &rest);
                for (nu, a) in inner.iter() {
                    let outer = self.act(-f, nu);
                    for (mu, b) in outer.iter() {
                        let e = acc.entry(mu.clone()).or_insert_with(S::zero);
                        *e = e.clone() + a.clone() * b.clone();
                    }
                }
                if m + f != 0 {
                    let k = S::from_i64((m + f) as i64);
                    let shifted = self.act(m - f, &rest);
                    for (mu, b) in shifted.iter() {
                        let e = acc.entry(mu.clone()).or_insert_with(S::zero);
                        *e = e.clone() + k.clone() * b.clone();
                    }
                }
                if m == f {
                    let e = acc.entry(rest.clone()).or_insert_with(S::zero);
                    *e = e.clone() + central(&self.c, m as i64);
                }
                acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
            }
        };
        let res = Rc::new(res);
        self.memo.insert((m, lam.clone()), res.clone());
        res
    }

    /// Gram matrix of level k in the given (partition) basis, row-major.
    pub fn gram(&mut self, basis: &[Vec<Partition>], k: usize) -> Vec<Vec<S>> {
        let mut lower: Vec<Vec<Vec<S>>> = vec![vec![vec![S::one()]]];
        for level in 1..=k {
            lower.push(self.gram_level(basis, level, &lower));
        }
        lower.pop().unwrap()
    }

    /// Level-k Gram from the Grams of all lower levels:
    /// G_k(λ, μ) = Σ_ν [L_{λ1} L_{-μ} v]_ν G_{k-λ1}(λ', ν).
    pub fn gram_level(&mut self, basis: &[Vec<Partition>], k: usize, lower: &[Vec<Vec<S>>]) -> Vec<Vec<S>> {
        let labels = &basis[k];
        let index: Vec<HashMap<&Partition, usize>> = basis
            .iter()
            .map(|ls| ls.iter().enumerate().map(|(i, p)| (p, i)).collect())
            .collect();
        let n = labels.len();
        let mut g = vec![vec![S::zero(); n]; n];
        for i in 0..n {
            let lam = &labels[i];
            let f = lam.first().unwrap() as usize;
            let rest = lam.rest();
            let ri = index[k - f][&rest];
            for j in i..n {
                let terms = self.act(f as i32, &labels[j]);
                let mut s = S::zero();
                for (nu, a) in terms.iter() {
                    let ni = index[k - f][nu];
                    s = s + a.clone() * lower[k - f][ri][ni].clone();
                }
                g[j][i] = s.clone();
                g[i][j] = s;
            }
        }
        g
    }
}
