use serde::{Deserialize, Serialize};
use std::fmt;

/// A weakly decreasing list of positive parts, labelling L_{-λ1}⋯L_{-λk} v.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Partition(pub Vec<u32>);

impl Partition {
    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    pub fn new(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition(parts)
    }

    pub fn level(&self) -> usize {
        self.0.iter().map(|&p| p as usize).sum()
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<u32> {
        self.0.first().copied()
    }

    pub fn rest(&self) -> Partition {
        Partition(self.0.get(1..).unwrap_or(&[]).to_vec())
    }

    /// Prepend a part that is ≥ every existing part.
    pub fn prepend(&self, p: u32) -> Partition {
        debug_assert!(self.first().is_none_or(|f| p >= f));
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(p);
        v.extend_from_slice(&self.0);
        Partition(v)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

/// Partitions of `k`, reverse-lexicographic (largest first part first).
pub fn partitions_of(k: usize) -> Vec<Partition> {
    fn rec(k: u32, max: u32, prefix: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if k == 0 {
            out.push(Partition(prefix.clone()));
            return;
        }
        for p in (1..=k.min(max)).rev() {
            prefix.push(p);
            rec(k - p, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k as u32, k as u32, &mut Vec::new(), &mut out);
    out
}

/// All partitions of levels 0..=n, grouped by level.
pub fn enumerate_basis(n: usize) -> Vec<Vec<Partition>> {
    (0..=n).map(partitions_of).collect()
}

pub fn partition_count(k: usize) -> usize {
    let mut p = vec![0usize; k + 1];
    p[0] = 1;
    for part in 1..=k {
        for total in part..=k {
            p[total] += p[total - part];
        }
    }
    p[k]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(enumerate_basis(0), vec![vec![Partition::empty()]]);
        let b = enumerate_basis(2);
        assert_eq!(b[2], vec![Partition(vec![2]), Partition(vec![1, 1])]);
        let total: usize = enumerate_basis(5).iter().map(Vec::len).sum();
        assert_eq!(total, 19);
    }

    #[test]
    fn counts_match_generating_function() {
        for k in 0..=14 {
            assert_eq!(partitions_of(k).len(), partition_count(k));
        }
        assert_eq!(partition_count(20), 627);
    }

    #[test]
    fn order_is_reverse_lexicographic() {
        let l = partitions_of(6);
        for w in l.windows(2) {
            assert!(w[0] > w[1], "{} !> {}", w[0], w[1]);
        }
    }
}
