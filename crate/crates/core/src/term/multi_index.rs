use std::fmt;

use serde::Serialize;

/// Exponent vector `α = (α_1, …, α_n)` with order `|α| = Σ α_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `α!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product()
    }

    pub fn plus_unit(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] += 1;
        MultiIndex(v)
    }

    /// `α - e_i`, or `None` when `α_i = 0`.
    pub fn minus_unit(&self, i: usize) -> Option<Self> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some(MultiIndex(v))
    }

    /// Lowest index with a positive entry.
    pub fn first_step(&self) -> Option<usize> {
        self.0.iter().position(|&k| k > 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of length `n` and order exactly `k`, in ascending
/// lexicographic order: `(0,2), (1,1), (2,0)`.
pub fn multi_indices_of_order(n: usize, k: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(k);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=k {
            prefix.push(first);
            rec(n, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if k == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return out;
    }
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Graded enumeration: by order, then ascending lexicographic.
pub fn multi_indices(n: usize, max_order: u32) -> Vec<MultiIndex> {
    (0..=max_order)
        .flat_map(|k| multi_indices_of_order(n, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order() {
        let all: Vec<String> = multi_indices(2, 2).iter().map(|a| a.to_string()).collect();
        assert_eq!(all, ["(0,0)", "(0,1)", "(1,0)", "(0,2)", "(1,1)", "(2,0)"]);
    }

    #[test]
    fn counts() {
        // C(n + k, k)
        assert_eq!(multi_indices(3, 4).len(), 35);
        assert_eq!(multi_indices_of_order(4, 3).len(), 20);
    }
}
