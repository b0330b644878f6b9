//! Multi-indices, monomial counts and the two rank bounds.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CombinatoricsError {
    #[error("c({n},{h}) overflows u64")]
    Overflow { n: usize, h: usize },
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
}

/// Exponent vector `(λ₁,…,λ_n)`; indexes monomials and partial derivatives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `1_λ`.
    pub fn unit(n: usize, lambda: usize) -> Self {
        let mut v = vec![0; n];
        v[lambda] = 1;
        MultiIndex(v)
    }

    /// `k · 1_λ`.
    pub fn pure(n: usize, lambda: usize, k: u32) -> Self {
        let mut v = vec![0; n];
        v[lambda] = k;
        MultiIndex(v)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn height(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, lambda: usize) -> u32 {
        self.0[lambda]
    }

    pub fn plus_unit(&self, lambda: usize) -> Self {
        let mut v = self.0.clone();
        v[lambda] += 1;
        MultiIndex(v)
    }

    pub fn minus_unit(&self, lambda: usize) -> Option<Self> {
        if self.0[lambda] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[lambda] -= 1;
        Some(MultiIndex(v))
    }

    pub fn plus(&self, other: &MultiIndex) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self − other`, if componentwise non-negative.
    pub fn minus(&self, other: &MultiIndex) -> Option<Self> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// All `M ≤ self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::new()];
        for &l in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (l as usize + 1));
            for prefix in &out {
                for m in 0..=l {
                    let mut p = prefix.clone();
                    p.push(m);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(MultiIndex).collect()
    }

    /// `Π_s binom(self_s, m_s)`.
    pub fn binomial(&self, m: &MultiIndex) -> u64 {
        self.0
            .iter()
            .zip(&m.0)
            .map(|(&l, &k)| binom_small(l as u64, k as u64))
            .product()
    }

    /// `Π_s (λ_s)!`.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&l| (1..=l as u64).product::<u64>()).product()
    }

    /// Whether only the last coordinate carries exponent.
    pub fn is_pure_last(&self) -> bool {
        let n = self.0.len();
        self.0[..n - 1].iter().all(|&l| l == 0)
    }

    /// Indices `λ` with `λ_λ > 0`, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

fn binom_small(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `c(n,h) = binom(h+n−1, h)`, the number of degree-`h` monomials in `n`
/// variables. Overflow is reported, never wrapped.
pub fn c(n: usize, h: usize) -> Result<u64, CombinatoricsError> {
    if n == 0 {
        return Err(CombinatoricsError::InvalidArguments("n must be ≥ 1".into()));
    }
    // binom(h+n−1, n−1) built incrementally keeps every prefix an integer.
    let k = (n - 1).min(h) as u64;
    let top = (h + n - 1) as u64;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (top - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(CombinatoricsError::Overflow { n, h });
        }
    }
    Ok(acc as u64)
}

fn check_nd(n: usize, d: usize) -> Result<(), CombinatoricsError> {
    if n < 2 {
        return Err(CombinatoricsError::InvalidArguments(format!("n = {n} < 2")));
    }
    if d <= n {
        return Err(CombinatoricsError::InvalidArguments(format!(
            "need d > n, got n = {n}, d = {d}"
        )));
    }
    Ok(())
}

/// Castelnuovo's bound `π(n,d) = Σ_{h≥1} (d − h(n−1) − 1)⁺`.
pub fn pi_castelnuovo(n: usize, d: usize) -> Result<u64, CombinatoricsError> {
    check_nd(n, d)?;
    let (n, d) = (n as i64, d as i64);
    let mut sum = 0i64;
    let mut h = 1;
    loop {
        let term = d - h * (n - 1) - 1;
        if term <= 0 {
            break;
        }
        sum += term;
        h += 1;
    }
    Ok(sum as u64)
}

/// The integer `k₀ ≥ 1` with `c(n,k₀) ≤ d < c(n,k₀+1)`.
pub fn k0(n: usize, d: usize) -> Result<usize, CombinatoricsError> {
    check_nd(n, d)?;
    let mut k = 1;
    while c(n, k + 1)? <= d as u64 {
        k += 1;
    }
    Ok(k)
}

/// `π′(n,d)` together with `k₀`.
pub fn pi_prime(n: usize, d: usize) -> Result<(u64, usize), CombinatoricsError> {
    let k = k0(n, d)?;
    if k < 2 {
        return Ok((0, k));
    }
    let mut sum = 0u64;
    for h in 1..=k {
        sum += d as u64 - c(n, h)?;
    }
    Ok((sum, k))
}

/// `P(n,h)` in graded lexicographically decreasing order.
pub fn enumerate_partitions(n: usize, h: u32) -> Vec<MultiIndex> {
    fn rec(slots: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            rec(slots - 1, remaining - first, prefix, out);
            prefix.pop();
        }
    }
    assert!(n >= 1);
    let mut out = Vec::new();
    rec(n, h, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Summary of the combinatorial data attached to `(n, d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub d: usize,
    /// `c(n,h)` for `h = 1..=k₀+1`.
    pub c_table: Vec<u64>,
    pub k0: usize,
    pub pi: u64,
    pub pi_prime: u64,
}

pub fn bounds(n: usize, d: usize) -> Result<BoundsReport, CombinatoricsError> {
    let (pp, k) = pi_prime(n, d)?;
    let c_table = (1..=k + 1).map(|h| c(n, h)).collect::<Result<_, _>>()?;
    Ok(BoundsReport {
        n,
        d,
        c_table,
        k0: k,
        pi: pi_castelnuovo(n, d)?,
        pi_prime: pp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(c(3, 2).unwrap(), 6);
        assert_eq!(c(3, 4).unwrap(), 15);
        assert_eq!(c(5, 0).unwrap(), 1);
        assert_eq!(c(1, 9).unwrap(), 1);
        assert!(matches!(c(60, 60), Err(CombinatoricsError::Overflow { .. })));
    }

    #[test]
    fn castelnuovo_values() {
        assert_eq!(pi_castelnuovo(3, 6).unwrap(), 4);
        assert_eq!(pi_castelnuovo(3, 15).unwrap(), 42);
        for d in 3..=10u64 {
            assert_eq!(pi_castelnuovo(2, d as usize).unwrap(), (d - 1) * (d - 2) / 2);
        }
        assert!(pi_castelnuovo(3, 3).is_err());
    }

    #[test]
    fn pi_prime_values() {
        assert_eq!(pi_prime(3, 6).unwrap(), (3, 2));
        assert_eq!(pi_prime(3, 15).unwrap(), (26, 4));
        // Direct positive-part sum vs brute force: (7-3) + (7-6) = 5.
        let brute: u64 = (1..20)
            .map(|h| 7i64 - c(3, h).unwrap() as i64)
            .filter(|t| *t > 0)
            .map(|t| t as u64)
            .sum();
        assert_eq!(brute, 5);
        assert_eq!(pi_prime(3, 7).unwrap().0, 5);
        assert_eq!(pi_prime(3, 5).unwrap(), (0, 1));
    }

    #[test]
    fn partition_order() {
        let p = enumerate_partitions(2, 2);
        let got: Vec<_> = p.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(got, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let p = enumerate_partitions(3, 1);
        let got: Vec<_> = p.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(got, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        // Explicit count by filtering all exponent triples of height 4.
        let mut count = 0;
        for a in 0..=4 {
            for b in 0..=4 {
                for cc in 0..=4 {
                    if a + b + cc == 4 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 15);
        assert_eq!(enumerate_partitions(3, 4).len(), 15);
    }

    #[test]
    fn bounds_report() {
        let b = bounds(2, 5).unwrap();
        assert_eq!((b.pi, b.pi_prime, b.k0), (6, 6, 4));
        assert_eq!(b.c_table, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn multi_index_helpers() {
        let l = MultiIndex::new(vec![2, 0, 1]);
        assert_eq!(l.height(), 3);
        assert_eq!(l.sub_indices().len(), 6);
        assert_eq!(l.binomial(&MultiIndex::new(vec![1, 0, 1])), 2);
        assert_eq!(l.factorial(), 2);
        assert_eq!(l.minus_unit(1), None);
        assert_eq!(l.to_string(), "(2,0,1)");
    }

    proptest! {
        #[test]
        fn pascal_recurrence(n in 2usize..8, h in 1usize..12) {
            prop_assert_eq!(c(n, h).unwrap(), c(n - 1, h).unwrap() + c(n, h - 1).unwrap());
        }

        #[test]
        fn partitions_are_distinct_and_sorted(n in 1usize..5, h in 0u32..6) {
            let p = enumerate_partitions(n, h);
            prop_assert_eq!(p.len() as u64, c(n, h as usize).unwrap());
            for w in p.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
            prop_assert!(p.iter().all(|m| m.height() == h && m.dim() == n));
        }

        #[test]
        fn k0_brackets_d(n in 2usize..6, extra in 1usize..60) {
            let d = n + extra;
            let k = k0(n, d).unwrap();
            prop_assert!(c(n, k).unwrap() <= d as u64);
            prop_assert!((d as u64) < c(n, k + 1).unwrap());
        }

        #[test]
        fn planar_bounds_agree(d in 3usize..40) {
            prop_assert_eq!(pi_prime(2, d).unwrap().0, pi_castelnuovo(2, d).unwrap());
        }

        #[test]
        fn pi_prime_strictly_below_castelnuovo(n in 3usize..6, extra in 0usize..40) {
            let d = c(n, 2).unwrap() as usize + extra;
            prop_assert!(pi_prime(n, d).unwrap().0 < pi_castelnuovo(n, d).unwrap());
        }
    }
}
