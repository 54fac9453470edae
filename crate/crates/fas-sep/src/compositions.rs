//! Index sets of the characteristic-function series: weak compositions,
//! prefix-bounded q-vectors and the pole-multiplicity signatures.

use std::collections::BTreeMap;

use crate::error::{FasError, Result};
use crate::specfun;

/// One `(l, q)` term of the double sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionIndex {
    pub p: u32,
    pub l_vec: Vec<u32>,
    pub q_vec: Vec<u32>,
}

impl CompositionIndex {
    pub fn new(l_vec: Vec<u32>, q_vec: Vec<u32>) -> Result<Self> {
        if l_vec.len() != q_vec.len() || l_vec.is_empty() {
            return Err(FasError::invalid(
                "q_vec",
                "l and q must have the same non-zero length",
            ));
        }
        let p: u32 = l_vec.iter().sum();
        if q_vec.iter().sum::<u32>() != p {
            return Err(FasError::invalid("q_vec", "q must sum to p"));
        }
        if !prefix_ok(&l_vec, &q_vec) {
            return Err(FasError::invalid(
                "q_vec",
                "prefix sums of q exceed those of l",
            ));
        }
        Ok(CompositionIndex { p, l_vec, q_vec })
    }

    /// `prod_{k>=2} k^{-q_k} C(l_k + sum_{j<k}(l_j - q_j), l_k)`, the weight of
    /// this term without the multinomial factor.
    pub fn inner_weight(&self) -> f64 {
        let mut surplus = 0u64;
        let mut w = 1.0;
        for (k, (&l, &q)) in self.l_vec.iter().zip(&self.q_vec).enumerate() {
            if k > 0 {
                w *= specfun::binomial(l as u64 + surplus, l as u64)
                    / ((k + 1) as f64).powi(q as i32);
            }
            surplus = surplus + l as u64 - q as u64;
        }
        w
    }
}

fn prefix_ok(l: &[u32], q: &[u32]) -> bool {
    let mut sl = 0;
    let mut sq = 0;
    for k in 0..l.len().saturating_sub(1) {
        sl += l[k];
        sq += q[k];
        if sq > sl {
            return false;
        }
    }
    true
}

/// Weak compositions of `p` into `n` parts, first part descending.
#[derive(Debug, Clone)]
pub struct WeakCompositions {
    current: Option<Vec<u32>>,
}

impl Iterator for WeakCompositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let n = out.len();
        let mut v = out.clone();
        if let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| v[i] > 0) {
            let tail: u32 = v[i + 1..].iter().sum();
            v[i] -= 1;
            for x in v[i + 1..].iter_mut() {
                *x = 0;
            }
            v[i + 1] = tail + 1;
            self.current = Some(v);
        }
        Some(out)
    }
}

/// Every weak composition of `p` into `n` parts, in lexicographically
/// descending order: `(2,0), (1,1), (0,2)`.
pub fn enumerate_l(p: u32, n: usize) -> WeakCompositions {
    if n == 0 {
        return WeakCompositions { current: None };
    }
    let mut v = vec![0; n];
    v[0] = p;
    WeakCompositions { current: Some(v) }
}

/// q-vectors with `sum_{i<=k} q_i <= sum_{i<=k} l_i` for `k < n` and
/// `sum q = sum l`, in ascending lexicographic order.
#[derive(Debug, Clone)]
pub struct BoundedQ {
    prefix_l: Vec<u32>,
    p: u32,
    current: Option<Vec<u32>>,
}

impl Iterator for BoundedQ {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let n = out.len();
        let mut prefix = 0;
        let mut sums = Vec::with_capacity(n);
        for &x in &out {
            prefix += x;
            sums.push(prefix);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            if sums[i] < self.prefix_l[i] && sums[i] < self.p {
                let mut v = out.clone();
                v[i] += 1;
                for x in v[i + 1..].iter_mut() {
                    *x = 0;
                }
                v[n - 1] = self.p - (sums[i] + 1);
                self.current = Some(v);
                break;
            }
        }
        Some(out)
    }
}

/// Every admissible q-vector for `l_vec`.
pub fn enumerate_q(l_vec: &[u32]) -> BoundedQ {
    let n = l_vec.len();
    let p: u32 = l_vec.iter().sum();
    let mut acc = 0;
    let prefix_l = l_vec
        .iter()
        .map(|&l| {
            acc += l;
            acc
        })
        .collect();
    let current = if n == 0 {
        None
    } else {
        let mut v = vec![0; n];
        v[n - 1] = p;
        Some(v)
    };
    BoundedQ {
        prefix_l,
        p,
        current,
    }
}

/// Pole multiplicities of the partial-fraction integrand:
/// `eta_1 = K + sum_{k<=K} q_k`, `eta_k = q_{K+k-1} + 1` for `k >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EtaSignature {
    pub eta: Vec<u32>,
}

impl EtaSignature {
    /// Series order `p` implied by `sum eta = N + p`.
    pub fn order(&self, n: usize) -> u32 {
        self.eta.iter().sum::<u32>() - n as u32
    }
}

/// Signature of a q-vector for best-`k` selection out of `n` ports.
pub fn eta_signature(q_vec: &[u32], k: usize, n: usize) -> Result<EtaSignature> {
    if q_vec.len() != n {
        return Err(FasError::invalid(
            "q_vec",
            format!("expected length {n}, got {}", q_vec.len()),
        ));
    }
    if k == 0 || k > n {
        return Err(FasError::invalid(
            "K",
            format!("must satisfy 1 <= K <= N = {n}, got {k}"),
        ));
    }
    let mut eta = Vec::with_capacity(n - k + 1);
    eta.push(k as u32 + q_vec[..k].iter().sum::<u32>());
    eta.extend(q_vec[k..].iter().map(|&q| q + 1));
    Ok(EtaSignature { eta })
}

/// Aggregated coefficient mass of one signature at series order `p`:
/// the sum of `multinomial(p; l) * inner_weight(l, q)` over every term with
/// that signature.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureWeight {
    pub p: u32,
    pub eta: EtaSignature,
    pub weight: f64,
}

/// Reference aggregation by walking the `(l, q)` streams term by term.
pub fn signature_weights_by_streams(
    p_max: u32,
    n: usize,
    k: usize,
) -> Result<Vec<SignatureWeight>> {
    let mut map: BTreeMap<(u32, EtaSignature), f64> = BTreeMap::new();
    for p in 0..=p_max {
        for l in enumerate_l(p, n) {
            let parts: Vec<u64> = l.iter().map(|&x| x as u64).collect();
            let multi = specfun::multinomial(p as u64, &parts)?;
            for q in enumerate_q(&l) {
                let eta = eta_signature(&q, k, n)?;
                let idx = CompositionIndex {
                    p,
                    l_vec: l.clone(),
                    q_vec: q,
                };
                *map.entry((p, eta)).or_insert(0.0) += multi * idx.inner_weight();
            }
        }
    }
    Ok(map
        .into_iter()
        .map(|((p, eta), weight)| SignatureWeight { p, eta, weight })
        .collect())
}

/// Number of signatures with order at most `p_max`: `C(p_max + N - K + 1, N - K + 1)`.
pub fn signature_count(p_max: u32, n: usize, k: usize) -> f64 {
    let nt = (n - k + 1) as u64;
    specfun::binomial(p_max as u64 + nt, nt)
}

/// Dense `(L, s)` table: `L` = running sum of l, `s` = running surplus of l over q.
#[derive(Clone)]
struct Table {
    dim: usize,
    v: Vec<f64>,
}

impl Table {
    fn new(p_max: usize) -> Self {
        let dim = p_max + 1;
        Table {
            dim,
            v: vec![0.0; dim * dim],
        }
    }

    #[inline]
    fn at(&self, l: usize, s: usize) -> f64 {
        self.v[l * self.dim + s]
    }

    #[inline]
    fn add(&mut self, l: usize, s: usize, x: f64) {
        self.v[l * self.dim + s] += x;
    }

    fn max_s(&self) -> usize {
        let mut m = 0;
        for l in 0..self.dim {
            for s in (m + 1)..=l {
                if self.at(l, s) != 0.0 {
                    m = s;
                }
            }
        }
        m
    }
}

struct Coeffs {
    inv_fact: Vec<f64>,
    binom: Vec<Vec<f64>>,
}

impl Coeffs {
    fn new(p_max: usize) -> Self {
        let inv_fact = (0..=p_max)
            .map(|i| 1.0 / specfun::factorial(i as u64))
            .collect();
        let binom = (0..=2 * p_max)
            .map(|a| {
                (0..=p_max)
                    .map(|b| specfun::binomial(a as u64, b as u64))
                    .collect()
            })
            .collect();
        Coeffs { inv_fact, binom }
    }
}

/// Add `l` to every state: `(L, s) -> (L + l, s + l)` with weight `C(l + s, l) / l!`.
fn l_step(a: &Table, c: &Coeffs) -> Table {
    let p_max = a.dim - 1;
    let mut b = Table::new(p_max);
    for big_l in 0..=p_max {
        for s in 0..=big_l {
            let x = a.at(big_l, s);
            if x == 0.0 {
                continue;
            }
            for l in 0..=(p_max - big_l) {
                b.add(big_l + l, s + l, x * c.binom[l + s][l] * c.inv_fact[l]);
            }
        }
    }
    b
}

/// Remove `q` from the surplus with weight `factor^q`, summing over every `q`.
fn q_step_merged(a: &Table, factor: f64) -> Table {
    let p_max = a.dim - 1;
    let mut b = Table::new(p_max);
    for big_l in 0..=p_max {
        for s in 0..=big_l {
            let x = a.at(big_l, s);
            if x == 0.0 {
                continue;
            }
            let mut w = x;
            for q in 0..=s {
                b.add(big_l, s - q, w);
                w *= factor;
            }
        }
    }
    b
}

/// Remove exactly `q` from the surplus with weight `factor^q`.
fn q_step_fixed(a: &Table, q: usize, factor: f64) -> Table {
    let p_max = a.dim - 1;
    let mut b = Table::new(p_max);
    let w = factor.powi(q as i32);
    for big_l in 0..=p_max {
        for s in q..=big_l {
            let x = a.at(big_l, s);
            if x != 0.0 {
                b.add(big_l, s - q, x * w);
            }
        }
    }
    b
}

/// Aggregated signature weights for every order `p <= p_max` by dynamic
/// programming over ports. Equivalent to [`signature_weights_by_streams`]
/// but without visiting individual `(l, q)` terms.
pub fn signature_weights(p_max: u32, n: usize, k: usize) -> Result<Vec<SignatureWeight>> {
    if n == 0 || k == 0 || k > n {
        return Err(FasError::invalid(
            "K",
            format!("must satisfy 1 <= K <= N, got K={k}, N={n}"),
        ));
    }
    let pm = p_max as usize;
    let c = Coeffs::new(pm);
    let mut a = Table::new(pm);
    a.v[0] = 1.0;
    let merged_stages = if k == n { n - 1 } else { k };
    for stage in 1..=merged_stages {
        a = l_step(&a, &c);
        a = q_step_merged(&a, 1.0 / stage as f64);
    }
    let mut out = Vec::new();
    let mut suffix = Vec::new();
    dfs(&a, merged_stages + 1, n, k, &c, &mut suffix, &mut out);
    for w in out.iter_mut() {
        w.weight *= specfun::factorial(w.p as u64);
    }
    out.sort_by(|x, y| (x.p, &x.eta).cmp(&(y.p, &y.eta)));
    let mut merged: Vec<SignatureWeight> = Vec::with_capacity(out.len());
    for w in out {
        match merged.last_mut() {
            Some(last) if last.p == w.p && last.eta == w.eta => last.weight += w.weight,
            _ => merged.push(w),
        }
    }
    Ok(merged)
}

fn dfs(
    a: &Table,
    stage: usize,
    n: usize,
    k: usize,
    c: &Coeffs,
    suffix: &mut Vec<u32>,
    out: &mut Vec<SignatureWeight>,
) {
    let b = l_step(a, c);
    let inv = 1.0 / stage as f64;
    if stage == n {
        // q_N absorbs the remaining surplus.
        for big_l in 0..b.dim {
            for s in 0..=big_l {
                let x = b.at(big_l, s);
                if x == 0.0 {
                    continue;
                }
                let p = big_l as u32;
                let suffix_sum: u32 = suffix.iter().sum::<u32>() + s as u32;
                let eta = if k == n {
                    vec![n as u32 + p]
                } else {
                    let mut e = Vec::with_capacity(n - k + 1);
                    e.push(k as u32 + p - suffix_sum);
                    e.extend(suffix.iter().map(|&q| q + 1));
                    e.push(s as u32 + 1);
                    e
                };
                out.push(SignatureWeight {
                    p,
                    eta: EtaSignature { eta },
                    weight: x * inv.powi(s as i32),
                });
            }
        }
        return;
    }
    let top = b.max_s();
    for q in 0..=top {
        let next = q_step_fixed(&b, q, inv);
        suffix.push(q as u32);
        dfs(&next, stage + 1, n, k, c, suffix, out);
        suffix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_pairs(p: u32, n: usize) -> usize {
        let mut count = 0;
        let total = (p as usize + 1).pow(n as u32);
        for code in 0..total {
            let mut l = vec![0u32; n];
            let mut c = code;
            for x in l.iter_mut() {
                *x = (c % (p as usize + 1)) as u32;
                c /= p as usize + 1;
            }
            if l.iter().sum::<u32>() != p {
                continue;
            }
            for code2 in 0..total {
                let mut q = vec![0u32; n];
                let mut c2 = code2;
                for x in q.iter_mut() {
                    *x = (c2 % (p as usize + 1)) as u32;
                    c2 /= p as usize + 1;
                }
                if q.iter().sum::<u32>() == p && prefix_ok(&l, &q) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn l_examples() {
        assert_eq!(
            enumerate_l(0, 4).collect::<Vec<_>>(),
            vec![vec![0, 0, 0, 0]]
        );
        assert_eq!(
            enumerate_l(2, 2).collect::<Vec<_>>(),
            vec![vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        let mut brute = 0;
        for a in 0..=3 {
            for b in 0..=3 {
                for c in 0..=3 {
                    if a + b + c == 3 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(enumerate_l(3, 3).count(), brute);
        assert_eq!(brute, 10);
    }

    #[test]
    fn q_examples() {
        assert_eq!(
            enumerate_q(&[0, 0, 0]).collect::<Vec<_>>(),
            vec![vec![0, 0, 0]]
        );
        assert_eq!(
            enumerate_q(&[1, 1]).collect::<Vec<_>>(),
            vec![vec![0, 2], vec![1, 1]]
        );
        assert_eq!(
            enumerate_q(&[2, 0]).collect::<Vec<_>>(),
            vec![vec![0, 2], vec![1, 1], vec![2, 0]]
        );
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_signature(&[0, 0, 0], 3, 3).unwrap().eta, vec![3]);
        assert_eq!(
            eta_signature(&[0, 0, 0, 0], 2, 4).unwrap().eta,
            vec![2, 1, 1]
        );
        assert_eq!(
            eta_signature(&[1, 0, 1, 0], 2, 4).unwrap().eta,
            vec![3, 2, 1]
        );
        assert!(eta_signature(&[0, 0], 3, 2).is_err());
    }

    #[test]
    fn pair_count_matches_brute_force() {
        for n in 1..=6 {
            for p in 0..=6u32 {
                if (p as usize + 1).pow(n as u32) > 20_000 {
                    continue;
                }
                let streamed: usize = enumerate_l(p, n).map(|l| enumerate_q(&l).count()).sum();
                assert_eq!(streamed, brute_force_pairs(p, n), "p={p} n={n}");
            }
        }
    }

    #[test]
    fn dp_matches_streams() {
        for n in 1..=5 {
            for k in 1..=n {
                let a = signature_weights(5, n, k).unwrap();
                let b = signature_weights_by_streams(5, n, k).unwrap();
                assert_eq!(a.len(), b.len(), "n={n} k={k}");
                for (x, y) in a.iter().zip(&b) {
                    assert_eq!((x.p, &x.eta), (y.p, &y.eta));
                    assert!(((x.weight - y.weight) / y.weight).abs() < 1e-12);
                }
                assert_eq!(a.len() as f64, signature_count(5, n, k));
            }
        }
    }

    #[test]
    fn weights_at_x_zero_sum_to_power() {
        // With every pole factor equal to one the inner sums collapse to N^p.
        for n in 1..=6 {
            for k in 1..=n {
                let w = signature_weights(6, n, k).unwrap();
                for p in 0..=6u32 {
                    let s: f64 = w.iter().filter(|x| x.p == p).map(|x| x.weight).sum();
                    let want = (n as f64).powi(p as i32);
                    assert!(((s - want) / want).abs() < 1e-12, "n={n} k={k} p={p}: {s}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn etas_sum_to_n_plus_p(n in 1usize..6, p in 0u32..5, kk in 0usize..6) {
            let k = 1 + kk % n;
            for l in enumerate_l(p, n) {
                for q in enumerate_q(&l) {
                    let e = eta_signature(&q, k, n).unwrap();
                    prop_assert_eq!(e.eta.iter().sum::<u32>(), n as u32 + p);
                    prop_assert!(e.eta[0] >= k as u32);
                    prop_assert_eq!(e.order(n), p);
                }
            }
        }

        #[test]
        fn multinomials_sum_to_power(n in 1usize..6, p in 0u32..7) {
            let s: f64 = enumerate_l(p, n)
                .map(|l| {
                    let parts: Vec<u64> = l.iter().map(|&x| x as u64).collect();
                    specfun::multinomial(p as u64, &parts).unwrap()
                })
                .sum();
            prop_assert_eq!(s, (n as f64).powi(p as i32));
        }

        #[test]
        fn q_streams_are_valid_and_unique(l in proptest::collection::vec(0u32..3, 1..5)) {
            let qs: Vec<Vec<u32>> = enumerate_q(&l).collect();
            let mut sorted = qs.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), qs.len());
            for q in &qs {
                prop_assert!(CompositionIndex::new(l.clone(), q.clone()).is_ok());
            }
        }
    }
}
