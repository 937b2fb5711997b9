//! ROUGE checked against brute-force oracles on small random token sequences.

use proptest::prelude::*;
use twinsim_core::metrics::{rouge_l, rouge_n};

/// Multiset intersection by repeated removal.
fn oracle_overlap(cand: &[&str], refr: &[&str], n: usize) -> (usize, usize, usize) {
    let grams = |t: &[&str]| -> Vec<String> {
        if t.len() < n {
            return vec![];
        }
        (0..=t.len() - n).map(|i| t[i..i + n].join(" ")).collect()
    };
    let c = grams(cand);
    let mut r = grams(refr);
    let mut overlap = 0;
    for g in &c {
        if let Some(pos) = r.iter().position(|x| x == g) {
            r.remove(pos);
            overlap += 1;
        }
    }
    (overlap, c.len(), grams(refr).len())
}

/// Longest common subsequence by enumerating every subsequence of `a`.
fn oracle_lcs(a: &[&str], b: &[&str]) -> usize {
    let is_subseq = |sub: &[&str]| {
        let mut it = b.iter();
        sub.iter().all(|s| it.any(|x| x == s))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&str> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
        if sub.len() > best && is_subseq(&sub) {
            best = sub.len();
        }
    }
    best
}

fn prf(overlap: usize, c: usize, r: usize) -> (f64, f64, f64) {
    if overlap == 0 || c == 0 || r == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = overlap as f64 / c as f64;
    let rc = overlap as f64 / r as f64;
    (p, rc, 2.0 * p * rc / (p + rc))
}

fn tokens() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rouge_n_matches_multiset_oracle(c in tokens(), r in tokens(), n in 1usize..=3) {
        let got = rouge_n(&c.join(" "), &r.join(" "), n);
        let (o, lc, lr) = oracle_overlap(&c, &r, n);
        let want = prf(o, lc, lr);
        prop_assert_eq!((got.precision, got.recall, got.f1), want);
    }

    #[test]
    fn rouge_l_matches_enumeration_oracle(c in tokens(), r in tokens()) {
        let got = rouge_l(&c.join(" "), &r.join(" "));
        let want = prf(oracle_lcs(&c, &r), c.len(), r.len());
        prop_assert_eq!((got.precision, got.recall, got.f1), want);
    }
}
