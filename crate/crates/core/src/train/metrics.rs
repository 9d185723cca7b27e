//! Corpus metrics over token sequences. Every score is on a 0..=100 scale.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::edit::lcs_len;

/// Add-one smoothing applies to n-gram orders above this one.
pub const BLEU_SMOOTHING_FROM_ORDER: usize = 2;
pub const ROUGE_L_BETA: f64 = 1.2;

pub fn exact_match<S: AsRef<str>>(pred: &[S], gold: &[S]) -> f64 {
    let same =
        pred.len() == gold.len() && pred.iter().zip(gold).all(|(p, g)| p.as_ref() == g.as_ref());
    if same {
        100.0
    } else {
        0.0
    }
}

fn ngrams<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped overlap: each candidate n-gram matches at most as often as it
/// occurs in the reference.
fn clipped<T: Hash + Eq>(cand: &HashMap<&[T], usize>, reference: &HashMap<&[T], usize>) -> usize {
    cand.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Corpus BLEU up to order `max_n` with uniform weights, brevity penalty and
/// add-one smoothing on orders 2 and above.
pub fn bleu<T: Hash + Eq>(pairs: &[(&[T], &[T])], max_n: usize) -> f64 {
    if max_n == 0 {
        return 0.0;
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (pred, gold) in pairs {
        cand_len += pred.len();
        ref_len += gold.len();
        for n in 1..=max_n {
            let c = ngrams(pred, n);
            matched[n - 1] += clipped(&c, &ngrams(gold, n));
            total[n - 1] += pred.len().saturating_sub(n - 1);
        }
    }
    if cand_len == 0 || matched[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, t) = (matched[n - 1] as f64, total[n - 1] as f64);
        let p = if n >= BLEU_SMOOTHING_FROM_ORDER {
            (m + 1.0) / (t + 1.0)
        } else {
            m / t
        };
        log_sum += p.ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

/// Sentence ROUGE-n recall. A gold sequence too short to have any n-gram
/// scores 100 when the prediction equals it and 0 otherwise.
pub fn rouge_n<T: Hash + Eq>(pred: &[T], gold: &[T], n: usize) -> f64 {
    let g = ngrams(gold, n);
    let total: usize = g.values().sum();
    if total == 0 {
        return if pred == gold { 100.0 } else { 0.0 };
    }
    100.0 * clipped(&ngrams(pred, n), &g) as f64 / total as f64
}

/// Sentence ROUGE-L: LCS-based F-measure weighted toward recall by
/// [`ROUGE_L_BETA`].
pub fn rouge_l<T: PartialEq>(pred: &[T], gold: &[T]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 100.0;
    }
    let l = lcs_len(pred, gold) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, r) = (l / pred.len() as f64, l / gold.len() as f64);
    let b2 = ROUGE_L_BETA * ROUGE_L_BETA;
    100.0 * (1.0 + b2) * p * r / (r + b2 * p)
}

/// Precision, recall and F for one n-gram order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

impl Prf {
    fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| {
            if b == 0 {
                0.0
            } else {
                100.0 * a as f64 / b as f64
            }
        };
        let (p, r) = (ratio(matched, predicted), ratio(matched, gold));
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        Self { p, r, f }
    }
}

/// Micro-aggregated restoration counts for one n-gram order.
///
/// Restored tokens are the multiset difference `gold - x`. An n-gram counts
/// when it contains a token whose surface is restored; precision and recall
/// compare the counting n-grams of the prediction and the gold rewrite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RestorationCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl RestorationCounts {
    pub fn add<S: AsRef<str>>(&mut self, pred: &[S], gold: &[S], x: &[S], n: usize) {
        let pred: Vec<&str> = pred.iter().map(|s| s.as_ref()).collect();
        let gold: Vec<&str> = gold.iter().map(|s| s.as_ref()).collect();
        let mut remaining: HashMap<&str, isize> = HashMap::new();
        for &t in &gold {
            *remaining.entry(t).or_insert(0) += 1;
        }
        for t in x {
            if let Some(c) = remaining.get_mut(t.as_ref()) {
                *c -= 1;
            }
        }
        let restored = |g: &[&str]| g.iter().any(|t| remaining.get(t).is_some_and(|&c| c > 0));
        let mut p = ngrams(&pred, n);
        p.retain(|g, _| restored(g));
        let mut g = ngrams(&gold, n);
        g.retain(|gram, _| restored(gram));
        self.matched += clipped(&p, &g);
        self.predicted += p.values().sum::<usize>();
        self.gold += g.values().sum::<usize>();
    }

    pub fn score(&self) -> Prf {
        Prf::from_counts(self.matched, self.predicted, self.gold)
    }
}

pub fn restoration_score<S: AsRef<str>>(pred: &[S], gold: &[S], x: &[S], n: usize) -> Prf {
    let mut counts = RestorationCounts::default();
    counts.add(pred, gold, x, n);
    counts.score()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chars(s: &str) -> Vec<String> {
        s.chars().map(String::from).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 0.05
    }

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match(&chars("你好"), &chars("你好")), 100.0);
        assert_eq!(exact_match(&chars("你好"), &chars("你们")), 0.0);
    }

    #[test]
    fn bleu_brevity_case() {
        let (p, g) = (chars("为什么会"), chars("为什么会这样"));
        let bp = (1.0f64 - 6.0 / 4.0).exp();
        assert!(close(bleu(&[(&p, &g)], 1), 100.0 * bp));
        assert!(close(bleu(&[(&p, &g)], 1), 60.65));
        assert!(close(bleu(&[(&g, &g)], 4), 100.0));
        assert_eq!(bleu(&[(&chars("甲乙"), &chars("丙丁"))], 4), 0.0);
    }

    #[test]
    fn bleu_smoothing_by_hand() {
        // 1-grams 3/4, 2-grams 1/3 -> (1+1)/(3+1)
        let (p, g) = (chars("abcx"), chars("abdc"));
        let expect = 100.0 * (0.75f64 * 0.5).sqrt();
        assert!((bleu(&[(&p, &g)], 2) - expect).abs() < 1e-9);
    }

    #[test]
    fn rouge_cases() {
        let (p, g) = (chars("为什么会"), chars("为什么会这样"));
        assert!(close(rouge_n(&p, &g, 1), 66.7));
        assert!((rouge_n(&p, &g, 2) - 60.0).abs() < 1e-9);
        // P = 1, R = 4/6
        let (pp, rr) = (1.0, 4.0 / 6.0);
        let b2 = 1.44;
        let expect = 100.0 * (1.0 + b2) * pp * rr / (rr + b2 * pp);
        assert!((rouge_l(&p, &g) - expect).abs() < 1e-9);
        for n in 1..=2 {
            assert_eq!(rouge_n(&g, &g, n), 100.0);
        }
        assert_eq!(rouge_n(&chars("好"), &chars("好"), 2), 100.0);
        assert_eq!(rouge_l(&g, &g), 100.0);
    }

    #[test]
    fn restoration_weather_dialogue() {
        let gold = chars("深圳的气候为什么会十分潮湿");
        let x = chars("为什么会这样");
        let pred = chars("为什么会十分潮湿");
        let s = restoration_score(&pred, &gold, &x, 1);
        assert!(close(s.r, 100.0 * 4.0 / 9.0));
        assert_eq!(s.p, 100.0);
        for n in 1..=3 {
            let perfect = restoration_score(&gold, &gold, &x, n);
            assert_eq!((perfect.p, perfect.r, perfect.f), (100.0, 100.0, 100.0));
        }
    }

    #[test]
    fn restoration_nothing_restored() {
        let x = chars("原样");
        for n in 1..=3 {
            let s = restoration_score(&x, &x, &x, n);
            assert_eq!((s.p, s.r, s.f), (0.0, 0.0, 0.0));
        }
    }

    proptest! {
        #[test]
        fn identical_scores_full(s in "[a-e]{1,12}") {
            let t = chars(&s);
            prop_assert_eq!(exact_match(&t, &t), 100.0);
            for n in [1, 2, 4] {
                prop_assert!((bleu(&[(&t, &t)], n) - 100.0).abs() < 1e-9);
            }
            for n in [1, 2] {
                prop_assert_eq!(rouge_n(&t, &t, n), 100.0);
            }
            prop_assert!((rouge_l(&t, &t) - 100.0).abs() < 1e-9);
        }

        #[test]
        fn scores_in_range(a in "[a-e]{0,10}", b in "[a-e]{1,10}", x in "[a-e]{1,6}", n in 1usize..4) {
            let (p, g, x) = (chars(&a), chars(&b), chars(&x));
            let all = [bleu(&[(&p, &g)], n), rouge_n(&p, &g, n), rouge_l(&p, &g)];
            for v in all {
                prop_assert!((0.0..=100.0 + 1e-9).contains(&v));
            }
            let s = restoration_score(&p, &g, &x, n);
            for v in [s.p, s.r, s.f] {
                prop_assert!((0.0..=100.0 + 1e-9).contains(&v));
            }
            let harmonic = if s.p + s.r == 0.0 { 0.0 } else { 2.0 * s.p * s.r / (s.p + s.r) };
            prop_assert!((s.f - harmonic).abs() < 1e-9);
        }
    }
}
