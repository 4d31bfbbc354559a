use serde::{Deserialize, Serialize};

use super::{ConfigResult, DseError, Result};

/// Exponents of the weighted score `TSA^a / (RD^b * RWO^c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
        }
    }
}

/// `TSA / (RD * RWO)`.
pub fn weighted_score(tsa: f64, rd: u64, rwo: u64) -> Result<f64> {
    weighted_score_with(tsa, rd, rwo, ScoreWeights::default())
}

pub fn weighted_score_with(tsa: f64, rd: u64, rwo: u64, w: ScoreWeights) -> Result<f64> {
    if rd == 0 || rwo == 0 {
        return Err(DseError::ZeroCost { rd, rwo });
    }
    if w == ScoreWeights::default() {
        return Ok(tsa / (rd as f64 * rwo as f64));
    }
    Ok(tsa.powf(w.a) / ((rd as f64).powf(w.b) * (rwo as f64).powf(w.c)))
}

/// `(s - min) / (max - min)`; a list of equal scores maps to all ones.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|&s| if hi > lo { (s - lo) / (hi - lo) } else { 1.0 })
        .collect()
}

/// Descending normalized score, then smaller RD, smaller RWO and grid order.
pub fn rank(results: &[ConfigResult]) -> Vec<ConfigResult> {
    let mut out = results.to_vec();
    out.sort_by(|x, y| {
        y.normalized_score
            .total_cmp(&x.normalized_score)
            .then(x.rd.cmp(&y.rd))
            .then(x.rwo.cmp(&y.rwo))
            .then(x.index.cmp(&y.index))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::SearchSpace;
    use crate::Scheme;
    use proptest::prelude::*;
    use std::cmp::Ordering;

    /// Index of the largest value; the first one wins ties.
    fn argmax(values: &[f64]) -> Option<usize> {
        values
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }

    #[test]
    fn score_examples() {
        assert_eq!(weighted_score(0.0, 10, 10).unwrap(), 0.0);
        let s = weighted_score(0.9, 1000, 7).unwrap();
        assert_eq!(weighted_score(0.9, 500, 7).unwrap(), 2.0 * s);
        assert!(matches!(
            weighted_score(0.9, 0, 7),
            Err(DseError::ZeroCost { .. })
        ));
        assert!(matches!(
            weighted_score(0.9, 7, 0),
            Err(DseError::ZeroCost { .. })
        ));
        let w = ScoreWeights {
            a: 2.0,
            b: 1.0,
            c: 0.0,
        };
        assert!((weighted_score_with(0.5, 4, 99, w).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(min_max_normalize(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[7.0]), vec![1.0]);
        assert_eq!(min_max_normalize(&[3.0, 3.0]), vec![1.0, 1.0]);
        assert!(min_max_normalize(&[]).is_empty());
    }

    fn result(index: usize, score: f64, rd: u64, rwo: u64) -> ConfigResult {
        ConfigResult {
            index,
            point: SearchSpace::single("n", Scheme::DenseKernel, 64, 8).points()[0].clone(),
            tsa: 0.5,
            rd,
            rwo,
            tiles: 1,
            raw_score: score,
            normalized_score: score,
            seed: 0,
        }
    }

    #[test]
    fn rank_tie_rules() {
        let rs = vec![
            result(0, 0.5, 10, 5),
            result(1, 0.9, 10, 5),
            result(2, 0.5, 8, 5),
            result(3, 0.5, 8, 4),
            result(4, 0.5, 8, 4),
        ];
        let order: Vec<usize> = rank(&rs).iter().map(|r| r.index).collect();
        assert_eq!(order, vec![1, 3, 4, 2, 0]);
    }

    proptest! {
        #[test]
        fn normalization_keeps_argmax_and_bounds(v in prop::collection::vec(0.0f64..1e3, 1..40)) {
            let n = min_max_normalize(&v);
            prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let top = argmax(&v).unwrap();
            prop_assert_eq!(v[top], hi);
            prop_assert_eq!(n[top], 1.0);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(n[i] <= n[j]);
                    }
                }
            }
        }
    }
}
