//! Small statistics kit: nearest-rank percentiles, moments, average ranks,
//! Spearman correlation and top-k list overlap.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Nearest-rank percentile of an ascending slice: the `ceil(p * n)`-th order
/// statistic (1-based), with `p = 0` mapping to the minimum.
pub fn nearest_rank_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("percentile", format!("{p} is outside [0, 1]")));
    }
    // The small slack keeps p*n that is integral in exact arithmetic from
    // rounding up past it (0.95 * 100 = 95.00000000000001).
    let rank = libm::ceil(p * sorted.len() as f64 - 1e-9).max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    nearest_rank_sorted(&v, p)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

/// 1-based ranks in ascending value order, tied values sharing the mean of
/// the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0)
}

/// Spearman rank correlation of paired samples, average-rank ties.
///
/// When either side is constant the correlation is undefined; this returns
/// 1 if both rank vectors coincide and 0 otherwise.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Mismatch(format!("spearman inputs have lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Empty("spearman input"));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// `|top_k(a) ∩ top_k(b)|` for two orderings of the same universe.
pub fn topk_overlap<T: Ord>(a: &[T], b: &[T], k: usize) -> Result<usize> {
    let ua: BTreeSet<&T> = a.iter().collect();
    let ub: BTreeSet<&T> = b.iter().collect();
    if ua.len() != a.len() || ub.len() != b.len() {
        return Err(Error::Mismatch("ranking contains repeated entries".into()));
    }
    if ua != ub {
        return Err(Error::Mismatch("rankings cover different universes".into()));
    }
    if k > a.len() {
        return Err(Error::invalid("k", format!("{k} exceeds universe size {}", a.len())));
    }
    let top_a: BTreeSet<&T> = a[..k].iter().collect();
    Ok(b[..k].iter().filter(|x| top_a.contains(x)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nearest_rank_on_hundredths() {
        let v: Vec<f64> = (1..=100).map(|i| 0.01 * i as f64).collect();
        assert_eq!(percentile(&v, 0.50).unwrap(), 0.50);
        assert_eq!(percentile(&v, 0.95).unwrap(), v[94]);
        assert_eq!(percentile(&v, 0.99).unwrap(), 0.99);
        assert_eq!(percentile(&[0.3], 0.99).unwrap(), 0.3);
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_constant_sides() {
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn overlap_rejects_foreign_universe() {
        assert!(topk_overlap(&[1, 2, 3], &[1, 2, 4], 2).is_err());
        assert!(topk_overlap(&[1, 2, 3], &[3, 2, 1], 4).is_err());
        assert_eq!(topk_overlap(&[1, 2, 3, 4], &[3, 4, 1, 2], 2).unwrap(), 0);
    }
}
