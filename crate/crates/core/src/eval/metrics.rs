use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// P, R and F1 from raw counts. An empty denominator gives 1 for P or R;
/// F1 is 0 when P + R is 0.
pub fn prf_from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Micro-averaged P/R/F1 over `(predicted, gold)` decisions.
pub fn micro_f1(decisions: impl IntoIterator<Item = (bool, bool)>) -> Prf {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pred, gold) in decisions {
        match (pred, gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    prf_from_counts(tp, fp, fn_)
}

/// 1-based rank of `target` when `scores` are sorted descending, skipping
/// `exclude`. Equal scores are ordered by index.
pub fn rank_of(scores: &[f64], target: usize, exclude: Option<usize>) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| {
            j != target && Some(j) != exclude && (s > t || (s == t && j < target))
        })
        .count()
}

/// Mean of `1/rank`; 0 for no ranks.
pub fn mean_reciprocal_rank(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64
}
