//! Expected search counts and the greedy indicators built on them.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::predictor::{Evidence, Predictor, RankedPrediction, Row};
use crate::{MomentId, Unit};

/// Expected or estimated number of searches.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CostEstimate(pub f64);

impl CostEstimate {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `Σ j × p'_j` over ranked positions `j = 1..|L|`.
pub fn expected_searches(r: &RankedPrediction) -> CostEstimate {
    CostEstimate(
        r.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum(),
    )
}

/// Estimated searches at `end` after the object has been found at
/// `mid_moment`, averaged over where it is likely to be found:
/// `Σ_j p(l_j at mid) × en(prediction at end given start and (l_j, mid))`.
pub fn estimate_second_stage(
    predictor: &Predictor,
    start: Unit,
    mid_moment: MomentId,
    end_moment: MomentId,
) -> Result<CostEstimate> {
    if !(start.moment < mid_moment && mid_moment < end_moment) {
        return Err(Error::MomentOrder(format!(
            "need {start} < t{mid_moment} < t{end_moment}"
        )));
    }
    let mid = predictor.row_from(start, mid_moment)?;
    let weights: Box<dyn Iterator<Item = (u32, f64)>> = if mid.is_uniform() {
        let p = 1.0 / mid.n_locations() as f64;
        Box::new((0..mid.n_locations() as u32).map(move |l| (l, p)))
    } else {
        let total = mid.total() as f64;
        Box::new(mid.support().iter().map(move |&(l, c)| (l, c as f64 / total)))
    };
    let mut sum = 0.0;
    for (l, p) in weights {
        let ev = Evidence::new(vec![start, Unit::new(l, mid_moment)])?;
        sum += p * predictor.row(&ev, end_moment)?.expected_searches();
    }
    Ok(CostEstimate(sum))
}

fn span(t_k: MomentId, t_cur: MomentId) -> Result<u64> {
    if t_k <= t_cur {
        return Err(Error::MomentOrder(format!(
            "indicator moment t{t_k} must follow t{t_cur}"
        )));
    }
    Ok((t_k - t_cur) as u64)
}

/// Expected searches per moment of timespan.
pub fn moment_indicator(r: &RankedPrediction, t_k: MomentId, t_cur: MomentId) -> Result<f64> {
    Ok(expected_searches(r).0 / span(t_k, t_cur)? as f64)
}

/// `(1 / p) / (t_k − t_cur)`; `p = 0` gives `+∞`.
pub fn unit_indicator(p: f64, t_k: MomentId, t_cur: MomentId) -> Result<f64> {
    let span = span(t_k, t_cur)? as f64;
    if p <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / p / span)
}

/// A non-negative fraction compared exactly; a zero denominator is `+∞`.
#[derive(Debug, Clone, Copy)]
pub struct Fraction {
    num: u128,
    den: u128,
}

impl Fraction {
    pub const INFINITY: Fraction = Fraction { num: 1, den: 0 };

    pub fn new(num: u64, den: u64) -> Self {
        Fraction {
            num: num as u128,
            den: den as u128,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.den == 0
    }

    pub fn to_f64(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Moment indicator of a row, exactly.
    pub fn moment_indicator(row: &Row, t_k: MomentId, t_cur: MomentId) -> Result<Self> {
        let span = span(t_k, t_cur)?;
        let (n, d) = row.expected_searches_ratio();
        Ok(Fraction {
            num: n as u128,
            den: d as u128 * span as u128,
        })
    }

    /// Unit indicator for `p = p_num / p_den`, exactly.
    pub fn unit_indicator(p_num: u64, p_den: u64, t_k: MomentId, t_cur: MomentId) -> Result<Self> {
        let span = span(t_k, t_cur)?;
        if p_num == 0 {
            return Ok(Fraction::INFINITY);
        }
        Ok(Fraction {
            num: p_den as u128,
            den: p_num as u128 * span as u128,
        })
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => (self.num * other.den).cmp(&(other.num * self.den)),
        }
    }
}
