//! Agreement and significance statistics for human judgments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid ratings: {0}")]
    InvalidRatings(String),
    #[error("kappa is undefined: expected agreement is 1")]
    UndefinedKappa,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("differences have zero variance but nonzero mean")]
    DegenerateVariance,
    #[error("predictor is constant")]
    ConstantPredictor,
    #[error("non-finite input value")]
    NonFinite,
}

/// Two raters' judgments on a shared ordinal scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRatings {
    pub scale_min: i64,
    pub scale_max: i64,
    pub pairs: Vec<(i64, i64)>,
}

impl PairedRatings {
    pub fn new(scale_min: i64, scale_max: i64, pairs: Vec<(i64, i64)>) -> Result<Self, StatsError> {
        if scale_max <= scale_min {
            return Err(StatsError::InvalidRatings(format!("scale [{scale_min}, {scale_max}] has fewer than 2 points")));
        }
        if pairs.is_empty() {
            return Err(StatsError::InvalidRatings("no rating pairs".into()));
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| {
            !(scale_min..=scale_max).contains(a) || !(scale_min..=scale_max).contains(b)
        }) {
            return Err(StatsError::InvalidRatings(format!("pair ({a}, {b}) outside [{scale_min}, {scale_max}]")));
        }
        Ok(PairedRatings { scale_min, scale_max, pairs })
    }
}

/// Linearly weighted Cohen's kappa with agreement weights
/// `w(i, j) = 1 - |i - j| / (k - 1)`.
pub fn weighted_kappa(ratings: &PairedRatings) -> Result<f64, StatsError> {
    let r = PairedRatings::new(ratings.scale_min, ratings.scale_max, ratings.pairs.clone())?;
    let k = (r.scale_max - r.scale_min + 1) as usize;
    let n = r.pairs.len() as f64;
    // integer counts keep perfect agreement exactly at p_o = 1
    let mut table = vec![vec![0u64; k]; k];
    for &(a, b) in &r.pairs {
        table[(a - r.scale_min) as usize][(b - r.scale_min) as usize] += 1;
    }
    let weight = |i: usize, j: usize| 1.0 - i.abs_diff(j) as f64 / (k - 1) as f64;
    let row: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            observed += weight(i, j) * table[i][j] as f64;
            expected += weight(i, j) * (row[i] * col[j]) as f64;
        }
    }
    let p_o = observed / n;
    let p_e = expected / (n * n);
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(StatsError::UndefinedKappa);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_difference: f64,
}

/// Two-sided paired t-test on `x - y`.
pub fn paired_ttest(x: &[f64], y: &[f64]) -> Result<TTestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let df = d.len() - 1;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTestResult { t: 0.0, p_value: 1.0, df, mean_difference: 0.0 });
        }
        return Err(StatsError::DegenerateVariance);
    }
    let t = mean / (var.sqrt() / n.sqrt());
    Ok(TTestResult { t, p_value: student_t_two_sided_p(t, df as f64), df, mean_difference: mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci_low: f64,
    pub slope_ci_high: f64,
    pub slope_std_error: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Simple least-squares regression of `ys` on `xs` with an intercept.
pub fn ols_regress(xs: &[f64], ys: &[f64]) -> Result<RegressionResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::ConstantPredictor);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = n - 2.0;
    let se = (sse / df / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 0.0 };
    let (p_value, half_width) = if se > 0.0 {
        (student_t_two_sided_p(slope / se, df), student_t_critical(0.05, df) * se)
    } else if slope == 0.0 {
        (1.0, 0.0)
    } else {
        (0.0, 0.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_ci_low: slope - half_width,
        slope_ci_high: slope + half_width,
        slope_std_error: se,
        p_value,
        r_squared,
        n: xs.len(),
    })
}

// ---------------------------------------------------------------------------
// Student-t distribution

/// `P(|T| >= |t|)` for `T ~ t(df)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// The `t` with two-sided tail probability `alpha`, by bisection.
pub fn student_t_critical(alpha: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while student_t_two_sided_p(hi, df) > alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_sided_p(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `ln Γ(x)` for `x > 0`, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via the continued fraction of the incomplete beta function,
/// evaluated with the modified Lentz method to relative tolerance 1e-15.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // the fraction converges fast for x < (a + 1) / (a + b + 2)
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn ratings(lo: i64, hi: i64, pairs: &[(i64, i64)]) -> PairedRatings {
        PairedRatings::new(lo, hi, pairs.to_vec()).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(weighted_kappa(&ratings(1, 5, &[(1, 1), (3, 3), (5, 5), (2, 2)])).unwrap(), 1.0);
        let k = weighted_kappa(&ratings(1, 3, &[(1, 2), (2, 1)])).unwrap();
        assert!((k + 1.0).abs() < 1e-12, "{k}");
        assert_eq!(weighted_kappa(&ratings(1, 3, &[(2, 2), (2, 2)])), Err(StatsError::UndefinedKappa));
        assert!(PairedRatings::new(1, 3, vec![(0, 1)]).is_err());
        assert!(PairedRatings::new(1, 3, vec![]).is_err());
        assert!(PairedRatings::new(2, 2, vec![(2, 2)]).is_err());
    }

    #[test]
    fn kappa_hand_computed_table() {
        // 1-3 scale, pairs (1,1) (1,2) (2,2) (3,2); w = [[1,.5,0],[.5,1,.5],[0,.5,1]]
        // p_o = (1 + .5 + 1 + .5) / 4 = .75
        // row = (.5, .25, .25), col = (.25, .75, 0)
        // p_e = .5(.25 + .375) + .25(.125 + .75) + .25(0 + .375) = .625
        let k = weighted_kappa(&ratings(1, 3, &[(1, 1), (1, 2), (2, 2), (3, 2)])).unwrap();
        assert!((k - (0.75 - 0.625) / 0.375).abs() < 1e-12);
    }

    #[test]
    fn ttest_examples() {
        let r = paired_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p_value), (0.0, 1.0));
        let r = paired_ttest(&[2.0, 4.0, 6.0], &[1.0, 3.0, 8.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(paired_ttest(&[2.0, 3.0], &[1.0, 2.0]), Err(StatsError::DegenerateVariance));
        assert_eq!(paired_ttest(&[1.0], &[1.0]), Err(StatsError::TooFew { needed: 2, got: 1 }));
        assert_eq!(paired_ttest(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
    }

    #[test]
    fn ttest_against_hand_arithmetic() {
        // d = (1, 2, 3, 4): mean 2.5, sd sqrt(5/3), t = 2.5 / (sd / 2)
        let r = paired_ttest(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = 2.5 / ((5.0f64 / 3.0).sqrt() / 2.0);
        assert!((r.t - t).abs() < 1e-12);
        let oracle = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 3.0).unwrap().cdf(t));
        assert!((r.p_value - oracle).abs() < 1e-10);
    }

    #[test]
    fn t_distribution_matches_statrs() {
        for df in [1.0, 2.0, 3.0, 5.0, 10.0, 29.0, 100.0, 1000.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [-8.0, -2.5, -1.0, -0.1, 0.0, 0.3, 1.0, 1.96, 4.0, 12.0] {
                let ours = student_t_cdf(t, df);
                let theirs = dist.cdf(t);
                assert!((ours - theirs).abs() < 1e-10, "df {df} t {t}: {ours} vs {theirs}");
            }
            let crit = student_t_critical(0.05, df);
            assert!((crit - dist.inverse_cdf(0.975)).abs() < 1e-8, "df {df}");
        }
    }

    #[test]
    fn ols_examples() {
        let r = ols_regress(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-15 && r.intercept.abs() < 1e-15);
        assert_eq!(r.r_squared, 1.0);
        let r = ols_regress(&[0.0, 1.0, 2.0, 5.0], &[3.0, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!((r.slope, r.p_value, r.r_squared), (0.0, 1.0, 0.0));
        assert_eq!(ols_regress(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ConstantPredictor));
        assert_eq!(ols_regress(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFew { needed: 3, got: 2 }));
    }

    /// Solves the 2x2 normal equations X'X b = X'y by Cramer's rule.
    fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    }

    proptest! {
        #[test]
        fn ols_matches_normal_equations(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 50),
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let r = ols_regress(&xs, &ys).unwrap();
            let (slope, intercept) = normal_equations(&xs, &ys);
            prop_assert!((r.slope - slope).abs() < 1e-9);
            prop_assert!((r.intercept - intercept).abs() < 1e-9);
            prop_assert!(r.slope_ci_low <= r.slope && r.slope <= r.slope_ci_high);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert!((0.0..=1.0).contains(&r.r_squared));
            let outside = r.slope_ci_low > 0.0 || r.slope_ci_high < 0.0;
            if (r.p_value - 0.05).abs() > 1e-9 {
                prop_assert_eq!(r.p_value < 0.05, outside);
            }
        }

        #[test]
        fn ttest_antisymmetric(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = paired_ttest(&x, &y).unwrap();
            let b = paired_ttest(&y, &x).unwrap();
            prop_assert!((a.t + b.t).abs() <= 1e-12 * a.t.abs().max(1.0));
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        }

        #[test]
        fn kappa_shift_invariant(
            pairs in proptest::collection::vec((1i64..=5, 1i64..=5), 1..30),
            shift in -10i64..10,
        ) {
            let base = PairedRatings::new(1, 5, pairs.clone()).unwrap();
            let moved = PairedRatings::new(1 + shift, 5 + shift, pairs.iter().map(|(a, b)| (a + shift, b + shift)).collect()).unwrap();
            match (weighted_kappa(&base), weighted_kappa(&moved)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }
}
