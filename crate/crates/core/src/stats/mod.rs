//! Hypothesis tests and effect sizes shared by every analysis table.

pub mod dist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which effect-size family a [`StatResult`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectKind {
    /// Standardized mean difference with pooled standard deviation.
    CohensD,
    /// Arcsine-transformed difference of two proportions.
    CohensH,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// H1: first group's parameter exceeds the second's.
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub df: Option<f64>,
    pub p_value: f64,
    /// Mean difference (t-test) or `p1 - p2` (proportion test).
    pub estimate: f64,
    /// Absolute effect size.
    pub effect_size: f64,
    pub effect_kind: EffectKind,
    pub alternative: Alternative,
    pub alpha_adjusted: f64,
}

impl StatResult {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_adjusted = alpha;
        self
    }

    pub fn significant(&self) -> bool {
        self.p_value < self.alpha_adjusted
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n - 1) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample standard deviation, `None` below two observations.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    (xs.len() >= 2).then(|| sample_variance(xs).sqrt())
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{name} needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg(format!("{name} contains non-finite values")));
    }
    Ok(())
}

fn tail_p_t(t: f64, df: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::TwoSided => dist::student_t_two_sided(t, df),
        Alternative::Greater => dist::student_t_sf(t, df),
        Alternative::Less => dist::student_t_sf(-t, df),
    }
}

fn tail_p_normal(z: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::TwoSided => (2.0 * dist::normal_sf(z.abs())).min(1.0),
        Alternative::Greater => dist::normal_sf(z),
        Alternative::Less => dist::normal_sf(-z),
    }
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<StatResult> {
    welch_t_test_with(a, b, Alternative::TwoSided)
}

pub fn welch_t_test_with(a: &[f64], b: &[f64], alt: Alternative) -> Result<StatResult> {
    check_sample("sample a", a)?;
    check_sample("sample b", b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (m1, m2) = (mean(a), mean(b));
    let (v1, v2) = (sample_variance(a), sample_variance(b));
    let (q1, q2) = (v1 / n1, v2 / n2);
    let se2 = q1 + q2;
    if se2 <= 0.0 {
        return Err(Error::Degenerate(
            "both samples have zero variance".to_string(),
        ));
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    Ok(StatResult {
        statistic: t,
        df: Some(df),
        p_value: tail_p_t(t, df, alt),
        estimate: m1 - m2,
        effect_size: cohens_d(a, b)?,
        effect_kind: EffectKind::CohensD,
        alternative: alt,
        alpha_adjusted: DEFAULT_ALPHA,
    })
}

/// Cohen's d with the pooled standard deviation; absolute value.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample("sample a", a)?;
    check_sample("sample b", b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled = (((n1 - 1.0) * sample_variance(a) + (n2 - 1.0) * sample_variance(b))
        / (n1 + n2 - 2.0))
        .sqrt();
    let diff = mean(a) - mean(b);
    if pooled == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate("zero pooled variance".to_string()));
    }
    Ok((diff / pooled).abs())
}

/// Signed Cohen's h, `2 asin(sqrt(p1)) - 2 asin(sqrt(p2))`.
pub fn cohens_h_signed(p1: f64, p2: f64) -> f64 {
    2.0 * p1.sqrt().asin() - 2.0 * p2.sqrt().asin()
}

/// Pooled two-proportion z-test of `x1/n1` against `x2/n2`, two-sided.
pub fn two_prop_z_test(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<StatResult> {
    two_prop_z_test_with(x1, n1, x2, n2, Alternative::TwoSided)
}

pub fn two_prop_z_test_with(
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
    alt: Alternative,
) -> Result<StatResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::arg("group sizes must be at least 1"));
    }
    if x1 > n1 || x2 > n2 {
        return Err(Error::arg(format!(
            "successes exceed trials ({x1}/{n1}, {x2}/{n2})"
        )));
    }
    let (x1f, n1f, x2f, n2f) = (x1 as f64, n1 as f64, x2 as f64, n2 as f64);
    let p1 = x1f / n1f;
    let p2 = x2f / n2f;
    let pooled = (x1f + x2f) / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(Error::Degenerate(format!(
            "pooled proportion is {pooled}; the test is undefined"
        )));
    }
    let z = (p1 - p2) / (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    Ok(StatResult {
        statistic: z,
        df: None,
        p_value: tail_p_normal(z, alt),
        estimate: p1 - p2,
        effect_size: cohens_h_signed(p1, p2).abs(),
        effect_kind: EffectKind::CohensH,
        alternative: alt,
        alpha_adjusted: DEFAULT_ALPHA,
    })
}

/// Bonferroni-adjusted significance threshold.
pub fn bonferroni(alpha: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::arg("number of hypotheses must be at least 1"));
    }
    Ok(alpha / f64::from(m))
}

/// Three-decimal display used for significance thresholds.
pub fn format_alpha(alpha: f64) -> String {
    format!("{alpha:.3}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.effect_size, 0.0);
        assert_eq!(r.effect_kind, EffectKind::CohensD);
    }

    #[test]
    fn welch_shifted_by_one() {
        // Oracle values from mpmath at 50 digits (see tests/oracle).
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!(close(r.statistic, -1.0, 1e-12));
        assert!(close(r.df.unwrap(), 8.0, 1e-12));
        assert!(close(r.p_value, 0.346_593_507_087_334_2, 1e-12));
        assert!(close(r.estimate, -1.0, 1e-12));
        assert!(close(r.effect_size, 0.632_455_532_033_675_9, 1e-12));
    }

    #[test]
    fn welch_rejects_degenerate() {
        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            welch_t_test(&[2.0, 2.0], &[3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn welch_one_sided_halves_two_sided() {
        let a = [3.0, 4.0, 5.0, 6.0, 9.0];
        let b = [1.0, 2.0, 2.5, 4.0];
        let two = welch_t_test(&a, &b).unwrap();
        let greater = welch_t_test_with(&a, &b, Alternative::Greater).unwrap();
        let less = welch_t_test_with(&a, &b, Alternative::Less).unwrap();
        assert!(close(greater.p_value, two.p_value / 2.0, 1e-15));
        assert!(close(less.p_value, 1.0 - two.p_value / 2.0, 1e-15));
    }

    #[test]
    fn cohens_d_definitional() {
        // Means 0 and 1, both with sample variance 1.
        let a = [-1.0, 0.0, 1.0];
        let b = [0.0, 1.0, 2.0];
        assert!(close(cohens_d(&a, &b).unwrap(), 1.0, 1e-15));
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
        assert!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn proportion_test_reproduces_reference_overall_gender_column() {
        let r = two_prop_z_test(27_331, 95_906, 390, 1_036).unwrap();
        assert!(close(r.statistic.abs(), 6.48, 0.01));
        assert!(close(r.estimate, -0.09, 0.005));
        assert!(close(r.effect_size, 0.19, 0.005));
        assert_eq!(r.effect_kind, EffectKind::CohensH);
    }

    #[test]
    fn proportion_test_reproduces_reference_cross_gender_column() {
        let r = two_prop_z_test(1_353, 26_240, 295, 390).unwrap();
        assert!(close(r.statistic.abs(), 57.35, 0.05));
        assert!(close(r.estimate, -0.70, 0.005));
        assert!(close(r.effect_size, 1.65, 0.01));
        assert!(r.p_value < 1e-100);
    }

    #[test]
    fn proportion_test_equal_proportions() {
        let r = two_prop_z_test(10, 40, 5, 20).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.effect_size, 0.0);
    }

    #[test]
    fn proportion_test_errors() {
        assert!(matches!(
            two_prop_z_test(0, 10, 0, 5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            two_prop_z_test(10, 10, 5, 5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            two_prop_z_test(11, 10, 5, 5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(two_prop_z_test(0, 0, 1, 5).is_err());
    }

    #[test]
    fn bonferroni_values() {
        assert_eq!(format_alpha(bonferroni(0.05, 3).unwrap()), "0.017");
        assert!(close(bonferroni(0.05, 3).unwrap(), 0.016_666_666_666_666_666, 1e-18));
        assert_eq!(bonferroni(0.05, 1).unwrap(), 0.05);
        assert_eq!(bonferroni(0.01, 4).unwrap(), 0.0025);
        assert!(bonferroni(0.05, 0).is_err());
    }

    #[test]
    fn cohens_h_flip_successes_and_failures() {
        let h = cohens_h_signed(0.3, 0.55);
        let flipped = cohens_h_signed(0.7, 0.45);
        assert!(close(h, -flipped, 1e-14));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn significance_uses_adjusted_alpha() {
        let r = two_prop_z_test(30, 100, 45, 100)
            .unwrap()
            .with_alpha(bonferroni(0.05, 3).unwrap());
        assert!(r.p_value > 0.017 && r.p_value < 0.05);
        assert!(!r.significant());
    }
}
