//! Small statistics toolbox: the normal CDF used by the Bayes oracle,
//! chi-square/t critical values, sign tests, and least-squares fits.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Complementary error function via the Chebyshev rational approximation
/// with fractional error below 1.2e-7 everywhere.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper critical value of the chi-squared distribution: P(X > value) = alpha.
pub fn chi_squared_critical(df: f64, alpha: f64) -> f64 {
    ChiSquared::new(df).expect("valid df").inverse_cdf(1.0 - alpha)
}

/// One-sided critical value of Student's t: P(T > value) = alpha.
pub fn t_critical(df: f64, alpha: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("valid df").inverse_cdf(1.0 - alpha)
}

/// One-sided sign test: probability of at least `wins` successes in `n`
/// fair coin flips. Ties must be dropped by the caller.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    assert!(wins <= n);
    let mut p = 0.0;
    for k in wins..=n {
        p += binomial_coeff(n, k);
    }
    p / 2f64.powi(n as i32)
}

fn binomial_coeff(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Ordinary least squares y = a + b·x. Returns (intercept, slope, t-statistic
/// of the slope against zero) with the usual n-2 residual degrees of freedom.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 3, "need at least 3 points for a slope t-test");
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let se = (ss_res / (n - 2.0) / sxx).sqrt();
    let t = slope / se;
    (intercept, slope, t)
}

/// Least squares through the origin, y = b·x. Returns (slope, uncentered R²).
pub fn linear_fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let sxy: f64 = x.iter().zip(y.iter()).map(|(&a, &b)| a * b).sum();
    let sxx: f64 = x.iter().map(|&v| v * v).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&a, &b)| {
            let r = b - slope * a;
            r * r
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|&v| v * v).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

/// Sample mean and standard deviation (N−1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Full-batch gradient-descent logistic regression, used as an independent
/// probe learner in dataset diagnostics. Returns `[bias, w_1, .., w_d]`.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[usize], iters: usize, lr: f64) -> Vec<f64> {
    assert_eq!(features.len(), labels.len());
    assert!(!features.is_empty());
    let d = features[0].len();
    let n = features.len() as f64;
    let mut w = vec![0.0; d + 1];
    for _ in 0..iters {
        let mut grad = vec![0.0; d + 1];
        for (f, &y) in features.iter().zip(labels.iter()) {
            let z = w[0] + f.iter().zip(w[1..].iter()).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y as f64;
            grad[0] += err;
            for (g, &v) in grad[1..].iter_mut().zip(f.iter()) {
                *g += err * v;
            }
        }
        for (wi, gi) in w.iter_mut().zip(grad.iter()) {
            *wi -= lr * gi / n;
        }
    }
    w
}

/// Rank-based AUC of `score` for separating label 1 from label 0, with the
/// midrank convention for tied scores.
pub fn auc(scores: &[f64], labels: &[usize]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    assert!(n_pos > 0.0 && n_neg > 0.0, "auc: need both classes present");
    (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_reference_points() {
        // handbook values, trusted to well beyond the approximation error
        assert!((erfc(0.0) - 1.0).abs() < 2e-7);
        assert!((erfc(1.0) - 0.157_299_207_050_285).abs() < 2e-7);
        assert!((erfc(-1.0) - 1.842_700_792_949_715).abs() < 2e-7);
        assert!((erfc(2.0) - 0.004_677_734_981_063_13).abs() < 2e-7);
    }

    #[test]
    fn normal_cdf_symmetry_and_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959_963_985) - 0.975).abs() < 1e-6);
        for x in [-2.5, -0.7, 0.3, 1.9] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_squared_critical_reference() {
        // df=19, alpha=0.01 -> 36.1909
        assert!((chi_squared_critical(19.0, 0.01) - 36.1909).abs() < 0.01);
    }

    #[test]
    fn t_critical_reference() {
        // df=18, one-sided alpha=0.01 -> 2.552
        assert!((t_critical(18.0, 0.01) - 2.552).abs() < 0.005);
    }

    #[test]
    fn sign_test_binomial_tail() {
        // 12 of 15 wins: (455+105+15+1)/2^15
        let p = sign_test_p(12, 15);
        assert!((p - 576.0 / 32768.0).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 5), 1.0);
    }

    #[test]
    fn linear_fits_recover_exact_lines() {
        let x: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 3.0 * v + 1.0).collect();
        let (a, b, t) = linear_fit(&x, &y);
        assert!((a - 1.0).abs() < 1e-9);
        assert!((b - 3.0).abs() < 1e-9);
        assert!(t > 1e6, "exact line should have enormous t, got {t}");

        let y0: Vec<f64> = x.iter().map(|&v| 2.5 * v).collect();
        let (slope, r2) = linear_fit_through_origin(&x, &y0);
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_perfect_and_reversed() {
        let scores = vec![0.1, 0.2, 0.8, 0.9];
        assert!((auc(&scores, &[0, 0, 1, 1]) - 1.0).abs() < 1e-12);
        assert!((auc(&scores, &[1, 1, 0, 0]) - 0.0).abs() < 1e-12);
        assert!((auc(&[0.5, 0.5, 0.5, 0.5], &[0, 1, 0, 1]) - 0.5).abs() < 1e-12);
    }
}
