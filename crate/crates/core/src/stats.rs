//! Two-sample comparison statistics for run metrics.
//!
//! Unequal-variance t-test with Welch–Satterthwaite degrees of freedom;
//! two-sided p-values come from the regularized incomplete beta function,
//! evaluated with a Lentz continued fraction so no statistics crate is
//! needed at runtime.

/// Result of an unequal-variance two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Compares two samples without assuming equal variances.
///
/// Each sample needs at least two values. Two degenerate zero-variance
/// samples compare as p = 1 when their means agree and p = 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> crate::Result<WelchTest> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return Err(crate::Error::Stats(format!(
            "each sample needs at least 2 values (got {n1} and {n2})"
        )));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], m: f64| {
        s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64
    };
    let (m1, m2) = (mean(a), mean(b));
    let (v1, v2) = (var(a, m1), var(b, m2));
    let se1 = v1 / n1 as f64;
    let se2 = v2 / n2 as f64;
    let se = se1 + se2;

    if se == 0.0 {
        return Ok(if m1 == m2 {
            WelchTest { t: 0.0, dof: (n1 + n2 - 2) as f64, p: 1.0 }
        } else {
            WelchTest {
                t: if m1 > m2 { f64::INFINITY } else { f64::NEG_INFINITY },
                dof: (n1 + n2 - 2) as f64,
                p: 0.0,
            }
        });
    }

    let t = (m1 - m2) / se.sqrt();
    let dof = se * se
        / (se1 * se1 / (n1 as f64 - 1.0) + se2 * se2 / (n2 as f64 - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        regularized_inc_beta(dof / (dof + t * t), dof / 2.0, 0.5)
    };
    Ok(WelchTest { t, dof, p })
}

/// Natural log of the gamma function, Lanczos approximation. Valid for
/// positive arguments, which is all the t-test needs.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const COEFFS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut sum = 1.000_000_000_190_015;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (x + i as f64 + 1.0);
    }
    let tmp = x + 5.5;
    (x + 0.5) * tmp.ln() - tmp + (2.506_628_274_631_000_5 * sum / x).ln()
}

/// Regularized incomplete beta function I_x(a, b) via the symmetric Lentz
/// continued fraction.
pub fn regularized_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // the fraction converges fast only below the symmetry point
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_inc_beta(1.0 - x, b, a);
    }

    let front =
        (a * x.ln() + b * (1.0 - x).ln() - ln_gamma(a) - ln_gamma(b) + ln_gamma(a + b)).exp();

    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-15;
    let mut c = 1.0f64;
    let mut d = 0.0f64;
    let mut f = 1.0f64;
    let apply = |coeff: f64, c: &mut f64, d: &mut f64| {
        *d = 1.0 + coeff * *d;
        if d.abs() < TINY {
            *d = TINY;
        }
        *d = 1.0 / *d;
        *c = 1.0 + coeff / *c;
        if c.abs() < TINY {
            *c = TINY;
        }
        *c * *d
    };
    for m in 0..200 {
        let mf = m as f64;
        let odd = -(a + mf) * (a + b + mf) * x / ((a + 2.0 * mf) * (a + 2.0 * mf + 1.0));
        let delta = apply(odd, &mut c, &mut d);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
        let even =
            (mf + 1.0) * (b - mf - 1.0) * x / ((a + 2.0 * mf + 1.0) * (a + 2.0 * mf + 2.0));
        let delta = apply(even, &mut c, &mut d);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front / (a * f)
}

/// Sample mean and (n-1) standard deviation, for report tables.
pub fn mean_sd(sample: &[f64]) -> (f64, f64) {
    if sample.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = sample.iter().sum::<f64>() / sample.len() as f64;
    if sample.len() < 2 {
        return (m, 0.0);
    }
    let v = sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (sample.len() - 1) as f64;
    (m, v.sqrt())
}
