//! Special functions behind the Student-t predictive: log-gamma, the
//! regularized incomplete beta, and the F distribution CDF/quantile.

use super::NumericsError;

// Lanczos approximation, g = 7, 9 coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) {
        return Err(NumericsError::DomainError("log_gamma requires x > 0"));
    }
    Ok(log_gamma_unchecked(x))
}

fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s).ln() - log_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) = d/dx ln Γ(x), for `x > 0`.
///
/// Recurrence up to x ≥ 6, then the asymptotic Bernoulli series.
pub fn digamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) {
        return Err(NumericsError::DomainError("digamma requires x > 0"));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    Ok(acc + series)
}

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
///
/// Continued fraction (modified Lentz), switching to the symmetric form
/// `1 - I_{1-x}(b, a)` when x > (a+1)/(a+b+2) for convergence.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(NumericsError::DomainError(
            "incomplete beta requires a > 0 and b > 0",
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(NumericsError::DomainError(
            "incomplete beta requires x in [0, 1]",
        ));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_beta =
        log_gamma_unchecked(a) + log_gamma_unchecked(b) - log_gamma_unchecked(a + b);
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

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

    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;

        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
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

        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
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

fn check_f_params(d1: u32, d2: f64) -> Result<(), NumericsError> {
    if d1 < 1 {
        return Err(NumericsError::DomainError("f distribution requires d1 >= 1"));
    }
    if !(d2 > 0.0) {
        return Err(NumericsError::DomainError("f distribution requires d2 > 0"));
    }
    Ok(())
}

/// CDF of the F(d1, d2) distribution at `x >= 0`.
pub fn f_cdf(d1: u32, d2: f64, x: f64) -> Result<f64, NumericsError> {
    check_f_params(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return Err(NumericsError::DomainError("f_cdf requires x >= 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let d1f = f64::from(d1);
    let t = d1f * x / (d1f * x + d2);
    regularized_incomplete_beta(0.5 * d1f, 0.5 * d2, t)
}

/// Density of the F(d1, d2) distribution, used for Newton refinement.
fn f_pdf(d1: u32, d2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * f64::from(d1);
    let b = 0.5 * d2;
    let ln_beta = log_gamma_unchecked(a) + log_gamma_unchecked(b) - log_gamma_unchecked(a + b);
    let d1f = f64::from(d1);
    let ln_pdf = a * (d1f.ln() + x.ln()) + b * d2.ln()
        - (a + b) * (d1f * x + d2).ln()
        - x.ln()
        - ln_beta;
    ln_pdf.exp()
}

/// Quantile of the F(d1, d2) distribution at probability `p` in [0, 1).
///
/// Bracketing bisection followed by Newton polish on [`f_cdf`].
pub fn f_quantile(d1: u32, d2: f64, p: f64) -> Result<f64, NumericsError> {
    check_f_params(d1, d2)?;
    if !(0.0..1.0).contains(&p) {
        return Err(NumericsError::DomainError("f_quantile requires p in [0, 1)"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while f_cdf(d1, d2, hi)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(NumericsError::DomainError("f_quantile bracket overflow"));
        }
    }

    // Bisection to a usable width.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(d1, d2, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
    }

    // Newton refinement, falling back to the bracket midpoint when a step
    // leaves the bracket.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..30 {
        let err = f_cdf(d1, d2, x)? - p;
        if err > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        if err.abs() <= 1e-13 {
            break;
        }
        let pdf = f_pdf(d1, d2, x);
        let step = if pdf > 0.0 { err / pdf } else { 0.0 };
        let mut next = x - step;
        if !(next > lo && next < hi) || step == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= f64::EPSILON * x.abs() {
            break;
        }
        x = next;
    }
    Ok(x)
}
