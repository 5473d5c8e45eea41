//! Gamma function via the Lanczos approximation (g = 7, nine terms).

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
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

/// Γ(x) for real x, using reflection below 1/2. Positive integers up to 171
/// return the factorial product, exact while it fits in 53 bits.
pub fn gamma(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=171.0).contains(&x) {
        return (2..x as u32).fold(1.0, |acc, k| acc * k as f64);
    }
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn integers_match_factorials() {
        for n in 1..=20u32 {
            let g = gamma(n as f64);
            let want = factorial(n - 1);
            assert!((g - want).abs() / want < 1e-10, "Γ({n}) = {g}, want {want}");
        }
        assert_eq!(gamma(4.0), 6.0);
    }

    #[test]
    fn half_integers() {
        let sqrt_pi = PI.sqrt();
        assert!((gamma(0.5) - sqrt_pi).abs() / sqrt_pi < 1e-10);
        // Γ(n + 1/2) = (2n)! √π / (4^n n!)
        for n in 1..=9u32 {
            let want = factorial(2 * n) * sqrt_pi / (4f64.powi(n as i32) * factorial(n));
            let got = gamma(n as f64 + 0.5);
            assert!((got - want).abs() / want < 1e-10, "n={n}");
        }
    }

    #[test]
    fn recurrence_on_grid() {
        // Γ(x+1) = xΓ(x) on [0.5, 19]
        let mut x = 0.5;
        while x < 19.0 {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert!((lhs - rhs).abs() / rhs < 1e-10, "x={x}");
            x += 0.37;
        }
    }

    #[test]
    fn log_gamma_agrees() {
        for &x in &[0.7, 1.3, 4.0, 7.5, 15.2] {
            assert!((ln_gamma(x) - gamma(x).ln()).abs() < 1e-10);
        }
    }
}
