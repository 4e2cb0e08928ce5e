//! Small numerical utilities shared across modules: compensated summation,
//! Gauss–Legendre rules and a Lanczos gamma function.

use num_complex::Complex64;
use std::sync::OnceLock;

/// Kahan–Babuška compensated accumulator for complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: Complex64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on Legendre polynomials; machine-precision for
    /// the small orders used here.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_and_derivative(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (d * d);
        }
        Self { nodes, weights }
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

static GL_COARSE: OnceLock<GaussLegendre> = OnceLock::new();
static GL_FINE: OnceLock<GaussLegendre> = OnceLock::new();

/// 16-point rule used for the embedded error estimate.
pub fn gl_coarse() -> &'static GaussLegendre {
    GL_COARSE.get_or_init(|| GaussLegendre::new(16))
}

/// 32-point rule used for panel values.
pub fn gl_fine() -> &'static GaussLegendre {
    GL_FINE.get_or_init(|| GaussLegendre::new(32))
}

/// Lanczos approximation of Γ(x) for real x (g = 7, 9 terms).
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, &g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Relative difference |a - b| / max(|a|, |b|, 1).
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_oracle_known_value() {
        assert!((tests_support::bessel_j1(2.0) - 0.576724807756873387).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // degree 15 is exact for an 8-point rule
        let val: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * x.powi(14))
            .sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-14, "got {val}");
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_handles_oscillation_within_order() {
        // 32 nodes resolve cos(20 x) on [-1,1] to near machine precision
        let rule = gl_fine();
        let val: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * (20.0 * x).cos())
            .sum();
        let exact = 2.0 * (20.0_f64).sin() / 20.0;
        assert!((val - exact).abs() < 1e-12, "got {val} vs {exact}");
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gamma(1.0) - 1.0).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((gamma(1.5) - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        let mut acc = CompensatedSum::new();
        let big = Complex64::new(1e16, 0.0);
        acc.add(big);
        for _ in 0..1000 {
            acc.add(Complex64::new(0.1, 0.0));
        }
        acc.add(-big);
        assert!((acc.value().re - 100.0).abs() < 1e-9);
    }
}
