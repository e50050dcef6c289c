//! Composite Simpson quadrature for payment integrals.

use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Fixed panels. Smooth in the integrand's parameters, so it is the rule
    /// used inside gradient-based training.
    CompositeSimpson,
    /// Every panel is bisected until its Richardson error estimate is below
    /// its share of `abs_tol`. Handles jumps in the integrand.
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub panels: usize,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::AdaptiveSimpson,
            panels: 512,
            abs_tol: 1e-8,
        }
    }
}

const MAX_DEPTH: u32 = 48;

impl QuadratureSpec {
    pub fn composite(panels: usize) -> Self {
        Self {
            rule: QuadratureRule::CompositeSimpson,
            panels,
            abs_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || !self.panels.is_multiple_of(2) {
            return Err(AuctionError::Config(format!(
                "quadrature panels must be a positive even integer, got {}",
                self.panels
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(AuctionError::Config("quadrature abs_tol must be positive".into()));
        }
        Ok(())
    }

    /// Same rule with twice the panels.
    pub fn doubled(&self) -> Self {
        Self {
            panels: self.panels * 2,
            ..*self
        }
    }

    /// Nodes and weights of the fixed composite rule on `[a, b]`.
    pub fn composite_nodes(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
        let n = self.panels;
        let h = (b - a) / n as f64;
        (0..=n).map(move |j| {
            let w = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + h * j as f64, w * h / 3.0)
        })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if b == a {
            return 0.0;
        }
        if b < a {
            return -self.integrate(f, b, a);
        }
        match self.rule {
            QuadratureRule::CompositeSimpson => self.composite_nodes(a, b).map(|(x, w)| w * f(x)).sum(),
            QuadratureRule::AdaptiveSimpson => {
                let n = self.panels;
                let h = (b - a) / n as f64;
                let tol = self.abs_tol / n as f64;
                (0..n)
                    .map(|j| {
                        let lo = a + h * j as f64;
                        let hi = if j + 1 == n { b } else { lo + h };
                        let (flo, fhi, fmid) = (f(lo), f(hi), f(0.5 * (lo + hi)));
                        let whole = simpson(lo, hi, flo, fmid, fhi);
                        adaptive(&f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
                    })
                    .sum()
            }
        }
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_on_cubics() {
        let q = QuadratureSpec::composite(2);
        assert_abs_diff_eq!(q.integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0), 81.0 / 4.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn reversed_and_empty_intervals() {
        let q = QuadratureSpec::default();
        assert_eq!(q.integrate(|x| x, 2.0, 2.0), 0.0);
        assert_abs_diff_eq!(q.integrate(|x| x, 2.0, 0.0), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_a_jump() {
        let q = QuadratureSpec::default();
        let t = 3.271_828_4;
        let v = q.integrate(|x| if x >= t { 1.0 } else { 0.0 }, 0.0, 10.0);
        assert_abs_diff_eq!(v, 10.0 - t, epsilon = 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |x: f64| (x).exp().ln_1p();
        let exact = QuadratureSpec::composite(1 << 14).integrate(f, 0.0, 2.0);
        let e1 = (QuadratureSpec::composite(8).integrate(f, 0.0, 2.0) - exact).abs();
        let e2 = (QuadratureSpec::composite(16).integrate(f, 0.0, 2.0) - exact).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn validation() {
        assert!(QuadratureSpec::composite(3).validate().is_err());
        assert!(QuadratureSpec::composite(0).validate().is_err());
        assert!(QuadratureSpec { abs_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }
}
