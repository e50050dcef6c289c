//! Training objective on the statistics-side profile and its gradient with
//! respect to the score parameters.
//!
//! With `s_i = σ_{g_i}(x_i)`, `S = Σ s_j`, `Π_i = s_i / S` and
//! `I_i = ∫_{θ̲}^{x_i} s_i(t) / (s_i(t) + R_i) dt` where `R_i = S − s_i`:
//!
//! ```text
//! ψ = −Σ_i (x_i Π_i − I_i)
//! g = SW_k − SW_l − ε        (k, l) the attaining pair, SW_k = Σ_{i∈N_k} x_i Π_i
//! L = ψ + λ g
//! ```

use crate::error::{AuctionError, Result};
use crate::gsm::GroupScoreFunction;
use crate::model::{gap_attaining_pair, group_fairness_gap, BidProfile};
use crate::quadrature::{QuadratureRule, QuadratureSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    /// `−` expected revenue.
    pub psi: f64,
    pub group_welfare: Vec<f64>,
    pub gap: f64,
    /// `gap − ε`; feasible iff `≤ 0`.
    pub g: f64,
    pub lagrangian: f64,
    pub attaining_pair: Option<(usize, usize)>,
}

/// `L(σ, λ) = ψ(σ) + λ g(σ)` on the statistics-side profile.
pub fn lagrangian(
    gsf: &GroupScoreFunction,
    stat_bids: &BidProfile,
    lambda: f64,
    epsilon: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(evaluate(gsf, stat_bids, lambda, epsilon, quad)?.lagrangian)
}

pub fn evaluate(
    gsf: &GroupScoreFunction,
    stat_bids: &BidProfile,
    lambda: f64,
    epsilon: f64,
    quad: &QuadratureSpec,
) -> Result<ObjectiveValue> {
    Ok(Pass::run(gsf, stat_bids, lambda, epsilon, quad, false)?.value)
}

/// Value and `∂L/∂(a_k, b_k, c_k, d_k)` for every group. Requires the
/// composite rule so the discretized objective is differentiated exactly.
pub fn evaluate_with_grad(
    gsf: &GroupScoreFunction,
    stat_bids: &BidProfile,
    lambda: f64,
    epsilon: f64,
    quad: &QuadratureSpec,
) -> Result<(ObjectiveValue, Vec<[f64; 4]>)> {
    if quad.rule != QuadratureRule::CompositeSimpson {
        return Err(AuctionError::Config("training gradients need the composite-simpson rule".into()));
    }
    let pass = Pass::run(gsf, stat_bids, lambda, epsilon, quad, true)?;
    let grad = pass.param_grad(gsf, stat_bids, lambda);
    Ok((pass.value, grad))
}

struct Pass {
    value: ObjectiveValue,
    f: Vec<f64>,
    pi: Vec<f64>,
    total: f64,
    /// `∫A`, `∫A f`, `∫B` per buyer with `A = R/den²`, `B = −s/den²`.
    sa: Vec<f64>,
    saf: Vec<f64>,
    sb: Vec<f64>,
}

impl Pass {
    fn run(
        gsf: &GroupScoreFunction,
        bids: &BidProfile,
        lambda: f64,
        epsilon: f64,
        quad: &QuadratureSpec,
        want_grad: bool,
    ) -> Result<Self> {
        quad.validate()?;
        if !(lambda >= 0.0) {
            return Err(AuctionError::Contract(format!("lambda must be nonnegative, got {lambda}")));
        }
        if gsf.m() != bids.m() {
            return Err(AuctionError::Contract("score function and profile disagree on m".into()));
        }
        let n = bids.n();
        let support = bids.support();
        let base = gsf.base();
        let f: Vec<f64> = bids.bids().iter().map(|&x| base.apply(x, support)).collect();
        let s: Vec<f64> = (0..n).map(|i| gsf.params()[bids.group_of(i)].eval(f[i])).collect();
        let total: f64 = s.iter().sum();
        if !(total > 0.0) {
            return Err(AuctionError::DegenerateScore);
        }
        let pi: Vec<f64> = s.iter().map(|si| si / total).collect();

        let cap = if want_grad { n } else { 0 };
        let (mut sa, mut saf, mut sb) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
        let mut revenue = 0.0;
        for i in 0..n {
            let p = gsf.params()[bids.group_of(i)];
            let rivals = (total - s[i]).max(0.0);
            let (mut area, mut a_sum, mut af_sum, mut b_sum) = (0.0, 0.0, 0.0, 0.0);
            let x = bids.bid(i);
            let mut add = |t: f64, w: f64| {
                let ft = base.apply(t, support);
                let st = p.eval(ft);
                let den = st + rivals;
                if den > 0.0 {
                    area += w * st / den;
                    if want_grad {
                        let d2 = den * den;
                        a_sum += w * rivals / d2;
                        af_sum += w * rivals / d2 * ft;
                        b_sum -= w * st / d2;
                    }
                }
            };
            match quad.rule {
                QuadratureRule::CompositeSimpson => quad.composite_nodes(support.lower(), x).for_each(|(t, w)| add(t, w)),
                QuadratureRule::AdaptiveSimpson => {
                    area = quad.integrate(
                        |t| {
                            let st = p.eval(base.apply(t, support));
                            if st + rivals > 0.0 {
                                st / (st + rivals)
                            } else {
                                0.0
                            }
                        },
                        support.lower(),
                        x,
                    )
                }
            }
            revenue += x * pi[i] - area;
            if want_grad {
                sa.push(a_sum);
                saf.push(af_sum);
                sb.push(b_sum);
            }
        }

        let mut group_welfare = vec![0.0; bids.m()];
        for i in 0..n {
            group_welfare[bids.group_of(i)] += bids.bid(i) * pi[i];
        }
        let gap = group_fairness_gap(&group_welfare);
        let attaining_pair = gap_attaining_pair(&group_welfare);
        let psi = -revenue;
        let g = gap - epsilon;
        Ok(Self {
            value: ObjectiveValue { psi, gap, g, lagrangian: psi + lambda * g, attaining_pair, group_welfare },
            f,
            pi,
            total,
            sa,
            saf,
            sb,
        })
    }

    fn param_grad(&self, gsf: &GroupScoreFunction, bids: &BidProfile, lambda: f64) -> Vec<[f64; 4]> {
        let n = bids.n();
        let mut out = vec![[0.0; 4]; gsf.m()];
        for (l, grad) in out.iter_mut().enumerate() {
            let p = gsf.params()[l];
            // ∂s/∂q at base value f
            let phi = |q: usize, f: f64| match q {
                0 => p.b * f + p.c,
                1 => p.a * f,
                2 => p.a,
                _ => 1.0,
            };
            for (q, gq) in grad.iter_mut().enumerate() {
                let d_q: f64 = (0..n).filter(|&j| bids.group_of(j) == l).map(|j| phi(q, self.f[j])).sum();
                let (mut d_psi, mut d_gap) = (0.0, 0.0);
                for i in 0..n {
                    let own = bids.group_of(i) == l;
                    let phi_i = if own { phi(q, self.f[i]) } else { 0.0 };
                    let d_pi = (phi_i - self.pi[i] * d_q) / self.total;
                    let d_own = if own {
                        match q {
                            0 => p.b * self.saf[i] + p.c * self.sa[i],
                            1 => p.a * self.saf[i],
                            2 => p.a * self.sa[i],
                            _ => self.sa[i],
                        }
                    } else {
                        0.0
                    };
                    let d_area = d_own + self.sb[i] * (d_q - phi_i);
                    let x = bids.bid(i);
                    d_psi -= x * d_pi - d_area;
                    if let Some((hi, lo)) = self.value.attaining_pair {
                        let k = bids.group_of(i);
                        if k == hi {
                            d_gap += x * d_pi;
                        } else if k == lo {
                            d_gap -= x * d_pi;
                        }
                    }
                }
                *gq = d_psi + lambda * d_gap;
            }
        }
        out
    }
}
