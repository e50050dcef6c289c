//! Parameter networks: per group, three `affine → ReLU → affine → |·|` heads
//! for `a, b, d` and one `affine → |·|` head for `c`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::gsm::{BaseTransform, GroupScoreFunction, ScoreParams};
use crate::model::{BidProfile, ValuationSupport};
use crate::rng::rng_from_seed;

pub const DEFAULT_HIDDEN: usize = 32;
pub const QUANTILES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Network input: per group, the 5 quantiles of its statistics-side bids,
/// rescaled to `[0, 1]` by the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn from_bids(stat_bids: &BidProfile) -> Self {
        let support = stat_bids.support();
        let mut out = Vec::with_capacity(5 * stat_bids.m());
        for mut group in stat_bids.groups() {
            group.sort_by(f64::total_cmp);
            for q in QUANTILES {
                out.push((quantile(&group, q) - support.lower()) / support.width());
            }
        }
        Self(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Linear-interpolation quantile of sorted, nonempty data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `|w3 · relu(W1 x + b1) + b3|`, `W1` row-major `hidden × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// `|w · x + b|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CParams {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrace {
    pub pre: Vec<f64>,
    pub out: f64,
}

impl MlpParams {
    fn init<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut w = |k: usize| (0..k).map(|_| rng.random_range(-0.1..=0.1)).collect::<Vec<f64>>();
        let w1 = w(hidden * inputs);
        let b1 = w(hidden);
        let w3 = w(hidden);
        Self { w1, b1, w3, b3: rng.random_range(0.5..=1.5) }
    }

    fn zeros(inputs: usize, hidden: usize) -> Self {
        Self { w1: vec![0.0; hidden * inputs], b1: vec![0.0; hidden], w3: vec![0.0; hidden], b3: 0.0 }
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn forward(&self, x: &[f64]) -> MlpTrace {
        let pre: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(j, b)| b + dot(&self.w1[j * x.len()..(j + 1) * x.len()], x))
            .collect();
        let out = self.b3 + pre.iter().zip(&self.w3).map(|(z, w)| z.max(0.0) * w).sum::<f64>();
        MlpTrace { pre, out }
    }

    /// Accumulates `d|out| · grad_out` into `grad`.
    fn backward(&self, x: &[f64], trace: &MlpTrace, grad_out: f64, grad: &mut MlpParams) {
        let go = grad_out * sign(trace.out);
        if go == 0.0 {
            return;
        }
        grad.b3 += go;
        for (j, &z) in trace.pre.iter().enumerate() {
            if z > 0.0 {
                grad.w3[j] += go * z;
                let gz = go * self.w3[j];
                grad.b1[j] += gz;
                for (g, xi) in grad.w1[j * x.len()..(j + 1) * x.len()].iter_mut().zip(x) {
                    *g += gz * xi;
                }
            }
        }
    }
}

impl CParams {
    fn init<R: Rng>(inputs: usize, rng: &mut R) -> Self {
        let w = (0..inputs).map(|_| rng.random_range(-0.1..=0.1)).collect();
        Self { w, b: rng.random_range(0.5..=1.5) }
    }

    fn zeros(inputs: usize) -> Self {
        Self { w: vec![0.0; inputs], b: 0.0 }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.b + dot(&self.w, x)
    }

    fn backward(&self, x: &[f64], out: f64, grad_out: f64, grad: &mut CParams) {
        let go = grad_out * sign(out);
        if go == 0.0 {
            return;
        }
        grad.b += go;
        for (g, xi) in grad.w.iter_mut().zip(x) {
            *g += go * xi;
        }
    }
}

/// Heads of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNets {
    pub a: MlpParams,
    pub b: MlpParams,
    pub c: CParams,
    pub d: MlpParams,
}

/// Kink pattern of the network: ReLU activity and head output signs. The
/// objective is smooth in the weights while this stays fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinkSignature(Vec<i8>);

/// All learnable parameters `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreNetwork {
    pub groups: Vec<GroupNets>,
    pub inputs: usize,
    pub hidden: usize,
}

impl ScoreNetwork {
    /// Head biases `U[0.5, 1.5]`, everything else `U[−0.1, 0.1]`.
    pub fn init(m: usize, inputs: usize, hidden: usize, seed: u64) -> Result<Self> {
        if m == 0 || inputs == 0 || hidden == 0 {
            return Err(AuctionError::Config("network dimensions must be positive".into()));
        }
        let mut rng = rng_from_seed(seed);
        let groups = (0..m)
            .map(|_| GroupNets {
                a: MlpParams::init(inputs, hidden, &mut rng),
                b: MlpParams::init(inputs, hidden, &mut rng),
                c: CParams::init(inputs, &mut rng),
                d: MlpParams::init(inputs, hidden, &mut rng),
            })
            .collect();
        Ok(Self { groups, inputs, hidden })
    }

    pub fn zeros(m: usize, inputs: usize, hidden: usize) -> Self {
        let groups = (0..m)
            .map(|_| GroupNets {
                a: MlpParams::zeros(inputs, hidden),
                b: MlpParams::zeros(inputs, hidden),
                c: CParams::zeros(inputs),
                d: MlpParams::zeros(inputs, hidden),
            })
            .collect();
        Self { groups, inputs, hidden }
    }

    pub fn m(&self) -> usize {
        self.groups.len()
    }

    fn check_features(&self, features: &FeatureVector) -> Result<()> {
        if features.len() != self.inputs {
            return Err(AuctionError::Contract(format!(
                "network expects {} features, got {}",
                self.inputs,
                features.len()
            )));
        }
        if features.0.iter().any(|x| !x.is_finite()) {
            return Err(AuctionError::Contract("non-finite feature".into()));
        }
        Ok(())
    }

    /// `(a, b, c, d)` per group.
    pub fn emit(&self, features: &FeatureVector) -> Result<Vec<ScoreParams>> {
        self.check_features(features)?;
        let x = &features.0;
        Ok(self
            .groups
            .iter()
            .map(|g| ScoreParams {
                a: g.a.forward(x).out.abs(),
                b: g.b.forward(x).out.abs(),
                c: g.c.forward(x).abs(),
                d: g.d.forward(x).out.abs(),
            })
            .collect())
    }

    /// Pulls `∂L/∂(a, b, c, d)` per group back to the weights.
    pub fn backward(&self, features: &FeatureVector, param_grad: &[[f64; 4]]) -> Result<ScoreNetwork> {
        self.check_features(features)?;
        let x = &features.0;
        let mut grad = Self::zeros(self.m(), self.inputs, self.hidden);
        for ((g, gg), pg) in self.groups.iter().zip(grad.groups.iter_mut()).zip(param_grad) {
            g.a.backward(x, &g.a.forward(x), pg[0], &mut gg.a);
            g.b.backward(x, &g.b.forward(x), pg[1], &mut gg.b);
            g.c.backward(x, g.c.forward(x), pg[2], &mut gg.c);
            g.d.backward(x, &g.d.forward(x), pg[3], &mut gg.d);
        }
        Ok(grad)
    }

    pub fn kink_signature(&self, features: &FeatureVector) -> KinkSignature {
        let x = &features.0;
        let mut sig = Vec::new();
        for g in &self.groups {
            for head in [&g.a, &g.b, &g.d] {
                let t = head.forward(x);
                sig.extend(t.pre.iter().map(|&z| sign(z) as i8));
                sig.push(sign(t.out) as i8);
            }
            sig.push(sign(g.c.forward(x)) as i8);
        }
        KinkSignature(sig)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.groups {
            for head in [&g.a, &g.b] {
                push_mlp(&mut out, head);
            }
            out.extend(&g.c.w);
            out.push(g.c.b);
            push_mlp(&mut out, &g.d);
        }
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flatten().len() {
            return Err(AuctionError::Contract("parameter vector length mismatch".into()));
        }
        let mut it = flat.iter().copied();
        for g in &mut self.groups {
            for head in [&mut g.a, &mut g.b] {
                pull_mlp(&mut it, head);
            }
            g.c.w.iter_mut().for_each(|w| *w = it.next().unwrap());
            g.c.b = it.next().unwrap();
            pull_mlp(&mut it, &mut g.d);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}

fn push_mlp(out: &mut Vec<f64>, p: &MlpParams) {
    out.extend(&p.w1);
    out.extend(&p.b1);
    out.extend(&p.w3);
    out.push(p.b3);
}

fn pull_mlp(it: &mut impl Iterator<Item = f64>, p: &mut MlpParams) {
    for v in p.w1.iter_mut().chain(p.b1.iter_mut()).chain(p.w3.iter_mut()) {
        *v = it.next().unwrap();
    }
    p.b3 = it.next().unwrap();
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sign with the subgradient convention `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Score functions emitted by the network for the given features.
pub fn emit_params(
    net: &ScoreNetwork,
    features: &FeatureVector,
    base: BaseTransform,
    support: ValuationSupport,
) -> Result<GroupScoreFunction> {
    GroupScoreFunction::new(net.emit(features)?, base, support)
}
