use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Weight initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Uniform on `[-d^-0.5, d^-0.5]`.
    Uniform,
    /// Normal with variance `1/d`.
    Gaussian,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitMode::Uniform),
            "gaussian" => Ok(InitMode::Gaussian),
            _ => Err(Error::invalid(format!("unknown init mode {s:?}"))),
        }
    }
}

/// Gate order inside the stacked blocks.
pub const GATES: [&str; 4] = ["input", "forget", "cell", "output"];

/// Single-layer LSTM over scalar inputs with an affine readout of the last
/// hidden state.
///
/// Parameters live in one flat vector: input weights `W` (4d), recurrent
/// weights `U` (4d x d, row-major), biases `b` (4d), readout `v` (d) and the
/// readout bias. Row `g*d + r` belongs to unit `r` of gate `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    hidden: usize,
    theta: Vec<f64>,
}

impl LstmParams {
    pub fn count(hidden: usize) -> usize {
        4 * hidden + 4 * hidden * hidden + 4 * hidden + hidden + 1
    }

    pub fn zeros(hidden: usize) -> Result<Self> {
        Self::from_vec(hidden, vec![0.0; Self::count(hidden)])
    }

    pub fn from_vec(hidden: usize, theta: Vec<f64>) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden size must be at least 1"));
        }
        if theta.len() != Self::count(hidden) {
            return Err(Error::invalid(format!(
                "hidden size {hidden} needs {} parameters, got {}",
                Self::count(hidden),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(Self { hidden, theta })
    }

    pub fn init(mode: InitMode, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden size must be at least 1"));
        }
        let scale = (hidden as f64).powf(-0.5);
        let mut rng = rng_from_seed(seed);
        let theta = match mode {
            InitMode::Uniform => (0..Self::count(hidden)).map(|_| rng.random_range(-scale..=scale)).collect(),
            InitMode::Gaussian => {
                let normal = Normal::new(0.0, scale).expect("positive scale");
                (0..Self::count(hidden)).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        Self::from_vec(hidden, theta)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn offsets(&self) -> Offsets {
        Offsets::new(self.hidden)
    }

    /// Input weight of unit `r` in gate `g`.
    pub fn input_weight(&self, g: usize, r: usize) -> f64 {
        self.theta[self.offsets().w + g * self.hidden + r]
    }

    /// Recurrent weight from hidden unit `c` into unit `r` of gate `g`.
    pub fn recurrent_weight(&self, g: usize, r: usize, c: usize) -> f64 {
        let d = self.hidden;
        self.theta[self.offsets().u + (g * d + r) * d + c]
    }

    pub fn bias(&self, g: usize, r: usize) -> f64 {
        self.theta[self.offsets().b + g * self.hidden + r]
    }

    pub fn readout(&self, r: usize) -> f64 {
        self.theta[self.offsets().v + r]
    }

    pub fn readout_bias(&self) -> f64 {
        self.theta[self.offsets().c]
    }
}

#[derive(Clone, Copy)]
struct Offsets {
    w: usize,
    u: usize,
    b: usize,
    v: usize,
    c: usize,
}

impl Offsets {
    fn new(d: usize) -> Self {
        let w = 0;
        let u = w + 4 * d;
        let b = u + 4 * d * d;
        let v = b + 4 * d;
        let c = v + d;
        Self { w, u, b, v, c }
    }
}

/// Dot product with four running sums, which lets the compiler vectorize.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Activations of one sequence, flat and reused across a batch.
#[derive(Default)]
struct Trace {
    /// Per step, activated gates `[i, f, g, o]`, 4d each.
    gates: Vec<f64>,
    /// Cell states `c_0 .. c_T`, d each.
    cells: Vec<f64>,
    /// `tanh(c_t)` for `t = 1..T`.
    tanh_cells: Vec<f64>,
    /// Hidden states `h_0 .. h_T`.
    hiddens: Vec<f64>,
}

fn run(p: &LstmParams, x: &[f64], tr: &mut Trace) -> f64 {
    let d = p.hidden;
    let o = p.offsets();
    let th = &p.theta;
    let steps = x.len();
    tr.gates.resize(steps * 4 * d, 0.0);
    tr.tanh_cells.resize(steps * d, 0.0);
    tr.cells.resize((steps + 1) * d, 0.0);
    tr.hiddens.resize((steps + 1) * d, 0.0);
    tr.cells[..d].fill(0.0);
    tr.hiddens[..d].fill(0.0);
    for (t, &xt) in x.iter().enumerate() {
        let (h_done, h_rest) = tr.hiddens.split_at_mut((t + 1) * d);
        let h = &h_done[t * d..];
        let a = &mut tr.gates[t * 4 * d..(t + 1) * 4 * d];
        for (row, a_row) in a.iter_mut().enumerate() {
            let u_row = &th[o.u + row * d..o.u + (row + 1) * d];
            let rec = dot(u_row, h);
            *a_row = th[o.w + row] * xt + rec + th[o.b + row];
        }
        for r in 0..d {
            a[r] = sigmoid(a[r]);
            a[d + r] = sigmoid(a[d + r]);
            a[2 * d + r] = a[2 * d + r].tanh();
            a[3 * d + r] = sigmoid(a[3 * d + r]);
        }
        let (c_done, c_rest) = tr.cells.split_at_mut((t + 1) * d);
        let c_prev = &c_done[t * d..];
        let tc = &mut tr.tanh_cells[t * d..(t + 1) * d];
        for r in 0..d {
            let c = a[d + r] * c_prev[r] + a[r] * a[2 * d + r];
            c_rest[r] = c;
            tc[r] = c.tanh();
            h_rest[r] = a[3 * d + r] * tc[r];
        }
    }
    let h = &tr.hiddens[steps * d..];
    th[o.v..o.v + d].iter().zip(h).map(|(v, h)| v * h).sum::<f64>() + th[o.c]
}

/// Output on a ±1 input sequence.
pub fn forward(params: &LstmParams, x: &[f64]) -> f64 {
    run(params, x, &mut Trace::default())
}

/// Adds `scale * dy/dtheta` into `grad`, reading activations from `tr`.
fn backpropagate(p: &LstmParams, x: &[f64], tr: &Trace, scale: f64, grad: &mut [f64], scratch: &mut [f64]) {
    let d = p.hidden;
    let o = p.offsets();
    let th = &p.theta;
    let steps = x.len();
    let h_last = &tr.hiddens[steps * d..];
    for r in 0..d {
        grad[o.v + r] += scale * h_last[r];
    }
    grad[o.c] += scale;
    let (dh, rest) = scratch.split_at_mut(d);
    let (dcell, da) = rest.split_at_mut(d);
    for r in 0..d {
        dh[r] = scale * th[o.v + r];
        dcell[r] = 0.0;
    }
    for t in (0..steps).rev() {
        let gates = &tr.gates[t * 4 * d..(t + 1) * 4 * d];
        let tc = &tr.tanh_cells[t * d..(t + 1) * d];
        let c_prev = &tr.cells[t * d..(t + 1) * d];
        let h_prev = &tr.hiddens[t * d..(t + 1) * d];
        for r in 0..d {
            let (i, f, g, og) = (gates[r], gates[d + r], gates[2 * d + r], gates[3 * d + r]);
            dcell[r] += dh[r] * og * (1.0 - tc[r] * tc[r]);
            da[3 * d + r] = dh[r] * tc[r] * og * (1.0 - og);
            da[r] = dcell[r] * g * i * (1.0 - i);
            da[2 * d + r] = dcell[r] * i * (1.0 - g * g);
            da[d + r] = dcell[r] * c_prev[r] * f * (1.0 - f);
            dcell[r] *= f;
        }
        dh.fill(0.0);
        for (row, &dar) in da.iter().enumerate() {
            grad[o.w + row] += dar * x[t];
            grad[o.b + row] += dar;
            let base = o.u + row * d;
            let g_row = &mut grad[base..base + d];
            let u_row = &th[base..base + d];
            for c in 0..d {
                g_row[c] += dar * h_prev[c];
                dh[c] += u_row[c] * dar;
            }
        }
    }
}

/// Mean squared error over a batch and its gradient.
pub fn loss_and_gradient(params: &LstmParams, inputs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::invalid("batch needs equally many inputs and targets, at least one"));
    }
    let b = inputs.len() as f64;
    let mut grad = vec![0.0; params.theta.len()];
    let mut scratch = vec![0.0; 6 * params.hidden];
    let mut trace = Trace::default();
    let mut loss = 0.0;
    for (x, &target) in inputs.iter().zip(targets) {
        let residual = run(params, x, &mut trace) - target;
        loss += residual * residual / b;
        backpropagate(params, x, &trace, 2.0 * residual / b, &mut grad, &mut scratch);
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_output_readout_bias() {
        let mut p = LstmParams::zeros(3).unwrap();
        let c = Offsets::new(3).c;
        p.as_mut_slice()[c] = 0.25;
        assert_eq!(forward(&p, &[1.0, -1.0, 1.0]), 0.25);
    }

    #[test]
    fn init_bounds_and_seed() {
        let d = 16;
        let u = LstmParams::init(InitMode::Uniform, d, 3).unwrap();
        let bound = 0.25;
        assert!(u.as_slice().iter().all(|w| w.abs() <= bound));
        assert_eq!(u, LstmParams::init(InitMode::Uniform, d, 3).unwrap());
        assert_ne!(u, LstmParams::init(InitMode::Uniform, d, 4).unwrap());
    }

    #[test]
    fn gaussian_variance_is_one_over_d() {
        let d = 32;
        let mut all = Vec::new();
        for seed in 0..20 {
            all.extend_from_slice(LstmParams::init(InitMode::Gaussian, d, seed).unwrap().as_slice());
        }
        let var = all.iter().map(|w| w * w).sum::<f64>() / all.len() as f64;
        // ~87k draws: standard error of the estimate is about 0.5% of 1/d
        assert!((var * d as f64 - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn bias_only_gradient_is_twice_mean_residual() {
        let mut p = LstmParams::zeros(2).unwrap();
        let c = Offsets::new(2).c;
        p.as_mut_slice()[c] = 0.5;
        let inputs = vec![vec![1.0, -1.0]; 3];
        let targets = [0.0, 1.0, -1.0];
        let (loss, grad) = loss_and_gradient(&p, &inputs, &targets).unwrap();
        let mean_residual = (0.5 + -0.5 + 1.5) / 3.0;
        assert!((grad[c] - 2.0 * mean_residual).abs() < 1e-15);
        assert!((loss - (0.25 + 0.25 + 2.25) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let p = LstmParams::init(InitMode::Uniform, 4, 1).unwrap();
        let inputs = vec![vec![1.0, 1.0, -1.0], vec![-1.0, 1.0, 1.0]];
        let targets: Vec<f64> = inputs.iter().map(|x| forward(&p, x)).collect();
        let (loss, grad) = loss_and_gradient(&p, &inputs, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }
}
