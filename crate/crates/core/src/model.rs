//! Hamiltonian surrogate: a small dense network and its derivative sweeps.
//!
//! The scalar function H_θ is a fully connected network with tanh hidden
//! layers and a linear output. The learned vector field is J∇H_θ, so every
//! loss evaluation needs the *gradient* of the network with respect to its
//! input, and every training step needs the gradient of that gradient with
//! respect to the parameters. Both are computed in closed form:
//!
//! - a batched forward pass stores activations A_l and tanh derivatives
//!   D_l = 1 − A_l² with states as columns, so each layer is one GEMM;
//! - a first reverse sweep produces g = ∇_y H per column (and caches the
//!   per-layer backward signals);
//! - a second reverse sweep differentiates the first one: given a cotangent
//!   λ on g it accumulates exact ∂/∂θ contributions and returns the
//!   cotangent on the input, which the interpolation loss feeds back into
//!   earlier collocation stages.
//!
//! The interpolation loss itself lives here too: residuals of an implicit
//! Runge–Kutta step whose stages see both trajectory endpoints, averaged
//! over all transitions of a sampled trajectory.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrators::{MirkTableau, Trajectory};

/// Dense tanh network representing a scalar Hamiltonian.
#[derive(Debug, Clone)]
pub struct MlpHamiltonian {
    layer_dims: Vec<usize>,
    /// weights[l] has shape (layer_dims[l+1], layer_dims[l]).
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    seed: u64,
}

/// Cached tensors from one batched forward + gradient sweep.
///
/// Indexing follows the layer chain: `a[0]` is the input block (dim × N),
/// `a[m]` the activations after layer m, `a[L]` the scalar outputs (1 × N).
/// `d[m] = 1 − a[m]²` holds tanh derivatives for hidden layers, `g`/`p` the
/// backward signals of the gradient sweep (`g[0]` is ∇H itself).
pub struct GradCache {
    a: Vec<Array2<f64>>,
    d: Vec<Array2<f64>>,
    g: Vec<Array2<f64>>,
    p: Vec<Array2<f64>>,
}

impl GradCache {
    /// Hamiltonian values for the batch, one per column.
    pub fn values(&self) -> Array1<f64> {
        let last = &self.a[self.a.len() - 1];
        last.row(0).to_owned()
    }

    /// ∇H per column (dim × N).
    pub fn input_grads(&self) -> &Array2<f64> {
        &self.g[0]
    }
}

/// Serialized model state plus the context needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub seed: u64,
    pub params: Vec<f64>,
    pub tableau_name: String,
    pub train_config_hash: String,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Rebuild the network this checkpoint describes.
    pub fn into_model(&self) -> Result<MlpHamiltonian> {
        let mut model = MlpHamiltonian::new(&self.layer_dims, self.seed)?;
        model.set_params(&self.params)?;
        Ok(model)
    }
}

/// (q, p) ↦ (p-block, −q-block) applied column-wise: K = J·g.
fn apply_j(g: &Array2<f64>) -> Array2<f64> {
    let (dim, n) = g.dim();
    let d2 = dim / 2;
    let mut out = Array2::zeros((dim, n));
    for col in 0..n {
        for k in 0..d2 {
            out[[k, col]] = g[[d2 + k, col]];
            out[[d2 + k, col]] = -g[[k, col]];
        }
    }
    out
}

/// Column-wise Jᵀ = −J: (a, b) ↦ (−b, a).
fn apply_j_transpose(k: &Array2<f64>) -> Array2<f64> {
    let (dim, n) = k.dim();
    let d2 = dim / 2;
    let mut out = Array2::zeros((dim, n));
    for col in 0..n {
        for i in 0..d2 {
            out[[i, col]] = -k[[d2 + i, col]];
            out[[d2 + i, col]] = k[[i, col]];
        }
    }
    out
}

impl MlpHamiltonian {
    /// Build a network with Glorot-uniform weights and zero biases.
    ///
    /// `layer_dims` lists all layer widths including input and the scalar
    /// output, e.g. `[4, 100, 100, 100, 1]`. The input width must be even
    /// (canonical coordinates come in (q, p) pairs) and the output width 1.
    /// Initialization is fully determined by `seed`.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least an input and an output layer".into(),
            ));
        }
        if layer_dims[0] == 0 || layer_dims[0] % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "input width must be even and positive, got {}",
                layer_dims[0]
            )));
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(
                "output layer must have width 1".into(),
            ));
        }
        if layer_dims.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-limit..limit)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Input dimension (phase-space dimension).
    pub fn dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Total number of trainable scalars.
    pub fn n_params(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Flatten parameters layer by layer: each weight matrix in row-major
    /// order, then its bias vector.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Inverse of [`params`](Self::params); rejects length mismatches.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for value in w.iter_mut() {
                *value = params[offset];
                offset += 1;
            }
            for value in b.iter_mut() {
                *value = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, tableau_name: &str, train_config_hash: &str) -> Checkpoint {
        Checkpoint {
            layer_dims: self.layer_dims.clone(),
            seed: self.seed,
            params: self.params(),
            tableau_name: tableau_name.to_string(),
            train_config_hash: train_config_hash.to_string(),
        }
    }

    /// Batched forward and gradient sweep; states are the columns of `u`.
    ///
    /// Runs the forward recursion A_l = tanh(W_l A_{l−1} + b_l) (identity on
    /// the last layer), then the reverse recursion
    /// P_l = G_l ⊙ D_l, G_{l−1} = W_lᵀ P_l seeded with G_L = 1, so that
    /// `g[0]` holds ∇H for every column. All intermediates are cached for
    /// the second-order sweep.
    pub fn forward_grad_batch(&self, u: &Array2<f64>) -> Result<GradCache> {
        if u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        let l_total = self.n_layers();
        let n = u.ncols();

        let mut a: Vec<Array2<f64>> = Vec::with_capacity(l_total + 1);
        let mut d: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); l_total + 1];
        a.push(u.clone());
        for l in 0..l_total {
            let mut z = self.weights[l].dot(&a[l]);
            z += &self.biases[l].view().insert_axis(Axis(1));
            if l < l_total - 1 {
                let act = z.mapv(f64::tanh);
                d[l + 1] = act.mapv(|x| 1.0 - x * x);
                a.push(act);
            } else {
                a.push(z);
            }
        }

        let mut g: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); l_total + 1];
        let mut p: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); l_total + 1];
        g[l_total] = Array2::ones((1, n));
        for m in (1..=l_total).rev() {
            p[m] = if m == l_total {
                g[m].clone()
            } else {
                &g[m] * &d[m]
            };
            g[m - 1] = self.weights[m - 1].t().dot(&p[m]);
        }
        Ok(GradCache { a, d, g, p })
    }

    /// Second reverse sweep: differentiate the gradient sweep.
    ///
    /// Given a cotangent `lambda` on g = ∇H (dim × N), accumulates the exact
    /// parameter cotangents into `w_bar`/`b_bar` and returns the input
    /// cotangent Ū = λᵀ · ∂g/∂u, i.e. the Hessian of H applied to λ, column
    /// by column. The ascending phase walks the gradient recursion, the
    /// descending phase walks the forward recursion; the output layer's
    /// bias never receives a contribution because a constant shift of H
    /// leaves its gradient unchanged.
    pub fn grad_of_grad(
        &self,
        cache: &GradCache,
        lambda: &Array2<f64>,
        w_bar: &mut [Array2<f64>],
        b_bar: &mut [Array1<f64>],
    ) -> Result<Array2<f64>> {
        let l_total = self.n_layers();
        if lambda.dim() != cache.g[0].dim() {
            return Err(Error::DimensionMismatch {
                expected: cache.g[0].len(),
                got: lambda.len(),
            });
        }

        let mut a_bar: Vec<Array2<f64>> = cache
            .a
            .iter()
            .map(|arr| Array2::zeros(arr.raw_dim()))
            .collect();

        // Ascending phase: adjoint of G_{m−1} = W_mᵀ (G_m ⊙ D_m).
        let mut g_bar_prev = lambda.clone();
        for m in 1..=l_total {
            w_bar[m - 1] += &cache.p[m].dot(&g_bar_prev.t());
            if m < l_total {
                let p_bar = self.weights[m - 1].dot(&g_bar_prev);
                let d_bar = &p_bar * &cache.g[m];
                a_bar[m] += &(&(&cache.a[m] * &d_bar) * -2.0);
                g_bar_prev = &p_bar * &cache.d[m];
            }
        }

        // Descending phase: adjoint of A_m = tanh(W_m A_{m−1} + b_m).
        for m in (1..l_total).rev() {
            let z_bar = &a_bar[m] * &cache.d[m];
            w_bar[m - 1] += &z_bar.dot(&cache.a[m - 1].t());
            b_bar[m - 1] += &z_bar.sum_axis(Axis(1));
            let lower = self.weights[m - 1].t().dot(&z_bar);
            a_bar[m - 1] += &lower;
        }
        Ok(a_bar.swap_remove(0))
    }

    /// Hamiltonian value at a single state.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let u = Array2::from_shape_vec((y.len(), 1), y.to_vec())
            .expect("column shape");
        let cache = self.forward_grad_batch(&u)?;
        Ok(cache.values()[0])
    }

    /// ∇H at a single state.
    pub fn input_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        let u = Array2::from_shape_vec((y.len(), 1), y.to_vec())
            .expect("column shape");
        let cache = self.forward_grad_batch(&u)?;
        Ok(cache.input_grads().column(0).to_vec())
    }

    /// Learned vector field J∇H at a single state.
    pub fn vector_field(&self, y: &[f64]) -> Result<Vec<f64>> {
        let g = self.input_grad(y)?;
        let d2 = self.dim() / 2;
        let mut out = vec![0.0; self.dim()];
        for k in 0..d2 {
            out[k] = g[d2 + k];
            out[d2 + k] = -g[k];
        }
        Ok(out)
    }

    /// The learned field as a plain closure for the ODE solvers.
    /// Panics on dimension mismatch, which the solvers never produce.
    pub fn field_closure(&self) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |y| self.vector_field(y).expect("field dimension")
    }
}

/// Mean squared interpolation residual of a trajectory and its exact
/// parameter gradient.
///
/// For every transition (x_n, x_{n+1}) the tableau's stages are evaluated
/// with the interval endpoints injected,
/// Y_i = x_n + v_i (x_{n+1} − x_n) + h Σ_{j<i} d_ij K_j with K_i = J∇H(Y_i),
/// and the residual R_n = x_n + h Σ b_i K_i − x_{n+1} measures how far the
/// learned field is from interpolating the data. Returns
/// (1/N) Σ_n ‖R_n‖² together with d(loss)/dθ in the layout of
/// [`MlpHamiltonian::params`]. All transitions are processed as one batch;
/// stage cotangents flow backwards through the d-coupling, each stage
/// running one second-order sweep.
pub fn loss_and_param_grad(
    model: &MlpHamiltonian,
    traj: &Trajectory,
    tab: &MirkTableau,
) -> Result<(f64, Vec<f64>)> {
    let n = traj.n_transitions();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory has no transitions".into(),
        ));
    }
    let dim = traj.dim();
    if dim != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: dim,
        });
    }
    let h = traj.h;
    let s = tab.stages();

    let mut x0 = Array2::zeros((dim, n));
    let mut x1 = Array2::zeros((dim, n));
    for (col, pair) in traj.states.windows(2).enumerate() {
        for k in 0..dim {
            x0[[k, col]] = pair[0][k];
            x1[[k, col]] = pair[1][k];
        }
    }
    let dx = &x1 - &x0;

    // Forward: stages are explicit because each depends only on earlier ones.
    let mut caches: Vec<GradCache> = Vec::with_capacity(s);
    let mut k_stages: Vec<Array2<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut y = &x0 + &(&dx * tab.v[i]);
        for (j, k_j) in k_stages.iter().enumerate() {
            let c = tab.d[i][j];
            if c != 0.0 {
                y += &(k_j * (h * c));
            }
        }
        let cache = model.forward_grad_batch(&y)?;
        k_stages.push(apply_j(cache.input_grads()));
        caches.push(cache);
    }

    let mut residual = &x0 - &x1;
    for i in 0..s {
        residual += &(&k_stages[i] * (h * tab.b[i]));
    }
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / n as f64;

    // Backward: seed each stage from the residual, then let later stages
    // push their input cotangents onto earlier ones through d_ij.
    let mut w_bar: Vec<Array2<f64>> = model
        .weights
        .iter()
        .map(|w| Array2::zeros(w.raw_dim()))
        .collect();
    let mut b_bar: Vec<Array1<f64>> = model
        .biases
        .iter()
        .map(|b| Array1::zeros(b.raw_dim()))
        .collect();

    let mut k_bar: Vec<Array2<f64>> = (0..s)
        .map(|i| &residual * (2.0 * h * tab.b[i] / n as f64))
        .collect();
    for i in (0..s).rev() {
        let lambda = apply_j_transpose(&k_bar[i]);
        let u_bar = model.grad_of_grad(&caches[i], &lambda, &mut w_bar, &mut b_bar)?;
        for j in 0..i {
            let c = tab.d[i][j];
            if c != 0.0 {
                k_bar[j] += &(&u_bar * (h * c));
            }
        }
    }

    let mut grad = Vec::with_capacity(model.n_params());
    for (w, b) in w_bar.iter().zip(&b_bar) {
        grad.extend(w.iter());
        grad.extend(b.iter());
    }
    Ok((loss, grad))
}
