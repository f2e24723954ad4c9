//! Conditional VAE trained on seen (visual, prototype) pairs with the
//! latent prior N(a_i, I): the only conditioning is the prior mean, so the
//! encoder's mean head learns to place each sample's latent code at its
//! class prototype. After training, the mean head output for an unlabeled
//! visual sample is its synthesized semantic feature.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::{adam_update, relu, relu_mask, AdamState, Matrix};
use crate::rng::RunRng;

pub const DEFAULT_CVAE_HIDDEN: usize = 512;

/// Encoder trunk d -> hidden with ReLU, two affine heads hidden -> k for
/// the mean and log-variance, decoder k -> hidden -> d (linear output).
#[derive(Debug, Clone, PartialEq)]
pub struct CvaeModel {
    pub w_enc: Matrix,
    pub b_enc: Matrix,
    pub w_mu: Matrix,
    pub b_mu: Matrix,
    pub w_logvar: Matrix,
    pub b_logvar: Matrix,
    pub w_dec1: Matrix,
    pub b_dec1: Matrix,
    pub w_dec2: Matrix,
    pub b_dec2: Matrix,
}

fn fan_uniform(rows: usize, cols: usize, positive: bool, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let lo = if positive { 0.0 } else { -bound };
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(lo..bound)).collect(),
    )
    .expect("sized iterator")
}

impl CvaeModel {
    /// Both encoder heads start at zero so the latent posterior opens at
    /// N(0, I) regardless of input scale; a fan-scaled logvar head on
    /// unnormalized features would overflow e^logvar immediately.
    pub fn new(visual_dim: usize, proto_dim: usize, hidden: usize, rng: &RunRng) -> Self {
        let (d, k, h) = (visual_dim, proto_dim, hidden);
        CvaeModel {
            w_enc: fan_uniform(h, d, true, &mut rng.fork("cvae/init/w_enc")),
            b_enc: Matrix::zeros(1, h),
            w_mu: Matrix::zeros(k, h),
            b_mu: Matrix::zeros(1, k),
            w_logvar: Matrix::zeros(k, h),
            b_logvar: Matrix::zeros(1, k),
            w_dec1: fan_uniform(h, k, true, &mut rng.fork("cvae/init/w_dec1")),
            b_dec1: Matrix::zeros(1, h),
            w_dec2: fan_uniform(d, h, false, &mut rng.fork("cvae/init/w_dec2")),
            b_dec2: Matrix::zeros(1, d),
        }
    }

    pub fn visual_dim(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.w_mu.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_enc.rows()
    }

    pub fn params(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("cvae.w_enc", &self.w_enc),
            ("cvae.b_enc", &self.b_enc),
            ("cvae.w_mu", &self.w_mu),
            ("cvae.b_mu", &self.b_mu),
            ("cvae.w_logvar", &self.w_logvar),
            ("cvae.b_logvar", &self.b_logvar),
            ("cvae.w_dec1", &self.w_dec1),
            ("cvae.b_dec1", &self.b_dec1),
            ("cvae.w_dec2", &self.w_dec2),
            ("cvae.b_dec2", &self.b_dec2),
        ]
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        vec![
            ("cvae.w_enc", &mut self.w_enc),
            ("cvae.b_enc", &mut self.b_enc),
            ("cvae.w_mu", &mut self.w_mu),
            ("cvae.b_mu", &mut self.b_mu),
            ("cvae.w_logvar", &mut self.w_logvar),
            ("cvae.b_logvar", &mut self.b_logvar),
            ("cvae.w_dec1", &mut self.w_dec1),
            ("cvae.b_dec1", &mut self.b_dec1),
            ("cvae.w_dec2", &mut self.w_dec2),
            ("cvae.b_dec2", &mut self.b_dec2),
        ]
    }

    /// Encoder heads: (mu, logvar), one row per input row.
    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        if x.cols() != self.visual_dim() {
            return Err(Error::ShapeMismatch {
                context: "CvaeModel::encode",
                expected: format!("{} columns", self.visual_dim()),
                got: format!("{}", x.cols()),
            });
        }
        let t = relu(&x.matmul_bt(&self.w_enc).add_row_broadcast(&self.b_enc));
        let mu = t.matmul_bt(&self.w_mu).add_row_broadcast(&self.b_mu);
        let logvar = t.matmul_bt(&self.w_logvar).add_row_broadcast(&self.b_logvar);
        Ok((mu, logvar))
    }

    /// Decoder: latent rows to visual reconstructions (linear output).
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim() {
            return Err(Error::ShapeMismatch {
                context: "CvaeModel::decode",
                expected: format!("{} columns", self.latent_dim()),
                got: format!("{}", z.cols()),
            });
        }
        let u = relu(&z.matmul_bt(&self.w_dec1).add_row_broadcast(&self.b_dec1));
        Ok(u.matmul_bt(&self.w_dec2).add_row_broadcast(&self.b_dec2))
    }
}

/// Gradients for every CVAE parameter, in parameter order.
#[derive(Debug, Clone)]
pub struct CvaeGrads {
    pub grads: Vec<Matrix>,
}

/// `z = mu + exp(logvar / 2) * noise`, elementwise.
pub fn reparameterize(mu: &Matrix, logvar: &Matrix, noise: &Matrix) -> Matrix {
    assert_eq!(mu.shape(), logvar.shape(), "reparameterize shape mismatch");
    assert_eq!(mu.shape(), noise.shape(), "reparameterize noise mismatch");
    let mut z = mu.clone();
    for i in 0..z.len() {
        z.data_mut()[i] += (logvar.data()[i] * 0.5).exp() * noise.data()[i];
    }
    z
}

/// Closed-form KL of N(mu, diag e^logvar) from the prior N(prior_mean, I),
/// summed over rows: `0.5 * sum_j (e^lv + (mu - a)^2 - 1 - lv)`.
pub fn kl_to_prior(mu: &Matrix, logvar: &Matrix, prior_mean: &Matrix) -> f64 {
    assert_eq!(mu.shape(), logvar.shape(), "kl shape mismatch");
    assert_eq!(mu.shape(), prior_mean.shape(), "kl prior mismatch");
    let mut kl = 0.0;
    for i in 0..mu.len() {
        let lv = logvar.data()[i];
        let dm = mu.data()[i] - prior_mean.data()[i];
        kl += 0.5 * (lv.exp() + dm * dm - 1.0 - lv);
    }
    kl
}

/// Evidence-lower-bound loss with the prototype-mean prior: summed squared
/// reconstruction error plus KL, with gradients for all parameters. The
/// noise matrix is injected so the loss is a deterministic function of its
/// inputs.
pub fn cvae_loss(
    m: &CvaeModel,
    x: &Matrix,
    prior_means: &Matrix,
    noise: &Matrix,
) -> Result<(f64, CvaeGrads)> {
    if x.rows() != prior_means.rows() || x.rows() != noise.rows() {
        return Err(Error::ShapeMismatch {
            context: "cvae_loss",
            expected: format!("{} aligned rows", x.rows()),
            got: format!("{} prior rows, {} noise rows", prior_means.rows(), noise.rows()),
        });
    }
    if prior_means.cols() != m.latent_dim() || noise.cols() != m.latent_dim() {
        return Err(Error::ShapeMismatch {
            context: "cvae_loss",
            expected: format!("{} latent columns", m.latent_dim()),
            got: format!("{}x{}", prior_means.cols(), noise.cols()),
        });
    }

    // Forward, keeping pre-activations for the backward pass.
    let t_pre = x.matmul_bt(&m.w_enc).add_row_broadcast(&m.b_enc);
    let t = relu(&t_pre);
    let mu = t.matmul_bt(&m.w_mu).add_row_broadcast(&m.b_mu);
    let logvar = t.matmul_bt(&m.w_logvar).add_row_broadcast(&m.b_logvar);
    let z = reparameterize(&mu, &logvar, noise);
    let u_pre = z.matmul_bt(&m.w_dec1).add_row_broadcast(&m.b_dec1);
    let u = relu(&u_pre);
    let xhat = u.matmul_bt(&m.w_dec2).add_row_broadcast(&m.b_dec2);

    let recon_diff = xhat.sub(x);
    let recon = recon_diff.sum_squares();
    let kl = kl_to_prior(&mu, &logvar, prior_means);
    let loss = recon + kl;

    // Backward.
    let d_xhat = recon_diff.scale(2.0);
    let g_w_dec2 = d_xhat.matmul_at(&u);
    let g_b_dec2 = d_xhat.col_sums();
    let du = d_xhat.matmul(&m.w_dec2).hadamard(&relu_mask(&u_pre));
    let g_w_dec1 = du.matmul_at(&z);
    let g_b_dec1 = du.col_sums();
    let dz = du.matmul(&m.w_dec1);

    // d mu: reconstruction path (dz) plus KL term (mu - a).
    let mut d_mu = dz.clone();
    for i in 0..d_mu.len() {
        d_mu.data_mut()[i] += mu.data()[i] - prior_means.data()[i];
    }
    // d logvar: dz * noise * std/2 plus KL term (e^lv - 1)/2.
    let mut d_logvar = Matrix::zeros(logvar.rows(), logvar.cols());
    for i in 0..d_logvar.len() {
        let lv = logvar.data()[i];
        let std_half = 0.5 * (0.5 * lv).exp();
        d_logvar.data_mut()[i] = dz.data()[i] * noise.data()[i] * std_half + 0.5 * (lv.exp() - 1.0);
    }

    let g_w_mu = d_mu.matmul_at(&t);
    let g_b_mu = d_mu.col_sums();
    let g_w_logvar = d_logvar.matmul_at(&t);
    let g_b_logvar = d_logvar.col_sums();

    let dt = d_mu
        .matmul(&m.w_mu)
        .add(&d_logvar.matmul(&m.w_logvar))
        .hadamard(&relu_mask(&t_pre));
    let g_w_enc = dt.matmul_at(x);
    let g_b_enc = dt.col_sums();

    let grads = CvaeGrads {
        grads: vec![
            g_w_enc, g_b_enc, g_w_mu, g_b_mu, g_w_logvar, g_b_logvar, g_w_dec1, g_b_dec1,
            g_w_dec2, g_b_dec2,
        ],
    };
    Ok((loss, grads))
}

/// Training hyperparameters for the CVAE stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvaeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        CvaeConfig {
            hidden: DEFAULT_CVAE_HIDDEN,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

impl CvaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 || self.hidden < 1 {
            return Err(Error::InvalidInput {
                context: "CvaeConfig",
                reason: "hidden and batch_size must be >= 1".into(),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput {
                context: "CvaeConfig",
                reason: format!("learning_rate must be positive, got {}", self.learning_rate),
            });
        }
        Ok(())
    }
}

/// Per-epoch mean loss of CVAE training.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CvaeEpochStats {
    pub epoch: usize,
    pub loss: f64,
}

/// Adam training of the ELBO over seen-train batches; batches and noise
/// draw from streams forked off the run generator, so a fixed run seed
/// reproduces training bit-for-bit.
pub fn train_cvae(
    m: &mut CvaeModel,
    ds: &Dataset,
    cfg: &CvaeConfig,
    rng: &RunRng,
) -> Result<Vec<CvaeEpochStats>> {
    cfg.validate()?;
    let train_rows = &ds.splits().seen_train;
    if train_rows.is_empty() {
        return Err(Error::EmptyInput { context: "train_cvae" });
    }
    if m.visual_dim() != ds.visual_dim() || m.latent_dim() != ds.proto_dim() {
        return Err(Error::ShapeMismatch {
            context: "train_cvae",
            expected: format!("model d={} k={}", ds.visual_dim(), ds.proto_dim()),
            got: format!("d={} k={}", m.visual_dim(), m.latent_dim()),
        });
    }

    let mut batch_rng = rng.fork("cvae/batch");
    let mut noise_rng = rng.fork("cvae/noise");
    let mut states: Vec<AdamState> = m
        .params()
        .iter()
        .map(|(_, p)| AdamState::new(p.rows(), p.cols(), cfg.learning_rate))
        .collect();

    let k = ds.proto_dim();
    let iters_per_epoch = train_rows.len().div_ceil(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for _ in 0..iters_per_epoch {
            let rows: Vec<usize> = (0..cfg.batch_size)
                .map(|_| train_rows[batch_rng.gen_range(0..train_rows.len() as u64) as usize])
                .collect();
            let x = ds.visual().select_rows(&rows);
            let proto_rows: Vec<usize> = rows.iter().map(|&r| ds.labels()[r]).collect();
            let priors = ds.prototypes().select_rows(&proto_rows);
            let noise = Matrix::from_vec(
                rows.len(),
                k,
                (0..rows.len() * k).map(|_| noise_rng.sample(StandardNormal)).collect(),
            )?;
            let (loss, grads) = cvae_loss(m, &x, &priors, &noise)?;
            for (i, (_, p)) in m.params_mut().into_iter().enumerate() {
                adam_update(p, &grads.grads[i], &mut states[i]);
            }
            sum += loss;
        }
        history.push(CvaeEpochStats {
            epoch,
            loss: sum / iters_per_epoch as f64,
        });
    }
    Ok(history)
}

/// Synthesized semantic features: the deterministic mean-head output per
/// row. The stochastic variant is [`synthesize_semantic_sampled`].
pub fn synthesize_semantic(m: &CvaeModel, x: &Matrix) -> Result<Matrix> {
    Ok(m.encode(x)?.0)
}

/// Stochastic synthesis: one reparameterized sample per row.
pub fn synthesize_semantic_sampled(
    m: &CvaeModel,
    x: &Matrix,
    rng: &mut ChaCha12Rng,
) -> Result<Matrix> {
    let (mu, logvar) = m.encode(x)?;
    let noise = Matrix::from_vec(
        mu.rows(),
        mu.cols(),
        (0..mu.len()).map(|_| rng.sample(StandardNormal)).collect(),
    )?;
    Ok(reparameterize(&mu, &logvar, &noise))
}
