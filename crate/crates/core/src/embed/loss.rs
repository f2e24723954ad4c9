//! Loss terms of the embedding model, each returning its value together
//! with analytic gradients for every parameter it touches.
//!
//! All gradients are derived by hand. The class-encoder term is the
//! delicate one: the decoder reuses the transposed encoder weight, so the
//! gradient w.r.t. `w_v` accumulates an encoder-path and a decoder-path
//! contribution.

use crate::embed::model::{EmbedGrads, EmbedModel};
use crate::error::{Error, Result};
use crate::num::{mse_sum, relu, relu_mask, softmax_cross_entropy, Matrix};

/// Weights of the combined training objective: `alpha1..alpha4` scale the
/// class-encoder, latent-alignment, structure-alignment, and classifier
/// terms; `beta` scales the L2 regularizer over all parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            alpha4: 1.0,
            beta: 1e-4,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.beta]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0);
        if !ok {
            return Err(Error::InvalidInput {
                context: "LossWeights",
                reason: "all weights must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Per-term values of one evaluation of the combined objective.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub class_encoder: f64,
    pub latent_align: f64,
    pub structure_align: f64,
    pub classifier: f64,
    pub regularizer: f64,
}

/// One training step's worth of data for the combined objective.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    /// Visual input rows (n x d).
    pub inputs: Matrix,
    /// Same-class reconstruction targets, row-aligned with `inputs`.
    pub recon_targets: Matrix,
    /// Per-row semantic vector to align the latent embedding with (n x k):
    /// the label's prototype for seen rows, a synthesized feature for
    /// unseen rows.
    pub align_semantics: Matrix,
    /// Classifier target slots, row-aligned with `inputs`.
    pub class_slots: Vec<usize>,
    /// Per-class visual means in VISUAL space (m x d), encoded inside the
    /// structure-alignment term.
    pub sa_visual_means: Matrix,
    /// Row-aligned class prototypes for the structure term (m x k).
    pub sa_prototypes: Matrix,
}

/// Class-encoder reconstruction (each input reconstructs a same-class
/// partner): `sum ||g(f_v(x)) - x_tilde||^2`. With every pair being
/// `(x, x)` this is the plain autoencoder loss.
pub fn loss_class_encoder(
    m: &EmbedModel,
    inputs: &Matrix,
    targets: &Matrix,
) -> Result<(f64, EmbedGrads)> {
    if inputs.rows() == 0 {
        return Err(Error::EmptyInput {
            context: "loss_class_encoder",
        });
    }
    if inputs.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            context: "loss_class_encoder",
            expected: format!("{:?}", inputs.shape()),
            got: format!("{:?}", targets.shape()),
        });
    }
    let z1 = inputs.matmul_bt(&m.w_v).add_row_broadcast(&m.b_enc);
    let h = relu(&z1);
    let z2 = h.matmul(&m.w_v).add_row_broadcast(&m.b_dec);
    let recon = relu(&z2);
    let (loss, d_recon) = mse_sum(&recon, targets)?;

    let mut grads = EmbedGrads::zeros_like(m);
    let dz2 = d_recon.hadamard(&relu_mask(&z2));
    grads.b_dec = dz2.col_sums();
    // Decoder path: z2 = h w_v.
    grads.w_v = h.matmul_at(&dz2);
    let dh = dz2.matmul_bt(&m.w_v);
    let dz1 = dh.hadamard(&relu_mask(&z1));
    grads.b_enc = dz1.col_sums();
    // Encoder path: z1 = x w_v^T.
    grads.w_v.scaled_add_assign(1.0, &dz1.matmul_at(inputs));
    Ok((loss, grads))
}

// Shared body of the two latent alignment losses: sum of squared distances
// between encoded visual rows and encoded semantic rows, with gradients
// flowing into both branches.
fn latent_pair_alignment(
    m: &EmbedModel,
    visual: &Matrix,
    semantic: &Matrix,
    context: &'static str,
) -> Result<(f64, EmbedGrads)> {
    if visual.rows() != semantic.rows() {
        return Err(Error::ShapeMismatch {
            context,
            expected: format!("{} semantic rows", visual.rows()),
            got: format!("{}", semantic.rows()),
        });
    }
    let z1 = visual.matmul_bt(&m.w_v).add_row_broadcast(&m.b_enc);
    let h_v = relu(&z1);
    let s1 = semantic.matmul_bt(&m.w_s1).add_row_broadcast(&m.b_s1);
    let h1 = relu(&s1);
    let s2 = h1.matmul_bt(&m.w_s2).add_row_broadcast(&m.b_s2);
    let h_s = relu(&s2);

    let (loss, d_hv) = mse_sum(&h_v, &h_s)?;
    let d_hs = d_hv.scale(-1.0);

    let mut grads = EmbedGrads::zeros_like(m);
    let dz1 = d_hv.hadamard(&relu_mask(&z1));
    grads.w_v = dz1.matmul_at(visual);
    grads.b_enc = dz1.col_sums();

    let ds2 = d_hs.hadamard(&relu_mask(&s2));
    grads.w_s2 = ds2.matmul_at(&h1);
    grads.b_s2 = ds2.col_sums();
    let dh1 = ds2.matmul(&m.w_s2);
    let ds1 = dh1.hadamard(&relu_mask(&s1));
    grads.w_s1 = ds1.matmul_at(semantic);
    grads.b_s1 = ds1.col_sums();
    Ok((loss, grads))
}

/// Latent alignment: `sum_i ||f_v(x_i) - f_s(a_{y_i})||^2` over row-aligned
/// visual samples and their semantic vectors.
pub fn loss_latent_align(
    m: &EmbedModel,
    visual: &Matrix,
    semantics: &Matrix,
) -> Result<(f64, EmbedGrads)> {
    latent_pair_alignment(m, visual, semantics, "loss_latent_align")
}

/// Structure alignment: `sum_i ||f_v(mu_i) - f_s(a_i)||^2` where `mu_i` is
/// the mean of class i's visual features, taken in visual space and only
/// then encoded. Because the encoders are non-linear this differs from
/// aligning the mean of per-sample latent embeddings.
pub fn loss_structure_align(
    m: &EmbedModel,
    class_visual_means: &Matrix,
    prototypes: &Matrix,
) -> Result<(f64, EmbedGrads)> {
    latent_pair_alignment(m, class_visual_means, prototypes, "loss_structure_align")
}

/// Classifier cross-entropy over latent features, backpropagated through
/// the visual encoder (cooperative training).
pub fn loss_classifier(
    m: &EmbedModel,
    visual: &Matrix,
    slots: &[usize],
) -> Result<(f64, EmbedGrads)> {
    let z1 = visual.matmul_bt(&m.w_v).add_row_broadcast(&m.b_enc);
    let h = relu(&z1);
    let logits = h.matmul_bt(&m.w_c).add_row_broadcast(&m.b_c);
    let (loss, d_logits) = softmax_cross_entropy(&logits, slots)?;

    let mut grads = EmbedGrads::zeros_like(m);
    grads.w_c = d_logits.matmul_at(&h);
    grads.b_c = d_logits.col_sums();
    let dh = d_logits.matmul(&m.w_c);
    let dz1 = dh.hadamard(&relu_mask(&z1));
    grads.w_v = dz1.matmul_at(visual);
    grads.b_enc = dz1.col_sums();
    Ok((loss, grads))
}

/// L2 regularizer over every parameter entry (the tied decoder weight is
/// counted once).
pub fn l2_regularizer(m: &EmbedModel) -> (f64, EmbedGrads) {
    let mut grads = EmbedGrads::zeros_like(m);
    let mut loss = 0.0;
    loss += m.w_v.sum_squares();
    grads.w_v = m.w_v.scale(2.0);
    loss += m.b_enc.sum_squares();
    grads.b_enc = m.b_enc.scale(2.0);
    loss += m.b_dec.sum_squares();
    grads.b_dec = m.b_dec.scale(2.0);
    loss += m.w_s1.sum_squares();
    grads.w_s1 = m.w_s1.scale(2.0);
    loss += m.b_s1.sum_squares();
    grads.b_s1 = m.b_s1.scale(2.0);
    loss += m.w_s2.sum_squares();
    grads.w_s2 = m.w_s2.scale(2.0);
    loss += m.b_s2.sum_squares();
    grads.b_s2 = m.b_s2.scale(2.0);
    loss += m.w_c.sum_squares();
    grads.w_c = m.w_c.scale(2.0);
    loss += m.b_c.sum_squares();
    grads.b_c = m.b_c.scale(2.0);
    (loss, grads)
}

/// Smallest |pre-activation| reached by any ReLU in the model's forward
/// passes over the given visual and semantic rows. Finite-difference
/// gradient checks are only meaningful on instances where this margin
/// comfortably exceeds the probe step, since central differences straddle
/// the kink otherwise.
pub fn preactivation_margin(m: &EmbedModel, visual: &Matrix, semantic: &Matrix) -> f64 {
    let mut margin = f64::INFINITY;
    let mut scan = |z: &Matrix| {
        for &v in z.data() {
            margin = margin.min(v.abs());
        }
    };
    let z1 = visual.matmul_bt(&m.w_v).add_row_broadcast(&m.b_enc);
    let h = relu(&z1);
    let z2 = h.matmul(&m.w_v).add_row_broadcast(&m.b_dec);
    scan(&z1);
    scan(&z2);
    let s1 = semantic.matmul_bt(&m.w_s1).add_row_broadcast(&m.b_s1);
    let h1 = relu(&s1);
    let s2 = h1.matmul_bt(&m.w_s2).add_row_broadcast(&m.b_s2);
    scan(&s1);
    scan(&s2);
    margin
}

/// Weighted sum of all loss terms. Terms with weight zero are skipped, so
/// an all-zero weighting yields exactly zero loss and zero gradients; the
/// returned gradient is the weighted sum of the per-term gradients.
pub fn total_loss(
    m: &EmbedModel,
    batch: &TrainBatch,
    weights: &LossWeights,
) -> Result<(LossBreakdown, EmbedGrads)> {
    weights.validate()?;
    if batch.inputs.rows() == 0 {
        return Err(Error::EmptyInput { context: "total_loss" });
    }
    let mut breakdown = LossBreakdown::default();
    let mut grads = EmbedGrads::zeros_like(m);

    if weights.alpha1 != 0.0 {
        let (loss, g) = loss_class_encoder(m, &batch.inputs, &batch.recon_targets)?;
        breakdown.class_encoder = loss;
        grads.scaled_add_assign(weights.alpha1, &g);
    }
    if weights.alpha2 != 0.0 {
        let (loss, g) = loss_latent_align(m, &batch.inputs, &batch.align_semantics)?;
        breakdown.latent_align = loss;
        grads.scaled_add_assign(weights.alpha2, &g);
    }
    if weights.alpha3 != 0.0 && batch.sa_visual_means.rows() > 0 {
        let (loss, g) = loss_structure_align(m, &batch.sa_visual_means, &batch.sa_prototypes)?;
        breakdown.structure_align = loss;
        grads.scaled_add_assign(weights.alpha3, &g);
    }
    if weights.alpha4 != 0.0 {
        let (loss, g) = loss_classifier(m, &batch.inputs, &batch.class_slots)?;
        breakdown.classifier = loss;
        grads.scaled_add_assign(weights.alpha4, &g);
    }
    if weights.beta != 0.0 {
        let (loss, g) = l2_regularizer(m);
        breakdown.regularizer = loss;
        grads.scaled_add_assign(weights.beta, &g);
    }
    breakdown.total = weights.alpha1 * breakdown.class_encoder
        + weights.alpha2 * breakdown.latent_align
        + weights.alpha3 * breakdown.structure_align
        + weights.alpha4 * breakdown.classifier
        + weights.beta * breakdown.regularizer;
    Ok((breakdown, grads))
}
