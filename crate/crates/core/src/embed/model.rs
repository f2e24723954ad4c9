//! The shallow encoder-decoder-classifier model.
//!
//! The visual encoder is a single affine layer plus ReLU; its decoder
//! reuses the transposed encoder weight (only the bias is free). The
//! semantic branch is a two-layer ReLU network, and a linear classifier
//! reads the latent layer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{relu, Matrix};
use crate::rng::RunRng;

pub const DEFAULT_LATENT_DIM: usize = 1000;
pub const DEFAULT_SEMANTIC_HIDDEN: usize = 750;

/// Parameters of the embedding model.
///
/// Shapes: `w_v` is l x d (the decoder applies its transpose), `w_s1` is
/// hidden x k, `w_s2` is l x hidden, `w_c` is C x l with C the classifier
/// width (seen classes inductively, seen + unseen transductively).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedModel {
    pub w_v: Matrix,
    pub b_enc: Matrix,
    pub b_dec: Matrix,
    pub w_s1: Matrix,
    pub b_s1: Matrix,
    pub w_s2: Matrix,
    pub b_s2: Matrix,
    pub w_c: Matrix,
    pub b_c: Matrix,
}

fn fan_uniform(rows: usize, cols: usize, fan_in: usize, fan_out: usize, positive: bool, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let lo = if positive { 0.0 } else { -bound };
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(lo..bound)).collect(),
    )
    .expect("sized iterator")
}

impl EmbedModel {
    /// Fresh model with fan-scaled uniform weights and zero biases. Each
    /// parameter draws from its own forked stream so models that differ only
    /// in classifier width share every other parameter bit-for-bit.
    pub fn new(
        visual_dim: usize,
        proto_dim: usize,
        latent_dim: usize,
        semantic_hidden: usize,
        num_classes: usize,
        rng: &RunRng,
    ) -> Self {
        let (d, k, l, h, c) = (visual_dim, proto_dim, latent_dim, semantic_hidden, num_classes);
        EmbedModel {
            w_v: fan_uniform(l, d, d, l, true, &mut rng.fork("init/w_v")),
            b_enc: Matrix::zeros(1, l),
            b_dec: Matrix::zeros(1, d),
            w_s1: fan_uniform(h, k, k, h, true, &mut rng.fork("init/w_s1")),
            b_s1: Matrix::zeros(1, h),
            w_s2: fan_uniform(l, h, h, l, true, &mut rng.fork("init/w_s2")),
            b_s2: Matrix::zeros(1, l),
            w_c: fan_uniform(c, l, l, c, false, &mut rng.fork("init/w_c")),
            b_c: Matrix::zeros(1, c),
        }
    }

    pub fn visual_dim(&self) -> usize {
        self.w_v.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.w_v.rows()
    }

    pub fn proto_dim(&self) -> usize {
        self.w_s1.cols()
    }

    pub fn semantic_hidden(&self) -> usize {
        self.w_s1.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w_c.rows()
    }

    /// Named parameter views, in checkpoint order.
    pub fn params(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("embed.w_v", &self.w_v),
            ("embed.b_enc", &self.b_enc),
            ("embed.b_dec", &self.b_dec),
            ("embed.w_s1", &self.w_s1),
            ("embed.b_s1", &self.b_s1),
            ("embed.w_s2", &self.w_s2),
            ("embed.b_s2", &self.b_s2),
            ("embed.w_c", &self.w_c),
            ("embed.b_c", &self.b_c),
        ]
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        vec![
            ("embed.w_v", &mut self.w_v),
            ("embed.b_enc", &mut self.b_enc),
            ("embed.b_dec", &mut self.b_dec),
            ("embed.w_s1", &mut self.w_s1),
            ("embed.b_s1", &mut self.b_s1),
            ("embed.w_s2", &mut self.w_s2),
            ("embed.b_s2", &mut self.b_s2),
            ("embed.w_c", &mut self.w_c),
            ("embed.b_c", &mut self.b_c),
        ]
    }

    fn check_cols(&self, m: &Matrix, want: usize, context: &'static str) -> Result<()> {
        if m.cols() != want {
            return Err(Error::ShapeMismatch {
                context,
                expected: format!("{want} columns"),
                got: format!("{}", m.cols()),
            });
        }
        Ok(())
    }

    /// Visual encoder: `ReLU(x W_v^T + b_enc)`.
    pub fn encode_visual(&self, x: &Matrix) -> Result<Matrix> {
        self.check_cols(x, self.visual_dim(), "encode_visual")?;
        Ok(relu(&x.matmul_bt(&self.w_v).add_row_broadcast(&self.b_enc)))
    }

    /// Tied decoder: `ReLU(h W_v + b_dec)`.
    pub fn decode_visual(&self, h: &Matrix) -> Result<Matrix> {
        self.check_cols(h, self.latent_dim(), "decode_visual")?;
        Ok(relu(&h.matmul(&self.w_v).add_row_broadcast(&self.b_dec)))
    }

    /// Semantic encoder: two affine layers with ReLU after each.
    pub fn encode_semantic(&self, a: &Matrix) -> Result<Matrix> {
        self.check_cols(a, self.proto_dim(), "encode_semantic")?;
        let h1 = relu(&a.matmul_bt(&self.w_s1).add_row_broadcast(&self.b_s1));
        Ok(relu(&h1.matmul_bt(&self.w_s2).add_row_broadcast(&self.b_s2)))
    }

    /// Classifier logits over latent features: `h W_c^T + b_c`.
    pub fn classify_latent(&self, h: &Matrix) -> Result<Matrix> {
        self.check_cols(h, self.latent_dim(), "classify_latent")?;
        Ok(h.matmul_bt(&self.w_c).add_row_broadcast(&self.b_c))
    }
}

/// Gradient accumulator mirroring [`EmbedModel`] shapes.
#[derive(Debug, Clone)]
pub struct EmbedGrads {
    pub w_v: Matrix,
    pub b_enc: Matrix,
    pub b_dec: Matrix,
    pub w_s1: Matrix,
    pub b_s1: Matrix,
    pub w_s2: Matrix,
    pub b_s2: Matrix,
    pub w_c: Matrix,
    pub b_c: Matrix,
}

impl EmbedGrads {
    pub fn zeros_like(m: &EmbedModel) -> Self {
        EmbedGrads {
            w_v: Matrix::zeros(m.w_v.rows(), m.w_v.cols()),
            b_enc: Matrix::zeros(1, m.b_enc.cols()),
            b_dec: Matrix::zeros(1, m.b_dec.cols()),
            w_s1: Matrix::zeros(m.w_s1.rows(), m.w_s1.cols()),
            b_s1: Matrix::zeros(1, m.b_s1.cols()),
            w_s2: Matrix::zeros(m.w_s2.rows(), m.w_s2.cols()),
            b_s2: Matrix::zeros(1, m.b_s2.cols()),
            w_c: Matrix::zeros(m.w_c.rows(), m.w_c.cols()),
            b_c: Matrix::zeros(1, m.b_c.cols()),
        }
    }

    /// `self += scale * other`.
    pub fn scaled_add_assign(&mut self, scale: f64, other: &EmbedGrads) {
        self.w_v.scaled_add_assign(scale, &other.w_v);
        self.b_enc.scaled_add_assign(scale, &other.b_enc);
        self.b_dec.scaled_add_assign(scale, &other.b_dec);
        self.w_s1.scaled_add_assign(scale, &other.w_s1);
        self.b_s1.scaled_add_assign(scale, &other.b_s1);
        self.w_s2.scaled_add_assign(scale, &other.w_s2);
        self.b_s2.scaled_add_assign(scale, &other.b_s2);
        self.w_c.scaled_add_assign(scale, &other.w_c);
        self.b_c.scaled_add_assign(scale, &other.b_c);
    }

    pub fn fields(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("embed.w_v", &self.w_v),
            ("embed.b_enc", &self.b_enc),
            ("embed.b_dec", &self.b_dec),
            ("embed.w_s1", &self.w_s1),
            ("embed.b_s1", &self.b_s1),
            ("embed.w_s2", &self.w_s2),
            ("embed.b_s2", &self.b_s2),
            ("embed.w_c", &self.w_c),
            ("embed.b_c", &self.b_c),
        ]
    }
}
