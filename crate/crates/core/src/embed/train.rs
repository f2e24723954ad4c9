//! Inductive training loop: mini-batch Adam on the combined objective with
//! random same-class partner sampling for the class-encoder term.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::data::dataset::{class_means_over_rows, Dataset};
use crate::embed::loss::{total_loss, LossBreakdown, LossWeights, TrainBatch};
use crate::embed::model::{EmbedGrads, EmbedModel};
use crate::error::{Error, Result};
use crate::num::{adam_update, AdamState, Matrix};
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Inductive,
    Transductive,
}

/// Training hyperparameters shared by both settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-4,
            seed: 1,
            weights: LossWeights::default(),
            mode: TrainMode::Inductive,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidInput {
                context: "TrainConfig",
                reason: format!("batch_size must be >= 2, got {}", self.batch_size),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput {
                context: "TrainConfig",
                reason: format!("learning_rate must be positive, got {}", self.learning_rate),
            });
        }
        self.weights.validate()
    }
}

/// Mean per-term losses of one epoch. `pseudo_label_churn` is populated
/// only by the transductive loop.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub class_encoder: f64,
    pub latent_align: f64,
    pub structure_align: f64,
    pub classifier: f64,
    pub regularizer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_label_churn: Option<usize>,
}

/// Adam state for every model parameter, applied in parameter order.
pub struct EmbedOptimizer {
    states: Vec<AdamState>,
}

impl EmbedOptimizer {
    pub fn new(m: &EmbedModel, learning_rate: f64) -> Self {
        let states = m
            .params()
            .iter()
            .map(|(_, p)| AdamState::new(p.rows(), p.cols(), learning_rate))
            .collect();
        EmbedOptimizer { states }
    }

    pub fn step(&mut self, m: &mut EmbedModel, grads: &EmbedGrads) {
        let grad_fields = grads.fields();
        for (i, (_, param)) in m.params_mut().into_iter().enumerate() {
            adam_update(param, grad_fields[i].1, &mut self.states[i]);
        }
    }
}

/// Rows of the seen-train split grouped by classifier slot, plus sampling
/// helpers shared by the inductive and transductive loops.
pub(crate) struct SeenSampler {
    /// seen-train rows, in split order.
    pub rows: Vec<usize>,
    /// For each row position, the list of seen-train positions with the same class.
    class_positions: Vec<Vec<usize>>,
    /// Per-row class slot.
    pub slots: Vec<usize>,
}

impl SeenSampler {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let rows = ds.splits().seen_train.clone();
        if rows.is_empty() {
            return Err(Error::EmptyInput { context: "seen-train split" });
        }
        let mut slots = Vec::with_capacity(rows.len());
        let mut by_class: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for (pos, &r) in rows.iter().enumerate() {
            let class = ds.labels()[r];
            slots.push(ds.slot_of_class(class).expect("validated label"));
            by_class.entry(class).or_default().push(pos);
        }
        let class_positions = rows
            .iter()
            .map(|&r| by_class[&ds.labels()[r]].clone())
            .collect();
        Ok(SeenSampler {
            rows,
            class_positions,
            slots,
        })
    }

    /// Draw `count` (input, partner, slot) triples. The partner is a random
    /// same-class row, self included; a singleton class always pairs with
    /// itself.
    pub fn sample(
        &self,
        ds: &Dataset,
        count: usize,
        rng: &mut ChaCha12Rng,
    ) -> (Matrix, Matrix, Matrix, Vec<usize>) {
        let d = ds.visual_dim();
        let k = ds.proto_dim();
        let mut inputs = Matrix::zeros(count, d);
        let mut partners = Matrix::zeros(count, d);
        let mut semantics = Matrix::zeros(count, k);
        let mut slots = Vec::with_capacity(count);
        for i in 0..count {
            let pos = rng.gen_range(0..self.rows.len() as u64) as usize;
            let same = &self.class_positions[pos];
            let partner_pos = same[rng.gen_range(0..same.len() as u64) as usize];
            let row = self.rows[pos];
            let partner_row = self.rows[partner_pos];
            inputs.row_mut(i).copy_from_slice(ds.visual().row(row));
            partners.row_mut(i).copy_from_slice(ds.visual().row(partner_row));
            semantics
                .row_mut(i)
                .copy_from_slice(ds.prototypes().row(ds.labels()[row]));
            slots.push(self.slots[pos]);
        }
        (inputs, partners, semantics, slots)
    }
}

/// Seen-class structure-alignment inputs: per-class visual means over the
/// seen-train split (classes with no train rows are skipped) and their
/// ground-truth prototypes.
pub(crate) fn seen_structure_inputs(ds: &Dataset) -> Result<(Matrix, Matrix)> {
    let present: Vec<usize> = ds
        .seen_classes()
        .iter()
        .copied()
        .filter(|&c| ds.splits().seen_train.iter().any(|&r| ds.labels()[r] == c))
        .collect();
    let means = class_means_over_rows(ds.visual(), ds.labels(), &ds.splits().seen_train, &present)?;
    let protos = ds.prototypes().select_rows(&present);
    Ok((means, protos))
}

pub(crate) fn mean_stats(epoch: usize, sums: &LossBreakdown, iters: usize) -> EpochStats {
    let inv = 1.0 / iters.max(1) as f64;
    EpochStats {
        epoch,
        total: sums.total * inv,
        class_encoder: sums.class_encoder * inv,
        latent_align: sums.latent_align * inv,
        structure_align: sums.structure_align * inv,
        classifier: sums.classifier * inv,
        regularizer: sums.regularizer * inv,
        pseudo_label_churn: None,
    }
}

pub(crate) fn accumulate(sums: &mut LossBreakdown, b: &LossBreakdown) {
    sums.total += b.total;
    sums.class_encoder += b.class_encoder;
    sums.latent_align += b.latent_align;
    sums.structure_align += b.structure_align;
    sums.classifier += b.classifier;
    sums.regularizer += b.regularizer;
}

/// Train on the seen-train split only. Each iteration samples a batch of
/// seen rows with random same-class partners and takes one Adam step on
/// the combined objective; class means for the structure term are
/// recomputed once per epoch.
pub fn train_inductive(
    m: &mut EmbedModel,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if cfg.mode != TrainMode::Inductive {
        return Err(Error::InvalidInput {
            context: "train_inductive",
            reason: "config mode must be inductive".into(),
        });
    }
    if m.visual_dim() != ds.visual_dim() || m.proto_dim() != ds.proto_dim() {
        return Err(Error::ShapeMismatch {
            context: "train_inductive",
            expected: format!("model dims d={} k={}", ds.visual_dim(), ds.proto_dim()),
            got: format!("d={} k={}", m.visual_dim(), m.proto_dim()),
        });
    }
    if m.num_classes() < ds.n_seen() {
        return Err(Error::ShapeMismatch {
            context: "train_inductive",
            expected: format!("classifier width >= {}", ds.n_seen()),
            got: format!("{}", m.num_classes()),
        });
    }

    let sampler = SeenSampler::new(ds)?;
    let mut pairs_rng = RunRng::new(cfg.seed).fork("pairs");
    let mut optimizer = EmbedOptimizer::new(m, cfg.learning_rate);
    let iters_per_epoch = sampler.rows.len().div_ceil(cfg.batch_size);

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (sa_means, sa_protos) = seen_structure_inputs(ds)?;
        let mut sums = LossBreakdown::default();
        for _ in 0..iters_per_epoch {
            let (inputs, recon_targets, align_semantics, class_slots) =
                sampler.sample(ds, cfg.batch_size, &mut pairs_rng);
            let batch = TrainBatch {
                inputs,
                recon_targets,
                align_semantics,
                class_slots,
                sa_visual_means: sa_means.clone(),
                sa_prototypes: sa_protos.clone(),
            };
            let (breakdown, grads) = total_loss(m, &batch, &cfg.weights)?;
            optimizer.step(m, &grads);
            accumulate(&mut sums, &breakdown);
        }
        history.push(mean_stats(epoch, &sums, iters_per_epoch));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, SynthSpec};

    fn desk_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 64,
            learning_rate: 5e-3,
            seed: 5,
            weights: LossWeights::default(),
            mode: TrainMode::Inductive,
        }
    }

    #[test]
    fn zero_epochs_leaves_parameters_unchanged() {
        let ds = generate_synthetic(&SynthSpec::default()).unwrap();
        let mut m = EmbedModel::new(ds.visual_dim(), ds.proto_dim(), 8, 8, ds.n_seen(), &RunRng::new(2));
        let before = m.clone();
        let history = train_inductive(&mut m, &ds, &desk_config(0)).unwrap();
        assert!(history.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn fixed_seed_reproduces_loss_history() {
        let ds = generate_synthetic(&SynthSpec::default()).unwrap();
        let run = || {
            let mut m =
                EmbedModel::new(ds.visual_dim(), ds.proto_dim(), 8, 8, ds.n_seen(), &RunRng::new(2));
            train_inductive(&mut m, &ds, &desk_config(3)).unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.total, y.total);
        }
    }

    #[test]
    fn two_hundred_epochs_drops_loss_below_ten_percent() {
        let spec = SynthSpec {
            seen: 5,
            unseen: 3,
            spread: 0.05,
            separation: 5.0,
            samples_per_class: 50,
            ..SynthSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let mut m =
            EmbedModel::new(ds.visual_dim(), ds.proto_dim(), 16, 16, ds.n_seen(), &RunRng::new(2));
        let history = train_inductive(&mut m, &ds, &desk_config(200)).unwrap();
        let first = history.first().unwrap().total;
        let last = history.last().unwrap().total;
        assert!(
            last < 0.10 * first,
            "loss ratio {} (first {first}, last {last})",
            last / first
        );
    }

    #[test]
    fn rejects_transductive_mode() {
        let ds = generate_synthetic(&SynthSpec::default()).unwrap();
        let mut m = EmbedModel::new(ds.visual_dim(), ds.proto_dim(), 8, 8, ds.n_seen(), &RunRng::new(2));
        let cfg = TrainConfig { mode: TrainMode::Transductive, ..desk_config(1) };
        assert!(train_inductive(&mut m, &ds, &cfg).is_err());
    }
}
