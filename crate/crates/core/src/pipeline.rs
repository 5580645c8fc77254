//! Interleaved SIRT and network reconstruction.
//!
//! Inference alternates `N` SIRT iterations with one network correction
//! `x ← x + net(x)`, once per trained network, optionally followed by a last
//! SIRT block. Training fits the networks one after another: network `s` sees
//! the reconstruction produced by the frozen networks `1..s` plus its own SIRT
//! block, and regresses the residual `gt − x`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{derive_seed, LoadedSample};
use crate::error::{Error, Result};
use crate::geometry::{Image, ProjectionGeometry, Sinogram};
use crate::network::{
    evaluate_loss, read_checkpoint, train_epoch, write_checkpoint, AdamConfig, AdamState,
    MsdNetwork, Sample, TrainingMeta,
};
use crate::solvers::{SirtState, SirtWeights};

pub const CONFIG_FILE: &str = "config.json";
pub const LOSSES_FILE: &str = "losses.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// SIRT iterations per block.
    pub n_sirt: usize,
    /// Number of networks, i.e. regularisation steps.
    pub max_net: usize,
    /// Epochs per network.
    pub max_epochs: usize,
    /// Run one more SIRT block after the last network.
    pub final_sirt: bool,
    pub depth: usize,
    /// Dilations cycle through `1..=p`.
    pub p: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Half-width of the uniform initialisation of the first network.
    pub init_range: f64,
    pub seed: u64,
    /// Keep each sample's reconstruction between stages instead of replaying
    /// the frozen prefix. Both give identical inputs.
    pub cache_inputs: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_sirt: 10,
            max_net: 10,
            max_epochs: 100,
            final_sirt: true,
            depth: 51,
            p: 10,
            adam: AdamConfig::default(),
            batch_size: 10,
            init_range: 0.25,
            seed: 0,
            cache_inputs: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("pipeline config: {what}")));
        if self.n_sirt == 0 {
            return bad("n_sirt must be at least 1");
        }
        if self.max_net == 0 {
            return bad("max_net must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.depth == 0 || self.p == 0 {
            return bad("depth and p must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.init_range.is_finite() && self.init_range > 0.0) {
            return bad("init_range must be positive");
        }
        let a = &self.adam;
        if !(a.lr >= 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0)
        {
            return bad("adam hyperparameters out of range");
        }
        Ok(())
    }
}

/// Per-epoch losses of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLosses {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    pipeline: PipelineConfig,
    geometry: ProjectionGeometry,
}

/// Trained networks in stage order, with the settings and loss curves that produced them.
#[derive(Debug, Clone)]
pub struct PipelineCheckpoint {
    pub config: PipelineConfig,
    pub geometry: ProjectionGeometry,
    pub networks: Vec<MsdNetwork<f32>>,
    pub losses: Vec<StageLosses>,
}

impl PipelineCheckpoint {
    /// A checkpoint with no networks yet.
    pub fn empty(config: PipelineConfig, geometry: ProjectionGeometry) -> Self {
        PipelineCheckpoint {
            config,
            geometry,
            networks: Vec::new(),
            losses: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.networks.len() == self.config.max_net
    }

    /// Writes `config.json`, `model_XX.msd` per network and `losses.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let cfg = dir.join(CONFIG_FILE);
        let doc = ConfigDoc {
            pipeline: self.config.clone(),
            geometry: self.geometry.clone(),
        };
        let text = serde_json::to_string_pretty(&doc).map_err(Error::json(&cfg))?;
        fs::write(&cfg, text).map_err(Error::io(&cfg))?;

        for (s, (net, losses)) in self.networks.iter().zip(&self.losses).enumerate() {
            let meta = TrainingMeta {
                stage: Some(s + 1),
                epochs: losses.train.len(),
                batch_size: Some(self.config.batch_size),
                final_train_loss: losses.train.last().copied(),
                final_val_loss: losses.val.last().copied(),
            };
            write_checkpoint(
                &dir.join(model_file(s + 1)),
                net,
                self.config.seed,
                self.config.adam,
                meta,
            )?;
        }

        let path = dir.join(LOSSES_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(Error::csv(&path))?;
        w.write_record(["stage", "epoch", "train_loss", "val_loss"])
            .map_err(Error::csv(&path))?;
        for (s, l) in self.losses.iter().enumerate() {
            for (e, (t, v)) in l.train.iter().zip(&l.val).enumerate() {
                w.write_record([
                    (s + 1).to_string(),
                    (e + 1).to_string(),
                    format!("{t:e}"),
                    format!("{v:e}"),
                ])
                .map_err(Error::csv(&path))?;
            }
        }
        w.flush().map_err(Error::io(&path))
    }

    /// Reads a directory written by [`PipelineCheckpoint::save`]. Missing later
    /// models are allowed, giving a partial checkpoint that training can resume.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cfg = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cfg).map_err(Error::io(&cfg))?;
        let doc: ConfigDoc = serde_json::from_str(&text).map_err(Error::json(&cfg))?;

        let mut networks = Vec::new();
        for s in 1..=doc.pipeline.max_net {
            let path = dir.join(model_file(s));
            if !path.exists() {
                break;
            }
            let (header, net) = read_checkpoint(&path)?;
            if header.depth != doc.pipeline.depth || header.p != doc.pipeline.p {
                return Err(Error::Format {
                    path,
                    reason: format!(
                        "model has depth {} and p {}, config says {} and {}",
                        header.depth, header.p, doc.pipeline.depth, doc.pipeline.p
                    ),
                });
            }
            networks.push(net);
        }

        let path = dir.join(LOSSES_FILE);
        let mut losses = vec![
            StageLosses {
                train: Vec::new(),
                val: Vec::new()
            };
            networks.len()
        ];
        if path.exists() {
            let mut r = csv::Reader::from_path(&path).map_err(Error::csv(&path))?;
            for row in r.deserialize::<(usize, usize, f64, f64)>() {
                let (stage, _, t, v) = row.map_err(Error::csv(&path))?;
                if let Some(l) = stage.checked_sub(1).and_then(|i| losses.get_mut(i)) {
                    l.train.push(t);
                    l.val.push(v);
                }
            }
        }
        Ok(PipelineCheckpoint {
            config: doc.pipeline,
            geometry: doc.geometry,
            networks,
            losses,
        })
    }
}

pub fn model_file(stage: usize) -> String {
    format!("model_{stage:02}.msd")
}

/// `gt − x`, the regression target for a network placed after `x`.
pub fn residual_target(gt: &Image, x_after_sirt: &Image) -> Result<Image> {
    gt.add_scaled(x_after_sirt, -1.0)
}

/// `x + net(x)`: the corrected starting point for the next SIRT block.
pub fn apply_regularization(x: &Image, net: &MsdNetwork<f32>) -> Image {
    x.add_scaled(&net.apply(x), 1.0)
        .expect("network output matches its input shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Sirt,
    Dnn,
}

/// The image after one block of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediate {
    pub kind: BlockKind,
    /// 1-based stage; the final SIRT block has stage `MaxNet + 1`.
    pub stage: usize,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: Image,
    pub intermediates: Vec<Intermediate>,
}

fn sirt_block(
    x: Image,
    p: &Sinogram,
    geom: &ProjectionGeometry,
    weights: &SirtWeights,
    n: usize,
) -> Result<Image> {
    let mut state = SirtState::with_weights(geom, p, x, weights.clone())?;
    state.run(n);
    Ok(state.into_image())
}

/// Runs the alternation with explicit networks. With no networks and
/// `final_sirt` this is plain SIRT for `n_sirt` iterations.
pub fn reconstruct_with(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    networks: &[MsdNetwork<f32>],
    n_sirt: usize,
    final_sirt: bool,
    weights: Option<&SirtWeights>,
) -> Result<Reconstruction> {
    geom.check_sinogram(p)?;
    let owned;
    let weights = match weights {
        Some(w) => w,
        None => {
            owned = SirtWeights::new(geom);
            &owned
        }
    };
    let mut x = geom.blank_image();
    let mut intermediates = Vec::with_capacity(2 * networks.len() + 1);
    for (s, net) in networks.iter().enumerate() {
        x = sirt_block(x, p, geom, weights, n_sirt)?;
        intermediates.push(Intermediate {
            kind: BlockKind::Sirt,
            stage: s + 1,
            image: x.clone(),
        });
        x = apply_regularization(&x, net);
        intermediates.push(Intermediate {
            kind: BlockKind::Dnn,
            stage: s + 1,
            image: x.clone(),
        });
    }
    if final_sirt {
        x = sirt_block(x, p, geom, weights, n_sirt)?;
        intermediates.push(Intermediate {
            kind: BlockKind::Sirt,
            stage: networks.len() + 1,
            image: x.clone(),
        });
    }
    Ok(Reconstruction {
        image: x,
        intermediates,
    })
}

/// Reconstructs `p` with every network of `checkpoint`.
pub fn reconstruct(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    checkpoint: &PipelineCheckpoint,
) -> Result<Reconstruction> {
    if checkpoint.geometry != *geom {
        return Err(Error::InvalidInput(
            "checkpoint was trained for a different projection geometry".into(),
        ));
    }
    let c = &checkpoint.config;
    if c.n_sirt == 0 {
        return Err(Error::InvalidInput("n_sirt must be at least 1".into()));
    }
    reconstruct_with(p, geom, &checkpoint.networks, c.n_sirt, c.final_sirt, None)
}

/// Network inputs of stage `networks.len() + 1`: every SIRT block and the
/// frozen networks before it, then this stage's SIRT block.
pub fn stage_inputs(
    samples: &[LoadedSample],
    geom: &ProjectionGeometry,
    networks: &[MsdNetwork<f32>],
    n_sirt: usize,
) -> Result<Vec<Image>> {
    let weights = SirtWeights::new(geom);
    samples
        .par_iter()
        .map(|s| {
            reconstruct_with(&s.sinogram, geom, networks, n_sirt, true, Some(&weights))
                .map(|r| r.image)
        })
        .collect()
}

fn to_training_set(samples: &[LoadedSample], inputs: Vec<Image>) -> Result<Vec<Sample>> {
    samples
        .iter()
        .zip(inputs)
        .map(|(s, x)| {
            Ok(Sample {
                target: residual_target(&s.image, &x)?,
                input: x,
            })
        })
        .collect()
}

/// Trains every network from scratch. See [`resume_pipeline`].
pub fn train_pipeline(
    train: &[LoadedSample],
    val: &[LoadedSample],
    geom: &ProjectionGeometry,
    config: &PipelineConfig,
) -> Result<PipelineCheckpoint> {
    resume_pipeline(
        train,
        val,
        PipelineCheckpoint::empty(config.clone(), geom.clone()),
        |_| Ok(()),
    )
}

/// Trains the stages missing from `checkpoint`, calling `on_stage` after each
/// finished stage (for example to save progress).
pub fn resume_pipeline(
    train: &[LoadedSample],
    val: &[LoadedSample],
    mut checkpoint: PipelineCheckpoint,
    mut on_stage: impl FnMut(&PipelineCheckpoint) -> Result<()>,
) -> Result<PipelineCheckpoint> {
    let config = checkpoint.config.clone();
    let geom = checkpoint.geometry.clone();
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput(
            "training and validation sets must both be nonempty".into(),
        ));
    }
    if checkpoint.networks.len() > config.max_net
        || checkpoint.losses.len() != checkpoint.networks.len()
    {
        return Err(Error::InvalidInput(
            "inconsistent partial checkpoint".into(),
        ));
    }
    for s in train.iter().chain(val) {
        geom.check_image(&s.image)?;
        geom.check_sinogram(&s.sinogram)?;
    }

    let weights = SirtWeights::new(&geom);
    let mut cached: Option<(Vec<Image>, Vec<Image>)> = None;

    for stage in checkpoint.networks.len() + 1..=config.max_net {
        let (train_x, val_x) = match cached.take() {
            Some((tx, vx)) if config.cache_inputs => {
                let advance = |xs: Vec<Image>, set: &[LoadedSample]| -> Result<Vec<Image>> {
                    xs.into_par_iter()
                        .zip(set.par_iter())
                        .map(|(x, s)| sirt_block(x, &s.sinogram, &geom, &weights, config.n_sirt))
                        .collect()
                };
                (advance(tx, train)?, advance(vx, val)?)
            }
            _ => (
                stage_inputs(train, &geom, &checkpoint.networks, config.n_sirt)?,
                stage_inputs(val, &geom, &checkpoint.networks, config.n_sirt)?,
            ),
        };
        let train_set = to_training_set(train, train_x)?;
        let val_set = to_training_set(val, val_x)?;

        let mut net = match checkpoint.networks.last() {
            Some(prev) => prev.clone(),
            None => {
                let mut net = MsdNetwork::zeros(config.depth, config.p)?;
                let r = config.init_range;
                net.init_uniform(-r, r, derive_seed(config.seed, "init", 0))?;
                net
            }
        };
        let mut adam = AdamState::new(config.adam, net.n_params());
        let mut losses = StageLosses {
            train: Vec::with_capacity(config.max_epochs),
            val: Vec::with_capacity(config.max_epochs),
        };
        for epoch in 1..=config.max_epochs {
            let seed = derive_seed(config.seed, &format!("shuffle-{stage}"), epoch as u64);
            let t = train_epoch(&mut net, &train_set, config.batch_size, &mut adam, seed)?;
            let v = evaluate_loss(&net, &val_set)?;
            if !t.is_finite() || !v.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { stage, epoch });
            }
            log::info!("stage {stage} epoch {epoch}: train {t:.4e} val {v:.4e}");
            losses.train.push(t);
            losses.val.push(v);
        }

        if config.cache_inputs {
            let correct = |set: &[Sample]| -> Vec<Image> {
                set.par_iter()
                    .map(|s| apply_regularization(&s.input, &net))
                    .collect()
            };
            cached = Some((correct(&train_set), correct(&val_set)));
        }
        checkpoint.networks.push(net);
        checkpoint.losses.push(losses);
        on_stage(&checkpoint)?;
    }
    Ok(checkpoint)
}
