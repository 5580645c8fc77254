//! Dataset assembly: normalised images, their sinograms, a seeded
//! train/validation split and a held-out test list, described by `manifest.json`.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/images/<id>.f32     (+ .json sidecar)
//! <dir>/sinograms/<id>.f32  (+ .json sidecar)
//! ```

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::files::{read_image, read_sinogram, write_image, write_sinogram};
use super::noise::{apply_poisson_noise, attenuation_scale, NoiseModel};
use super::{derive_seed, simulate_low_dose};
use crate::error::{Error, Result};
use crate::geometry::{Image, ProjectionGeometry, Sinogram};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Affine map `normalised = (raw − offset)·scale` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        offset: 0.0,
        scale: 1.0,
    };

    /// Identity when every value already lies in `[0, 1]`, global min-max otherwise.
    pub fn fit(images: &[Image]) -> Self {
        let (lo, hi) = images
            .iter()
            .flat_map(|i| i.as_slice())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            });
        if lo >= 0.0 && hi <= 1.0 || !lo.is_finite() {
            Self::IDENTITY
        } else if hi > lo {
            Normalization {
                offset: lo,
                scale: 1.0 / (hi - lo),
            }
        } else {
            Normalization {
                offset: lo,
                scale: 1.0,
            }
        }
    }

    pub fn apply(&self, image: &Image) -> Image {
        let (o, s) = (self.offset, self.scale);
        image.map(|v| ((v as f64 - o) * s) as f32)
    }

    pub fn invert(&self, image: &Image) -> Image {
        let (o, s) = (self.offset, self.scale);
        image.map(|v| (v as f64 / s + o) as f32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One sample; paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub image: String,
    pub sinogram: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub geometry: ProjectionGeometry,
    pub normalization: Normalization,
    pub split_seed: u64,
    pub train_ratio: f64,
    /// Attenuation scale for Poisson noise, fitted on the clean sinograms of every sample.
    pub mu_scale: f64,
    /// Noise baked into the stored sinograms, if any.
    pub noise: Option<NoiseModel>,
    pub train: Vec<DatasetEntry>,
    pub validation: Vec<DatasetEntry>,
    pub test: Vec<DatasetEntry>,
}

/// A sample read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSample {
    pub id: String,
    pub image: Image,
    pub sinogram: Sinogram,
}

/// Normalises `images` and `test_images`, simulates their sinograms, splits
/// `images` into train/validation with `round(train_ratio·N)` training samples,
/// and writes everything plus the manifest under `dir`.
pub fn build_dataset(
    dir: impl AsRef<Path>,
    images: &[Image],
    test_images: &[Image],
    geom: &ProjectionGeometry,
    noise: Option<NoiseModel>,
    split_seed: u64,
    train_ratio: f64,
) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    if images.is_empty() {
        return Err(Error::InvalidInput(
            "dataset needs at least one image".into(),
        ));
    }
    if !(train_ratio > 0.0 && train_ratio <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "train ratio must lie in (0, 1], got {train_ratio}"
        )));
    }
    for img in images.iter().chain(test_images) {
        geom.check_image(img)?;
    }

    let all: Vec<&Image> = images.iter().chain(test_images).collect();
    let normalization = Normalization::fit(&all.iter().map(|&i| i.clone()).collect::<Vec<_>>());
    let normalised: Vec<Image> = all.iter().map(|i| normalization.apply(i)).collect();
    let clean: Vec<Sinogram> = normalised
        .iter()
        .map(|i| simulate_low_dose(i, geom))
        .collect::<Result<_>>()?;
    let mu_scale = attenuation_scale(&clean);

    let mut entries = Vec::with_capacity(all.len());
    for (k, (img, sino)) in normalised.iter().zip(&clean).enumerate() {
        let id = if k < images.len() {
            format!("p{k:05}")
        } else {
            format!("t{:05}", k - images.len())
        };
        let sino = match &noise {
            Some(model) => {
                let m = NoiseModel {
                    seed: derive_seed(model.seed, "dataset-noise", k as u64),
                    ..*model
                };
                apply_poisson_noise(sino, &m, mu_scale)?
            }
            None => sino.clone(),
        };
        let entry = DatasetEntry {
            image: format!("images/{id}.f32"),
            sinogram: format!("sinograms/{id}.f32"),
            id,
        };
        write_image(dir.join(&entry.image), img)?;
        write_sinogram(dir.join(&entry.sinogram), &sino)?;
        entries.push(entry);
    }

    let test = entries.split_off(images.len());
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_train = ((train_ratio * images.len() as f64).round() as usize).clamp(1, images.len());
    let (head, tail) = order.split_at(n_train);
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| entries[i].clone()).collect::<Vec<_>>()
    };
    let manifest = DatasetManifest {
        geometry: geom.clone(),
        normalization,
        split_seed,
        train_ratio,
        mu_scale,
        noise,
        train: pick(head),
        validation: pick(tail),
        test,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

impl DatasetManifest {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(Error::json(&path))?;
        fs::write(&path, text).map_err(Error::io(&path))
    }

    /// Reads `manifest.json` from `dir` and checks every referenced file.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(Error::json(&path))?;
        manifest.validate(dir)?;
        Ok(manifest)
    }

    pub fn entries(&self, split: Split) -> &[DatasetEntry] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Every referenced file exists and matches the manifest geometry.
    pub fn validate(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for split in [Split::Train, Split::Validation, Split::Test] {
            for e in self.entries(split) {
                self.read_entry(dir, e)?;
            }
        }
        Ok(())
    }

    pub fn load_split(&self, dir: impl AsRef<Path>, split: Split) -> Result<Vec<LoadedSample>> {
        let dir = dir.as_ref();
        self.entries(split)
            .iter()
            .map(|e| self.read_entry(dir, e))
            .collect()
    }

    fn read_entry(&self, dir: &Path, e: &DatasetEntry) -> Result<LoadedSample> {
        let image_path = dir.join(&e.image);
        let image = read_image(&image_path)?;
        self.geometry
            .check_image(&image)
            .map_err(|err| Error::Format {
                path: image_path,
                reason: err.to_string(),
            })?;
        let sino_path = dir.join(&e.sinogram);
        let sinogram = read_sinogram(&sino_path)?;
        self.geometry
            .check_sinogram(&sinogram)
            .map_err(|err| Error::Format {
                path: sino_path,
                reason: err.to_string(),
            })?;
        Ok(LoadedSample {
            id: e.id.clone(),
            image,
            sinogram,
        })
    }
}
