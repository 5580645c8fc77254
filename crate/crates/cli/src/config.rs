//! The run configuration document.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sirtnet::dataio::{derive_seed, EllipsePhantomSpec};
use sirtnet::pipeline::PipelineConfig;
use sirtnet::ProjectionGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root of every random stream.
    pub seed: u64,
    /// Base for relative paths. Falls back to `$SIRTNET_DATA_DIR`, then `./data`.
    pub data_dir: Option<PathBuf>,
    pub geometry: GeometryConfig,
    pub phantoms: PhantomConfig,
    pub noise: NoiseConfig,
    pub solvers: SolverConfig,
    /// Its `seed` must be left at 0; the pipeline seed is derived from the root seed.
    pub pipeline: PipelineConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data_dir: None,
            geometry: GeometryConfig::default(),
            phantoms: PhantomConfig::default(),
            noise: NoiseConfig::default(),
            solvers: SolverConfig::default(),
            pipeline: PipelineConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub n_angles: usize,
    pub image_size: usize,
    /// Defaults to `image_size`.
    pub n_detectors: Option<usize>,
    pub detector_spacing: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            n_angles: 20,
            image_size: 64,
            n_detectors: None,
            detector_spacing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    /// Phantoms split into train and validation.
    pub count: usize,
    /// Held-out test phantoms.
    pub test_count: usize,
    pub train_ratio: f64,
    pub count_min: usize,
    pub count_max: usize,
    pub semi_axis_min: f64,
    pub semi_axis_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    pub body: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let e = EllipsePhantomSpec::default();
        PhantomConfig {
            count: 200,
            test_count: 50,
            train_ratio: 0.8,
            count_min: e.count_min,
            count_max: e.count_max,
            semi_axis_min: e.semi_axis_min,
            semi_axis_max: e.semi_axis_max,
            intensity_min: e.intensity_min,
            intensity_max: e.intensity_max,
            body: e.body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Incident intensity baked into dataset sinograms; `null` keeps them clean.
    pub dataset_i0: Option<f64>,
    /// Intensities of the noise sweep.
    pub sweep_i0: Vec<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            dataset_i0: None,
            sweep_i0: vec![1e3, 1e4, 1e5, 1e6],
        }
    }
}

/// Iteration counts of the SIRT and CGLS baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub sirt_iters: usize,
    pub cgls_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sirt_iters: 200,
            cgls_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dataset: "dataset".into(),
            checkpoint: "checkpoint".into(),
            reports: "reports".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.geometry()?;
        self.phantom_spec().validate()?;
        let p = &self.phantoms;
        if p.count == 0 {
            bail!("phantoms.count must be at least 1");
        }
        if !(p.train_ratio > 0.0 && p.train_ratio <= 1.0) {
            bail!("phantoms.train_ratio must lie in (0, 1]");
        }
        if let Some(i0) = self.noise.dataset_i0 {
            if !(i0 > 0.0 && i0.is_finite()) {
                bail!("noise.dataset_i0 must be positive");
            }
        }
        if self
            .noise
            .sweep_i0
            .iter()
            .any(|&i| !(i > 0.0 && i.is_finite()))
        {
            bail!("noise.sweep_i0 values must be positive");
        }
        if self.solvers.cgls_iters == 0 {
            bail!("solvers.cgls_iters must be at least 1");
        }
        if self.pipeline.seed != 0 {
            bail!("pipeline.seed is derived from the root seed; set `seed` instead");
        }
        self.pipeline.validate()?;
        Ok(())
    }

    pub fn geometry(&self) -> anyhow::Result<ProjectionGeometry> {
        let g = &self.geometry;
        let base = ProjectionGeometry::parallel(g.n_angles, g.image_size)?;
        Ok(base.with_detectors(g.n_detectors.unwrap_or(g.image_size), g.detector_spacing)?)
    }

    pub fn phantom_spec(&self) -> EllipsePhantomSpec {
        let p = &self.phantoms;
        EllipsePhantomSpec {
            size: self.geometry.image_size,
            count_min: p.count_min,
            count_max: p.count_max,
            semi_axis_min: p.semi_axis_min,
            semi_axis_max: p.semi_axis_max,
            intensity_min: p.intensity_min,
            intensity_max: p.intensity_max,
            body: p.body,
        }
    }

    /// Pipeline settings with the seed filled in from the root seed.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: derive_seed(self.seed, "pipeline", 0),
            ..self.pipeline.clone()
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| "data".into())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_dir().join(p)
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.resolve(&self.paths.dataset)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.resolve(&self.paths.checkpoint)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.resolve(&self.paths.reports)
    }

    /// Writes this configuration as `run_config.json` inside `dir`.
    pub fn copy_into(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("run_config.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
