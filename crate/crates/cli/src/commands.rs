use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;
use sirtnet::dataio::{
    apply_poisson_noise, attenuation_scale, build_dataset, derive_seed, generate_phantoms,
    import_image, read_sinogram, simulate_low_dose, write_image, write_pgm, write_sinogram,
    DatasetManifest, LoadedSample, NoiseModel, Split,
};
use sirtnet::metrics::{
    aggregate_report, format_table, sinogram_fidelity, write_csv, MetricEntry, MetricReport, Space,
};
use sirtnet::network::read_checkpoint;
use sirtnet::pipeline::{
    reconstruct as pipeline_reconstruct, resume_pipeline, BlockKind, PipelineCheckpoint,
    Reconstruction, CONFIG_FILE,
};
use sirtnet::solvers::{cgls, fbp, sirt_run};
use sirtnet::{ProjectionGeometry, Sinogram};

use crate::config::RunConfig;
use crate::{config_err, CliError, CliResult, Method};

pub fn phantoms(config: &RunConfig) -> CliResult {
    let geom = config.geometry().map_err(config_err)?;
    let spec = config.phantom_spec();
    let pool = generate_phantoms(
        &spec,
        config.phantoms.count,
        derive_seed(config.seed, "phantoms", 0),
    )?;
    let test = if config.phantoms.test_count > 0 {
        generate_phantoms(
            &spec,
            config.phantoms.test_count,
            derive_seed(config.seed, "test-phantoms", 0),
        )?
    } else {
        Vec::new()
    };
    let noise = config.noise.dataset_i0.map(|i0| NoiseModel {
        i0,
        seed: derive_seed(config.seed, "dataset-noise", 0),
    });
    let dir = config.dataset_dir();
    let manifest = build_dataset(
        &dir,
        &pool,
        &test,
        &geom,
        noise,
        derive_seed(config.seed, "split", 0),
        config.phantoms.train_ratio,
    )?;
    config.copy_into(&dir)?;
    println!(
        "wrote {} train, {} validation and {} test samples to {}",
        manifest.train.len(),
        manifest.validation.len(),
        manifest.test.len(),
        dir.display()
    );
    Ok(())
}

pub fn simulate(
    config: &RunConfig,
    input: &Path,
    output: &Path,
    i0: Option<f64>,
    mu_scale: Option<f64>,
) -> CliResult {
    let geom = config.geometry().map_err(config_err)?;
    let image = import_image(input, geom.image_size())?;
    let mut sino = simulate_low_dose(&image, &geom)?;
    if let Some(i0) = i0 {
        let mu = mu_scale.unwrap_or_else(|| attenuation_scale([&sino]));
        let model = NoiseModel {
            i0,
            seed: derive_seed(config.seed, "simulate", 0),
        };
        sino = apply_poisson_noise(&sino, &model, mu).map_err(config_err)?;
    }
    write_sinogram(output, &sino)?;
    println!(
        "wrote {}×{} sinogram to {}",
        sino.n_angles(),
        sino.n_detectors(),
        output.display()
    );
    Ok(())
}

fn load_dataset(config: &RunConfig) -> CliResult<(PathBuf, DatasetManifest)> {
    let dir = config.dataset_dir();
    let manifest = DatasetManifest::load(&dir).with_context(|| {
        format!(
            "loading dataset from {} (run `sirtnet phantoms` first)",
            dir.display()
        )
    })?;
    let geom = config.geometry().map_err(config_err)?;
    if manifest.geometry != geom {
        return Err(config_err(anyhow!(
            "dataset at {} was simulated with a different geometry than the config",
            dir.display()
        )));
    }
    Ok((dir, manifest))
}

pub fn train(config: &RunConfig) -> CliResult {
    let (data, manifest) = load_dataset(config)?;
    let train = manifest.load_split(&data, Split::Train)?;
    let val = manifest.load_split(&data, Split::Validation)?;
    let pipeline = config.pipeline_config();
    let out = config.checkpoint_dir();

    let start = if out.join(CONFIG_FILE).exists() {
        let existing = PipelineCheckpoint::load(&out)?;
        if existing.config != pipeline || existing.geometry != manifest.geometry {
            return Err(config_err(anyhow!(
                "{} holds a checkpoint trained with different settings; refusing to resume",
                out.display()
            )));
        }
        if existing.is_complete() {
            println!(
                "{} is already complete ({} networks)",
                out.display(),
                existing.networks.len()
            );
            return Ok(());
        }
        println!("resuming after stage {}", existing.networks.len());
        existing
    } else {
        PipelineCheckpoint::empty(pipeline, manifest.geometry.clone())
    };
    config.copy_into(&out)?;
    let done = resume_pipeline(&train, &val, start, |ck| {
        ck.save(&out)?;
        let l = ck.losses.last().expect("a stage just finished");
        println!(
            "stage {}: train {:.4e} -> {:.4e}, val {:.4e} -> {:.4e}",
            ck.networks.len(),
            l.train[0],
            l.train[l.train.len() - 1],
            l.val[0],
            l.val[l.val.len() - 1]
        );
        Ok(())
    })?;
    done.save(&out)?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn load_pipeline(path: &Path) -> CliResult<PipelineCheckpoint> {
    if !path.join(CONFIG_FILE).exists() {
        return Err(CliError::Runtime(anyhow!(
            "no pipeline checkpoint at {} (run `sirtnet train` first)",
            path.display()
        )));
    }
    let ck = PipelineCheckpoint::load(path)?;
    if !ck.is_complete() {
        return Err(CliError::Runtime(anyhow!(
            "checkpoint at {} has {} of {} networks; finish training first",
            path.display(),
            ck.networks.len(),
            ck.config.max_net
        )));
    }
    Ok(ck)
}

struct Solver<'a> {
    geom: &'a ProjectionGeometry,
    sirt_iters: usize,
    cgls_iters: usize,
    pipeline: Option<&'a PipelineCheckpoint>,
}

impl Solver<'_> {
    fn run(&self, method: Method, p: &Sinogram) -> sirtnet::Result<Reconstruction> {
        let plain = |image| Reconstruction {
            image,
            intermediates: Vec::new(),
        };
        Ok(match method {
            Method::Fbp => plain(fbp(p, self.geom)?),
            Method::Sirt => plain(sirt_run(
                &self.geom.blank_image(),
                p,
                self.geom,
                self.sirt_iters,
            )?),
            Method::Cgls => plain(cgls(p, self.geom, self.cgls_iters)?),
            Method::Pipeline => {
                pipeline_reconstruct(p, self.geom, self.pipeline.expect("checkpoint loaded"))?
            }
        })
    }
}

fn block_name(kind: BlockKind, stage: usize) -> String {
    match kind {
        BlockKind::Sirt => format!("sirt-{stage}"),
        BlockKind::Dnn => format!("dnn-{stage}"),
    }
}

pub struct ReconstructArgs {
    pub method: Method,
    pub input: PathBuf,
    pub output: PathBuf,
    pub iters: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub intermediates: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
}

pub fn reconstruct(config: &RunConfig, args: ReconstructArgs) -> CliResult {
    let p = read_sinogram(&args.input)?;
    let ck = match args.method {
        Method::Pipeline => Some(load_pipeline(
            &args
                .checkpoint
                .clone()
                .unwrap_or_else(|| config.checkpoint_dir()),
        )?),
        _ => None,
    };
    let geom = match &ck {
        Some(ck) => ck.geometry.clone(),
        None => config.geometry().map_err(config_err)?,
    };
    geom.check_sinogram(&p)
        .with_context(|| format!("{} does not match the geometry", args.input.display()))?;
    let solver = Solver {
        geom: &geom,
        sirt_iters: args.iters.unwrap_or_else(|| config.solvers.sirt_iters),
        cgls_iters: args.iters.unwrap_or_else(|| config.solvers.cgls_iters),
        pipeline: ck.as_ref(),
    };
    if args.method == Method::Cgls && solver.cgls_iters == 0 {
        return Err(config_err(anyhow!("cgls needs at least one iteration")));
    }
    let r = solver.run(args.method, &p)?;
    write_image(&args.output, &r.image)?;
    if let Some(pgm) = &args.pgm {
        write_pgm(pgm, &r.image, 0.0, 1.0)?;
    }
    if let Some(dir) = &args.intermediates {
        for (k, block) in r.intermediates.iter().enumerate() {
            let name = format!("{:02}_{}.f32", k + 1, block_name(block.kind, block.stage));
            write_image(dir.join(name), &block.image)?;
        }
        config.copy_into(dir)?;
    }
    println!(
        "wrote {} reconstruction to {}",
        args.method.name(),
        args.output.display()
    );
    Ok(())
}

struct EvalContext<'a> {
    manifest: DatasetManifest,
    test: Vec<LoadedSample>,
    pipeline: Option<PipelineCheckpoint>,
    config: &'a RunConfig,
}

impl<'a> EvalContext<'a> {
    fn load(config: &'a RunConfig, methods: &[Method]) -> CliResult<Self> {
        if methods.is_empty() {
            return Err(config_err(anyhow!("no methods selected")));
        }
        let (dir, manifest) = load_dataset(config)?;
        let test = manifest.load_split(&dir, Split::Test)?;
        if test.is_empty() {
            return Err(CliError::Runtime(anyhow!(
                "dataset at {} has an empty test list",
                dir.display()
            )));
        }
        let pipeline = if methods.contains(&Method::Pipeline) {
            let ck = load_pipeline(&config.checkpoint_dir())?;
            if ck.geometry != manifest.geometry {
                return Err(config_err(anyhow!(
                    "checkpoint geometry differs from the dataset geometry"
                )));
            }
            Some(ck)
        } else {
            None
        };
        Ok(EvalContext {
            manifest,
            test,
            pipeline,
            config,
        })
    }

    fn solver(&self) -> Solver<'_> {
        Solver {
            geom: &self.manifest.geometry,
            sirt_iters: self.config.solvers.sirt_iters,
            cgls_iters: self.config.solvers.cgls_iters,
            pipeline: self.pipeline.as_ref(),
        }
    }
}

fn write_reports(dir: &Path, name: &str, entries: &[MetricEntry]) -> CliResult<Vec<MetricReport>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_csv(dir.join(format!("{name}.csv")), entries)?;
    Ok(aggregate_report(entries)?)
}

pub fn evaluate(config: &RunConfig, methods: &[Method], sweep: bool) -> CliResult {
    let ctx = EvalContext::load(config, methods)?;
    let solver = ctx.solver();
    let geom = &ctx.manifest.geometry;

    let per_sample: Vec<(Vec<MetricEntry>, Vec<MetricEntry>, Vec<MetricEntry>)> = ctx
        .test
        .par_iter()
        .map(|s| -> sirtnet::Result<_> {
            let (mut image, mut sino, mut blocks) = (Vec::new(), Vec::new(), Vec::new());
            for &m in methods {
                let r = solver.run(m, &s.sinogram)?;
                image.push(MetricEntry::compare(
                    m.name(),
                    Space::Image,
                    &s.id,
                    &r.image,
                    &s.image,
                    1.0,
                )?);
                sino.push(sinogram_fidelity(
                    m.name(),
                    &s.id,
                    &r.image,
                    &s.sinogram,
                    geom,
                )?);
                for b in &r.intermediates {
                    let name = format!("{}:{}", m.name(), block_name(b.kind, b.stage));
                    blocks.push(MetricEntry::compare(
                        &name,
                        Space::Image,
                        &s.id,
                        &b.image,
                        &s.image,
                        1.0,
                    )?);
                    blocks.push(sinogram_fidelity(
                        &name,
                        &s.id,
                        &b.image,
                        &s.sinogram,
                        geom,
                    )?);
                }
            }
            Ok((image, sino, blocks))
        })
        .collect::<sirtnet::Result<_>>()?;

    let mut image = Vec::new();
    let mut sino = Vec::new();
    let mut blocks = Vec::new();
    for (i, s, b) in per_sample {
        image.extend(i);
        sino.extend(s);
        blocks.extend(b);
    }
    // Group rows by method for readable CSVs.
    let by_method = |v: &mut Vec<MetricEntry>| {
        v.sort_by_key(|e| methods.iter().position(|m| e.method.starts_with(m.name())))
    };
    by_method(&mut image);
    by_method(&mut sino);

    let dir = config.reports_dir();
    let mut summary = String::new();
    summary += "Image space\n";
    summary += &format_table(&write_reports(&dir, "image", &image)?);
    summary += "\nSinogram space\n";
    summary += &format_table(&write_reports(&dir, "sinogram", &sino)?);
    if !blocks.is_empty() {
        summary += "\nPipeline blocks\n";
        summary += &format_table(&write_reports(&dir, "intermediates", &blocks)?);
    }
    let path = dir.join("summary.txt");
    fs::write(&path, &summary).with_context(|| format!("writing {}", path.display()))?;
    config.copy_into(&dir)?;
    print!("{summary}");

    if sweep {
        sweep_with(&ctx, methods)?;
    }
    Ok(())
}

pub fn sweep_noise(config: &RunConfig, methods: &[Method]) -> CliResult {
    let ctx = EvalContext::load(config, methods)?;
    config.copy_into(&config.reports_dir())?;
    sweep_with(&ctx, methods)
}

#[derive(Serialize)]
struct SweepRow<'a> {
    i0: f64,
    method: &'a str,
    n: usize,
    psnr_mean: f64,
    psnr_std: f64,
    mse_mean: f64,
    mse_std: f64,
    ssim_mean: f64,
    ssim_std: f64,
}

fn sweep_with(ctx: &EvalContext<'_>, methods: &[Method]) -> CliResult {
    let config = ctx.config;
    if config.noise.sweep_i0.is_empty() {
        return Err(config_err(anyhow!("noise.sweep_i0 is empty")));
    }
    let solver = ctx.solver();
    let dir = config.reports_dir().join("sweep");
    let mut all_reports = Vec::new();
    for (k, &i0) in config.noise.sweep_i0.iter().enumerate() {
        let entries: Vec<Vec<MetricEntry>> = ctx
            .test
            .par_iter()
            .enumerate()
            .map(|(j, s)| -> sirtnet::Result<_> {
                let model = NoiseModel {
                    i0,
                    seed: derive_seed(config.seed, &format!("sweep-{k}"), j as u64),
                };
                let noisy = apply_poisson_noise(&s.sinogram, &model, ctx.manifest.mu_scale)?;
                methods
                    .iter()
                    .map(|&m| {
                        let r = solver.run(m, &noisy)?;
                        MetricEntry::compare(m.name(), Space::Image, &s.id, &r.image, &s.image, 1.0)
                    })
                    .collect()
            })
            .collect::<sirtnet::Result<_>>()?;
        let mut flat: Vec<MetricEntry> = entries.into_iter().flatten().collect();
        flat.sort_by_key(|e| methods.iter().position(|m| e.method == m.name()));
        let reports = write_reports(&dir, &format!("i0_{i0:e}"), &flat)?;
        println!("I0 = {i0:e}");
        print!("{}", format_table(&reports));
        all_reports.push((i0, reports));
    }

    let path = dir.join("summary.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for (i0, reports) in &all_reports {
        for r in reports {
            w.serialize(SweepRow {
                i0: *i0,
                method: &r.method,
                n: r.entries.len(),
                psnr_mean: r.psnr_db.mean,
                psnr_std: r.psnr_db.std,
                mse_mean: r.mse.mean,
                mse_std: r.mse.std,
                ssim_mean: r.ssim.mean,
                ssim_std: r.ssim.std,
            })
            .map_err(anyhow::Error::from)?;
        }
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct StageSummary {
    stage: usize,
    n_params: usize,
    epochs: usize,
    first_val_loss: Option<f64>,
    final_train_loss: Option<f64>,
    final_val_loss: Option<f64>,
}

pub fn inspect_checkpoint(path: &Path) -> CliResult {
    let text = if path.is_dir() {
        let ck = PipelineCheckpoint::load(path)?;
        let stages: Vec<StageSummary> = ck
            .networks
            .iter()
            .zip(&ck.losses)
            .enumerate()
            .map(|(s, (net, l))| StageSummary {
                stage: s + 1,
                n_params: net.n_params(),
                epochs: l.train.len(),
                first_val_loss: l.val.first().copied(),
                final_train_loss: l.train.last().copied(),
                final_val_loss: l.val.last().copied(),
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "pipeline": ck.config,
            "geometry": ck.geometry,
            "complete": ck.is_complete(),
            "stages": stages,
        }))
        .map_err(anyhow::Error::from)?
    } else if path.exists() {
        let (header, _) = read_checkpoint(path)?;
        serde_json::to_string_pretty(&header).map_err(anyhow::Error::from)?
    } else {
        return Err(CliError::Runtime(anyhow!(
            "{} does not exist",
            path.display()
        )));
    };
    println!("{text}");
    Ok(())
}
