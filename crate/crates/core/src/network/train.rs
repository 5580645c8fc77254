use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AdamState, MsdNetwork};
use crate::error::{Error, Result};
use crate::geometry::Image;

/// One training pair: network input and its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Image,
    pub target: Image,
}

/// A borrowed mini-batch of equally sized samples.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    samples: Vec<&'a Sample>,
}

impl<'a> Batch<'a> {
    pub fn new(samples: Vec<&'a Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
        let n = first.input.size();
        if samples
            .iter()
            .any(|s| s.input.size() != n || s.target.size() != n)
        {
            return Err(Error::DimensionMismatch(
                "batch inputs and targets must share one size".into(),
            ));
        }
        Ok(Batch { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mean squared error over batch, height and width.
pub fn mse_loss(outputs: &[Image], targets: &[Image]) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (o, t) in outputs.iter().zip(targets) {
        if o.size() != t.size() {
            return Err(Error::DimensionMismatch("output/target size".into()));
        }
        sum += sse(o.as_slice(), t.as_slice());
        count += o.as_slice().len();
    }
    Ok(sum / count as f64)
}

fn sse(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Batch loss and its gradient with respect to every network parameter.
///
/// Per-sample passes may run in parallel; gradients are summed in sample
/// order so the result does not depend on the thread count.
pub fn batch_gradient(net: &MsdNetwork<f32>, batch: &Batch<'_>) -> Result<(f64, Vec<f32>)> {
    let n = batch.samples[0].input.size();
    let denom = (batch.len() * n * n) as f32;
    let per_sample: Vec<Result<(f64, Vec<f32>)>> = batch
        .samples
        .par_iter()
        .map(|s| {
            let tape = net.forward(s.input.as_slice(), n)?;
            let target = s.target.as_slice();
            let err = sse(tape.output(), target);
            let dout: Vec<f32> = tape
                .output()
                .iter()
                .zip(target)
                .map(|(&o, &t)| 2.0 * (o - t) / denom)
                .collect();
            Ok((err, net.backward(&tape, &dout)?))
        })
        .collect();
    let mut loss = 0.0;
    let mut grads = vec![0.0f32; net.n_params()];
    for r in per_sample {
        let (err, g) = r?;
        loss += err;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss / denom as f64, grads))
}

/// Loss of the network over a whole dataset.
pub fn evaluate_loss(net: &MsdNetwork<f32>, dataset: &[Sample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let errs: Vec<(f64, usize)> = dataset
        .par_iter()
        .map(|s| {
            let out = net.apply(&s.input);
            (
                sse(out.as_slice(), s.target.as_slice()),
                out.as_slice().len(),
            )
        })
        .collect();
    let (sum, count) = errs
        .into_iter()
        .fold((0.0, 0), |(a, c), (e, k)| (a + e, c + k));
    Ok(sum / count as f64)
}

/// One pass over a shuffled dataset; returns the mean per-batch loss.
///
/// The final batch keeps whatever samples remain.
pub fn train_epoch(
    net: &mut MsdNetwork<f32>,
    dataset: &[Sample],
    batch_size: usize,
    adam: &mut AdamState,
    seed: u64,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut total = 0.0;
    let mut batches = 0;
    for chunk in order.chunks(batch_size) {
        let batch = Batch::new(chunk.iter().map(|&i| &dataset[i]).collect())?;
        let (loss, grads) = batch_gradient(net, &batch)?;
        adam.update(net.params_mut(), &grads)?;
        total += loss;
        batches += 1;
    }
    Ok(total / batches as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let a = Image::from_vec(2, vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        let z = Image::zeros(2);
        assert_eq!(mse_loss(&[a.clone()], &[z.clone()]).unwrap(), 1.5);
        assert_eq!(mse_loss(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        let c = Image::filled(3, 0.5);
        assert_eq!(
            mse_loss(&[c.clone(), c], &[Image::zeros(3), Image::zeros(3)]).unwrap(),
            0.25
        );
        assert!(mse_loss(&[a], &[]).is_err());
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(Batch::new(vec![]).is_err());
    }
}
