use std::time::Instant;

use rayon::prelude::*;

use super::{Classifier, InferenceError, InputDims, Posterior};
use crate::imagegeom::{crop_resize, hflip, Image, RegionSample};
use crate::schedules::Schedule;

/// Posteriors aligned with the schedule's samples, plus timing.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub samples: Vec<RegionSample>,
    pub posteriors: Vec<Posterior>,
    pub batch_size: usize,
    pub batch_count: usize,
    /// Wall-clock for the whole image.
    pub seconds: f64,
    pub batch_seconds: Vec<f64>,
}

fn convert_channels(img: Image, channels: usize) -> Image {
    match (img.channels(), channels) {
        (a, b) if a == b => img,
        (3, 1) => img.to_gray(),
        (1, 3) => {
            let px: Vec<f32> = img.pixels().iter().flat_map(|&v| [v, v, v]).collect();
            Image::new(img.width(), img.height(), 3, px).expect("same geometry")
        }
        _ => img,
    }
}

/// Crops, resamples and (when flagged) mirrors one sample into classifier input.
pub fn materialize(img: &Image, sample: &RegionSample, dims: InputDims) -> Result<Image, InferenceError> {
    let crop = crop_resize(img, &sample.bbox, dims.width, dims.height)?;
    let crop = if sample.flipped { hflip(&crop) } else { crop };
    Ok(convert_channels(crop, dims.channels))
}

/// Classifies every sample in batches of `batch_size`. Batches may run
/// concurrently; output order always follows the schedule.
pub fn batch_eval<C: Classifier + ?Sized>(
    schedule: &Schedule,
    img: &Image,
    classifier: &C,
    batch_size: usize,
) -> Result<EvalBatch, InferenceError> {
    if batch_size == 0 {
        return Err(InferenceError::BatchSize);
    }
    let start = Instant::now();
    let dims = classifier.input_dims();
    let results: Vec<(Vec<Posterior>, f64)> = schedule
        .samples
        .par_chunks(batch_size)
        .map(|chunk| {
            let t = Instant::now();
            let inputs = chunk.iter().map(|s| materialize(img, s, dims)).collect::<Result<Vec<_>, _>>()?;
            let out = classifier.classify_batch(&inputs)?;
            if out.len() != inputs.len() {
                return Err(InferenceError::Malformed(format!("{} posteriors for {} inputs", out.len(), inputs.len())));
            }
            Ok((out, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<_, InferenceError>>()?;
    let batch_count = results.len();
    let mut posteriors = Vec::with_capacity(schedule.len());
    let mut batch_seconds = Vec::with_capacity(batch_count);
    for (p, s) in results {
        posteriors.extend(p);
        batch_seconds.push(s);
    }
    Ok(EvalBatch {
        samples: schedule.samples.clone(),
        posteriors,
        batch_size,
        batch_count,
        seconds: start.elapsed().as_secs_f64(),
        batch_seconds,
    })
}
