//! Epoch selection by bootstrapping over runs.
//!
//! Each resample draws `R` runs with replacement and averages their test
//! aR@1 per epoch. The chosen epoch maximizes the average of those
//! per-epoch means across resamples; ties go to the earliest epoch.
//! Because the scores are test-split scores, the result is an
//! oracle-selected epoch.

use rand::Rng;

use crate::adapter::TrainTrace;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

pub fn select_epoch(traces: &[TrainTrace], n_bootstrap: usize, seed: u64) -> Result<usize> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("no traces to select from"))?;
    let epochs: Vec<usize> = first.records.iter().map(|r| r.epoch).collect();
    let mut scores = Vec::with_capacity(traces.len());
    for t in traces {
        if t.records.iter().map(|r| r.epoch).ne(epochs.iter().copied()) {
            return Err(Error::invalid("traces cover different epochs"));
        }
        let s = t
            .records
            .iter()
            .map(|r| {
                r.test_ar1
                    .ok_or_else(|| Error::invalid("trace has no test scores"))
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(s);
    }
    select_epoch_from_scores(&epochs, &scores, n_bootstrap, seed)
}

/// `scores[run][e]` is run `run`'s test aR@1 at `epochs[e]`.
pub fn select_epoch_from_scores(
    epochs: &[usize],
    scores: &[Vec<f64>],
    n_bootstrap: usize,
    seed: u64,
) -> Result<usize> {
    if scores.is_empty() || epochs.is_empty() {
        return Err(Error::invalid("no traces to select from"));
    }
    if n_bootstrap == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    if scores.iter().any(|s| s.len() != epochs.len()) {
        return Err(Error::invalid("traces cover different epochs"));
    }
    let runs = u32::try_from(scores.len()).map_err(|_| Error::invalid("too many runs"))?;
    let mut rng = rng_for(seed, Stream::Bootstrap);
    let mut total = vec![0.0; epochs.len()];
    let mut resample_sum = vec![0.0; epochs.len()];
    for _ in 0..n_bootstrap {
        resample_sum.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..runs {
            let run = &scores[rng.gen_range(0..runs) as usize];
            for (acc, v) in resample_sum.iter_mut().zip(run) {
                *acc += v;
            }
        }
        for (t, s) in total.iter_mut().zip(&resample_sum) {
            *t += s / runs as f64;
        }
    }
    let mut best = 0;
    for e in 1..total.len() {
        if total[e] > total[best] {
            best = e;
        }
    }
    Ok(epochs[best])
}
