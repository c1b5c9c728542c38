use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};

pub const WARMUP_CALLS: usize = 10;

/// Median wall-clock seconds of `f` over `reps` calls, after warm-up.
///
/// Runs on the calling thread only.
pub fn measure_latency<R>(mut f: impl FnMut() -> R, reps: usize) -> Result<f64> {
    if reps < 100 {
        return Err(Error::InvalidConfig(format!("latency needs at least 100 repetitions, got {reps}")));
    }
    for _ in 0..WARMUP_CALLS {
        black_box(f());
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        black_box(f());
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(median(samples))
}

/// Median latencies of several functions, timed round-robin so that load
/// changes during the measurement hit every function alike.
pub fn measure_latencies(fs: &mut [&mut dyn FnMut()], reps: usize) -> Result<Vec<f64>> {
    if reps < 100 {
        return Err(Error::InvalidConfig(format!("latency needs at least 100 repetitions, got {reps}")));
    }
    for f in fs.iter_mut() {
        for _ in 0..WARMUP_CALLS {
            f();
        }
    }
    let mut samples = vec![Vec::with_capacity(reps); fs.len()];
    for _ in 0..reps {
        for (f, s) in fs.iter_mut().zip(&mut samples) {
            let t = Instant::now();
            f();
            s.push(t.elapsed().as_secs_f64());
        }
    }
    Ok(samples.into_iter().map(median).collect())
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let m = if samples.len() % 2 == 0 { 0.5 * (samples[mid - 1] + samples[mid]) } else { samples[mid] };
    // Instant has finite resolution; report at least one nanosecond.
    m.max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_few_reps() {
        assert!(measure_latency(|| 1, 10).is_err());
    }

    #[test]
    fn round_robin_keeps_order() {
        let mut n = 0u64;
        let mut x = 0u64;
        let mut cheap = || n = black_box(n + 1);
        let mut costly = || {
            for i in 0..5000 {
                x = black_box(x.wrapping_mul(31).wrapping_add(i));
            }
        };
        let t = measure_latencies(&mut [&mut cheap, &mut costly], 200).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t[0] < t[1]);
    }

    #[test]
    fn positive_median() {
        let mut x = 0u64;
        let t = measure_latency(
            || {
                for i in 0..1000 {
                    x = x.wrapping_mul(31).wrapping_add(i);
                }
                x
            },
            200,
        )
        .unwrap();
        assert!(t > 0.0);
    }
}
