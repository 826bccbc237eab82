use rayon::prelude::*;

use super::Module;
use crate::error::Result;

/// Examples per gradient shard. Shards are summed in order, so results do not
/// depend on how many threads run them.
pub const SHARD: usize = 8;

/// Runs `step` (forward + backward, returning the loss) over every example
/// and leaves the summed gradients in `model`. Returns the summed loss.
pub fn accumulate<M, E, F>(model: &mut M, examples: &[E], step: F) -> Result<f64>
where
    M: Module + Clone + Send + Sync,
    E: Sync,
    F: Fn(&mut M, &E) -> Result<f64> + Sync,
{
    let shards: Vec<Result<(f64, Vec<Vec<f64>>)>> = examples
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut local = model.clone();
            local.zero_grad();
            let mut loss = 0.0;
            for e in chunk {
                loss += step(&mut local, e)?;
            }
            Ok((loss, local.params().iter().map(|p| p.grad.data.clone()).collect()))
        })
        .collect();
    model.zero_grad();
    let mut total = 0.0;
    for shard in shards {
        let (loss, grads) = shard?;
        total += loss;
        for (p, g) in model.params_mut().into_iter().zip(grads) {
            p.grad.data.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
    Ok(total)
}

/// Thread pool sized from `SKEWERSIM_THREADS` (default 1).
pub fn thread_pool() -> rayon::ThreadPool {
    let n = std::env::var("SKEWERSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
}
