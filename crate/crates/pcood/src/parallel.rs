//! Deterministic fan-out over index ranges.
//!
//! Work is cut into fixed-size chunks that do not depend on the worker
//! count, and results are consumed in chunk order, so output is identical
//! for any number of workers.

use std::ops::Range;
use std::thread;

use crate::Result;

pub const DEFAULT_CHUNK: usize = 1 << 16;

pub fn chunk_ranges(total: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> {
    let chunk = chunk.max(1);
    (0..total.div_ceil(chunk)).map(move |i| i * chunk..((i + 1) * chunk).min(total))
}

/// A worker's state, handed back for the next wave, and its tagged results.
type WorkerOutput<S, T> = (Option<S>, Vec<(usize, T)>);

/// Run `work` over consecutive chunks of `0..total` on `workers` threads and
/// hand each result to `consume` in chunk order. Each worker builds its own
/// state with `init` (e.g. an open file handle). Chunks are processed in
/// waves of a few per worker so memory stays bounded.
pub fn ordered_chunks<S, T, I, W, C>(
    total: usize,
    chunk: usize,
    workers: usize,
    init: I,
    work: W,
    mut consume: C,
) -> Result<()>
where
    T: Send,
    S: Send,
    I: Fn() -> Result<S> + Sync,
    W: Fn(&mut S, Range<usize>) -> Result<T> + Sync,
    C: FnMut(T) -> Result<()>,
{
    let ranges: Vec<Range<usize>> = chunk_ranges(total, chunk).collect();
    let workers = workers.max(1).min(ranges.len().max(1));
    if workers == 1 {
        let mut state = init()?;
        for r in ranges {
            consume(work(&mut state, r)?)?;
        }
        return Ok(());
    }
    let wave = workers * 4;
    let mut states: Vec<Option<S>> = Vec::new();
    for batch in ranges.chunks(wave) {
        let results: Vec<Result<WorkerOutput<S, T>>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let state = states.get_mut(w).and_then(Option::take);
                    let (init, work) = (&init, &work);
                    scope.spawn(move || -> Result<WorkerOutput<S, T>> {
                        let mut state = match state {
                            Some(s) => s,
                            None => init()?,
                        };
                        let mut out = Vec::new();
                        for (i, r) in batch.iter().enumerate().skip(w).step_by(workers) {
                            out.push((i, work(&mut state, r.clone())?));
                        }
                        Ok((Some(state), out))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut slots: Vec<Option<T>> = (0..batch.len()).map(|_| None).collect();
        let mut next_states = Vec::with_capacity(workers);
        for res in results {
            let (state, out) = res?;
            next_states.push(state);
            for (i, t) in out {
                slots[i] = Some(t);
            }
        }
        states = next_states;
        for t in slots.into_iter().flatten() {
            consume(t)?;
        }
    }
    Ok(())
}
