//! Multi-threaded cross-ratio scan over fiber pairs.

use std::num::NonZeroUsize;

use conetract_core::{
    lipschitz_matrices_from, DenseKernel, Error, FiberTable, KernelStructure, NonnegMatrix,
    ProblemSpec,
};

/// Worker count: `CONETRACT_THREADS` if set to a positive integer, otherwise
/// the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("CONETRACT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, NonZeroUsize::get))
}

/// `Delta_j(K)` by exhaustive scan split across `threads` workers.
/// Refuses kernels with more than `cap` entries.
pub fn cross_ratio_parallel(
    kernel: &DenseKernel,
    j: usize,
    cap: usize,
    threads: usize,
) -> Result<f64, Error> {
    if kernel.len() > cap {
        return Err(Error::TooLarge {
            entries: kernel.len(),
            cap,
        });
    }
    let table = FiberTable::new(kernel, j)?;
    let rows = table.len();
    let threads = threads.clamp(1, rows.max(1));
    if threads == 1 {
        return Ok(table.max_log_ratio(0..rows).exp());
    }
    // early rows pair with more partners, so hand out small chunks round-robin
    let chunk = (rows / (threads * 16)).max(1);
    let chunks: Vec<_> = (0..rows)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(rows))
        .collect();
    let best = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let table = &table;
                let chunks = &chunks;
                scope.spawn(move || {
                    chunks
                        .iter()
                        .skip(t)
                        .step_by(threads)
                        .map(|r| table.max_log_ratio(r.clone()))
                        .fold(0.0f64, f64::max)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .fold(0.0f64, f64::max)
    });
    Ok(best.exp())
}

/// `Delta_j` for every mode: closed form for Hilbert tensors, otherwise the
/// parallel scan.
pub fn cross_ratios(kernel: &DenseKernel, cap: usize) -> Result<Vec<f64>, Error> {
    let threads = thread_count();
    (0..kernel.order())
        .map(|j| match kernel.structure() {
            KernelStructure::Hilbert { .. } => kernel.cross_ratio(j, cap),
            KernelStructure::General => cross_ratio_parallel(kernel, j, cap, threads),
        })
        .collect()
}

/// Lipschitz matrices `(A, B)` using [`cross_ratios`].
pub fn lipschitz(spec: &ProblemSpec, cap: usize) -> Result<(NonnegMatrix, NonnegMatrix), Error> {
    lipschitz_matrices_from(spec, &cross_ratios(&spec.kernel, cap)?)
}
