//! Thread-parallel batch evaluation for the finite-difference probes.

use std::num::NonZeroUsize;

use stairgait_core::nalgebra::DVector;
use stairgait_core::optimizer::{Evaluation, Nlp};
use stairgait_core::Result;

/// Wraps a problem so that [`Nlp::evaluate_batch`] spreads points over
/// scoped threads. Results keep their input order.
pub struct Parallel<'a, P: ?Sized> {
    pub inner: &'a P,
    pub threads: usize,
}

impl<'a, P: Nlp + ?Sized> Parallel<'a, P> {
    pub fn new(inner: &'a P, threads: usize) -> Self {
        Self {
            inner,
            threads: threads.max(1),
        }
    }
}

pub fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

impl<P: Nlp + ?Sized> Nlp for Parallel<'_, P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn n_eq(&self) -> usize {
        self.inner.n_eq()
    }

    fn n_ineq(&self) -> usize {
        self.inner.n_ineq()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        self.inner.evaluate(x)
    }

    fn evaluate_batch(&self, xs: &[DVector<f64>]) -> Vec<Result<Evaluation>> {
        if self.threads == 1 || xs.len() < 2 {
            return self.inner.evaluate_batch(xs);
        }
        let chunk = xs.len().div_ceil(self.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = xs
                .chunks(chunk)
                .map(|part| s.spawn(move || self.inner.evaluate_batch(part)))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation thread panicked"))
                .collect()
        })
    }
}
