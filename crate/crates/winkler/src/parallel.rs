//! Multi-threaded ensemble evaluation.

use rayon::prelude::*;
use rayon::ThreadPool;
use winkler_core::eki::{Evaluator, ForwardModel};

use crate::error::Result;

/// Evaluates members on the current rayon pool.
///
/// Results come back in member order, and each evaluation depends only on
/// its own member, so the output is identical for any thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Evaluator for Parallel {
    fn evaluate_all<M>(
        &self,
        model: &M,
        members: &[Vec<f64>],
    ) -> Vec<winkler_core::Result<Vec<f64>>>
    where
        M: ForwardModel + Sync + ?Sized,
    {
        members.par_iter().map(|m| model.evaluate(m)).collect()
    }
}

/// Pool with `threads` workers; `None` lets rayon pick.
pub fn pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    builder.build().map_err(|e| crate::error::Error::Io {
        path: "<thread pool>".into(),
        source: std::io::Error::other(e),
    })
}
