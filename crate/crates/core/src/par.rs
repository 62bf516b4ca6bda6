//! Data-parallel helpers. With the `parallel` feature, `Execution::Parallel`
//! runs on the rayon pool; without it every call runs sequentially. Results
//! always come back in input order, so output never depends on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually runs in parallel in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Map over fixed-size chunks. Chunk boundaries do not depend on the thread
/// count, so reductions over the returned partials are reproducible.
pub fn map_chunks<T, R, F>(exec: Execution, items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_chunks(chunk).map(f).collect();
    }
    let _ = exec;
    items.chunks(chunk).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map(Execution::Parallel, &v, |x| x * x);
        let b = map(Execution::Sequential, &v, |x| x * x);
        assert_eq!(a, b);
        let s1: Vec<u64> = map_chunks(Execution::Parallel, &v, 64, |c| c.iter().sum());
        let s2: Vec<u64> = map_chunks(Execution::Sequential, &v, 64, |c| c.iter().sum());
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 16);
    }
}
