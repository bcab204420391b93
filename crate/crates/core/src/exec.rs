//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the `Parallel` policy runs on rayon; without
//! it every policy runs sequentially. Results never depend on the policy:
//! work items write disjoint outputs and reductions are done in index order.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Applies `f` to every element of `items` together with its index.
    pub fn for_each_mut<T: Send, F>(self, items: &mut [T], f: F)
    where
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }

    /// Maps `0..n` through `f`, keeping index order.
    pub fn map<R: Send, F>(self, n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Builds the global thread pool. `None` leaves rayon's default.
pub fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
