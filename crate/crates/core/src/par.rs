/// Evaluates `f(0..n)` and collects the results in index order, on the rayon
/// pool when `parallel` is set and the `parallel` feature is enabled.
pub(crate) fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> alloc::vec::Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}
