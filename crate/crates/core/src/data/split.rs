use crate::error::{Error, Result};
use crate::rng::Rng;

/// `(train, dev, test)` sizes: test = round(0.2·N), dev = round(0.1·N),
/// train = remainder (rounding half up).
pub fn split_sizes(n: usize) -> Result<(usize, usize, usize)> {
    if n < 10 {
        return Err(Error::CorpusTooSmall(n));
    }
    let test = (2 * n + 5) / 10;
    let dev = (n + 5) / 10;
    Ok((n - test - dev, dev, test))
}

/// Seeded shuffle, then the first `test` items form the test part, the
/// next `dev` the dev part, the rest the training part.
pub fn split_corpus<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (_, dev, test) = split_sizes(items.len())?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    Rng::new(seed).shuffle(&mut order);
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[test + dev..]),
        pick(&order[test..test + dev]),
        pick(&order[..test]),
    ))
}
