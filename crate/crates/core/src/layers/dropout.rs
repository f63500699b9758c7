use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Inverted dropout: in training mode each coordinate is zeroed with
/// probability `rate` and survivors are scaled by `1/(1 − rate)`; otherwise
/// the input is returned unchanged.
pub fn apply_dropout(tape: &mut Tape, x: Var, rate: f64, rng: &mut Rng, training: bool) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let shape = tape.shape(x).to_vec();
    let n = tape.value(x).len();
    let mask = (0..n).map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect();
    let mask = tape.constant(Tensor::new(shape, mask)?);
    tape.mul(x, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamSet;

    #[test]
    fn identity_cases() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let mut rng = Rng::new(0);
        for training in [true, false] {
            let y = apply_dropout(&mut tape, x, 0.0, &mut rng, training).unwrap();
            assert_eq!(tape.value(y), tape.value(x));
        }
        let y = apply_dropout(&mut tape, x, 0.7, &mut rng, false).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn rate_out_of_range() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::vector(vec![1.0]));
        assert!(apply_dropout(&mut tape, x, 1.0, &mut Rng::new(0), true).is_err());
        assert!(apply_dropout(&mut tape, x, -0.1, &mut Rng::new(0), true).is_err());
    }

    #[test]
    fn preserves_mean() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::full(&[100_000], 1.0));
        let y = apply_dropout(&mut tape, x, 0.5, &mut Rng::new(11), true).unwrap();
        let mean = tape.value(y).sum() / 1e5;
        assert!((0.98..=1.02).contains(&mean), "{mean}");
    }
}
