use crate::autodiff::{ParamId, ParamSet, Tape, Var};
use crate::error::Result;
use crate::layers::glorot_blocks;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One direction of an LSTM without peepholes:
///
/// ```text
/// z  = W_x·x + W_h·h + b        (gate blocks in order i, f, o, g)
/// i, f, o = σ(z_i), σ(z_f), σ(z_o);  g = tanh(z_g)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
///
/// `W_x` is stored `[input, 4·hidden]` and `W_h` is `[hidden, 4·hidden]`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    /// Forget-gate bias starts at 1, the other biases at 0.
    pub fn init(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w_x = glorot_blocks(params, &format!("{prefix}.w_x"), input, 4 * hidden, 4, rng);
        let w_h = glorot_blocks(params, &format!("{prefix}.w_h"), hidden, 4 * hidden, 4, rng);
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let bias = params.add(format!("{prefix}.bias"), b);
        LstmCell {
            input,
            hidden,
            w_x,
            w_h,
            bias,
        }
    }

    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        let h = tape.constant(Tensor::zeros(&[self.hidden]));
        let c = tape.constant(Tensor::zeros(&[self.hidden]));
        LstmState { h, c }
    }

    /// `W_x·x + b` for every row of `xs` (`[T, input]` → `[T, 4·hidden]`).
    pub fn project_inputs(&self, tape: &mut Tape, xs: Var) -> Result<Var> {
        let w = tape.param(self.w_x);
        let b = tape.param(self.bias);
        let z = tape.matmul(xs, w)?;
        tape.add(z, b)
    }

    /// Full step from a raw input vector.
    pub fn step(&self, tape: &mut Tape, x: Var, state: LstmState) -> Result<LstmState> {
        let w = tape.param(self.w_x);
        let b = tape.param(self.bias);
        let zx = tape.matmul(x, w)?;
        let zx = tape.add(zx, b)?;
        self.step_projected(tape, zx, state)
    }

    /// Step given the precomputed input projection `W_x·x + b`.
    pub fn step_projected(&self, tape: &mut Tape, zx: Var, state: LstmState) -> Result<LstmState> {
        let hd = self.hidden;
        let w = tape.param(self.w_h);
        let zh = tape.matmul(state.h, w)?;
        let z = tape.add(zx, zh)?;
        let i = tape.slice(z, 0, hd)?;
        let i = tape.sigmoid(i);
        let f = tape.slice(z, hd, hd)?;
        let f = tape.sigmoid(f);
        let o = tape.slice(z, 2 * hd, hd)?;
        let o = tape.sigmoid(o);
        let g = tape.slice(z, 3 * hd, hd)?;
        let g = tape.tanh(g);
        let keep = tape.mul(f, state.c)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let squashed = tape.tanh(c);
        let h = tape.mul(o, squashed)?;
        Ok(LstmState { h, c })
    }

    /// Runs over the rows of the projected inputs in the given order and
    /// returns hidden states indexed by position.
    pub fn run(&self, tape: &mut Tape, projected: Var, reverse: bool) -> Result<Vec<Var>> {
        let t = tape.shape(projected)[0];
        let mut state = self.zero_state(tape);
        let mut out = vec![None; t];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..t).rev())
        } else {
            Box::new(0..t)
        };
        for pos in order {
            let zx = tape.row(projected, pos)?;
            state = self.step_projected(tape, zx, state)?;
            out[pos] = Some(state.h);
        }
        Ok(out.into_iter().map(|h| h.expect("every position visited")).collect())
    }
}
