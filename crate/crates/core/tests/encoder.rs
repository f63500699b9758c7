mod common;

use seqlab_core::autodiff::{ParamSet, Tape};
use seqlab_core::data::Task;
use seqlab_core::layers::EncoderInput;
use seqlab_core::{Rng, Tensor};

fn swap_values(ps: &mut ParamSet, a: &str, b: &str) {
    let (ia, ib) = (ps.find(a).unwrap(), ps.find(b).unwrap());
    let va = ps.value(ia).clone();
    let vb = ps.value(ib).clone();
    *ps.value_mut(ia) = vb;
    *ps.value_mut(ib) = va;
}

#[test]
fn reversed_input_with_swapped_directions_gives_reversed_emissions() {
    for (seed, task) in Task::ALL.iter().enumerate() {
        let model = common::tiny_model(*task, seed as u64);
        let mut rng = Rng::new(seed as u64 + 10);
        let sentence = common::random_sentence(&mut rng, 6);
        let input = model.input_from_sentence(&sentence).unwrap();
        let reversed = EncoderInput {
            words: input.words.iter().rev().cloned().collect(),
            chars: input.chars.iter().rev().cloned().collect(),
            tags: input.tags.iter().map(|t| t.iter().rev().cloned().collect()).collect(),
        };

        let mut swapped = model.params().clone();
        for part in ["w_x", "w_h", "bias"] {
            swap_values(
                &mut swapped,
                &format!("lstm.forward.{part}"),
                &format!("lstm.backward.{part}"),
            );
        }
        let proj = swapped.find("projection.w").unwrap();
        let h = model.config().encoder.lstm_hidden;
        let old = swapped.value(proj).clone();
        let p = swapped.value_mut(proj);
        for r in 0..2 * h {
            let src = if r < h { r + h } else { r - h };
            p.row_mut(r).copy_from_slice(old.row(src));
        }

        let e = model.encoder().encode(model.params(), &input).unwrap();
        let e_rev = model.encoder().encode(&swapped, &reversed).unwrap();
        let t = e.rows();
        for s in 0..t {
            for (a, b) in e.row(s).iter().zip(e_rev.row(t - 1 - s)) {
                assert!((a - b).abs() <= 1e-12, "{task}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn hidden_states_stay_in_open_unit_interval() {
    let model = common::tiny_model(Task::Pos, 3);
    let enc = model.encoder();
    let mut rng = Rng::new(3);
    let sentence = common::random_sentence(&mut rng, 12);
    let input = model.input_from_sentence(&sentence).unwrap();
    let mut tape = Tape::new(model.params());
    let x = enc.inputs(&mut tape, &input).unwrap();
    let z = enc.forward.project_inputs(&mut tape, x).unwrap();
    for h in enc.forward.run(&mut tape, z, false).unwrap() {
        assert!(tape.value(h).data().iter().all(|v| v.abs() < 1.0 && v.is_finite()));
    }
}

#[test]
fn emissions_have_one_row_per_token() {
    let model = common::tiny_model(Task::Ner, 1);
    let mut rng = Rng::new(1);
    for len in 1..6 {
        let s = common::random_sentence(&mut rng, len);
        let e = model.emissions(&model.input_from_sentence(&s).unwrap()).unwrap();
        assert_eq!(e.shape(), &[len, model.scheme().len()]);
    }
}

#[test]
fn wrong_feature_count_is_rejected() {
    let model = common::tiny_model(Task::Chunk, 1);
    let none: [Vec<&str>; 0] = [];
    assert!(model.predict(&["nha"], &none).is_err());
    assert!(model.predict(&["nha"], &[vec!["N"]]).is_ok());
    assert!(model.predict(&["nha"], &[vec!["NOPE"]]).is_err());
}

/// Extra zero padding adds windows whose conv output can only be bias or
/// partial overlaps; with zero bias the pooled maximum is unchanged
/// whenever those added windows do not exceed it.
#[test]
fn extra_zero_padding_does_not_move_the_maximum() {
    let mut rng = Rng::new(21);
    let mut checked = 0;
    for _ in 0..200 {
        let n = 1 + rng.below(6);
        let d = 3;
        let f = 4;
        let mut ps = ParamSet::new();
        let chars = ps.add(
            "chars",
            Tensor::matrix(n, d, (0..n * d).map(|_| rng.uniform(1.0)).collect()).unwrap(),
        );
        let filt = ps.add(
            "filters",
            Tensor::matrix(3 * d, f, (0..3 * d * f).map(|_| rng.uniform(1.0)).collect()).unwrap(),
        );
        let mut tape = Tape::new(&ps);
        let c = tape.param(chars);
        let w = tape.param(filt);
        let base = tape.unfold(c, 3, 2).unwrap();
        let base = tape.matmul(base, w).unwrap();
        let wide = tape.unfold(c, 3, 3).unwrap();
        let wide = tape.matmul(wide, w).unwrap();
        let base_max = tape.max_axis(base, 0).unwrap();
        let wide_max = tape.max_axis(wide, 0).unwrap();
        let (bv, wv) = (tape.value(base).clone(), tape.value(wide).clone());
        // The wide output has one extra row at each end.
        let extra_ok = (0..f).all(|j| {
            let m = tape.value(base_max).data()[j];
            wv.get2(0, j) <= m && wv.get2(wv.rows() - 1, j) <= m
        });
        assert_eq!(bv.rows() + 2, wv.rows());
        if extra_ok {
            assert_eq!(tape.value(base_max), tape.value(wide_max));
            checked += 1;
        }
    }
    assert!(checked > 20);
}
