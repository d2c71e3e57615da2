//! Finite-difference gradient checking.
//!
//! The numeric side is intentionally independent of the tape: it only
//! evaluates a closure at perturbed inputs, so it can vet any analytic
//! gradient the tape produces.

use ndarray::ArrayD;

/// Central-difference gradient of `f` with respect to every element of
/// every input, at the given step.
pub fn finite_diff<F>(f: F, inputs: &[ArrayD<f64>], step: f64) -> Vec<ArrayD<f64>>
where
    F: Fn(&[ArrayD<f64>]) -> f64,
{
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = ArrayD::zeros(inputs[i].raw_dim());
        let n = inputs[i].len();
        for k in 0..n {
            let mut plus: Vec<ArrayD<f64>> = inputs.to_vec();
            let mut minus: Vec<ArrayD<f64>> = inputs.to_vec();
            plus[i].as_slice_mut().unwrap()[k] += step;
            minus[i].as_slice_mut().unwrap()[k] -= step;
            let d = (f(&plus) - f(&minus)) / (2.0 * step);
            g.as_slice_mut().unwrap()[k] = d;
        }
        grads.push(g);
    }
    grads
}

/// Relative error between gradients: `max|a-b| / (max|a| + max|b| + eps)`.
pub fn rel_err(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rel_err shape mismatch");
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    let ma = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    let mb = b.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    diff / (ma + mb + 1e-12)
}

/// Check every analytic gradient against central differences.
/// Panics with a description when the relative error exceeds `tol`.
pub fn assert_grads_close<F>(f: F, inputs: &[ArrayD<f64>], analytic: &[ArrayD<f64>], tol: f64)
where
    F: Fn(&[ArrayD<f64>]) -> f64,
{
    let numeric = finite_diff(&f, inputs, 1e-4);
    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(numeric.iter()).enumerate() {
        let err = rel_err(a, n);
        assert!(
            err < tol,
            "gradient check failed for input {i}: rel err {err:.3e} >= {tol:.1e}"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use ndarray::IxDyn;

    fn arr(shape: &[usize], data: Vec<f64>) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }

    #[test]
    fn elementwise_ops_pass_fd() {
        let x = arr(&[4], vec![0.3, -1.2, 2.0, 0.01]);
        let y = arr(&[4], vec![1.5, 0.7, -0.4, 2.2]);
        let f = |ins: &[ArrayD<f64>]| {
            let t = Tape::new();
            let a = t.leaf(ins[0].clone());
            let b = t.leaf(ins[1].clone());
            let m = t.mul(a, b);
            let s = t.sigmoid(m);
            let h = t.tanh(b);
            let q = t.div(s, t.add_scalar(t.mul(h, h), 1.0));
            let sp = t.softplus(q);
            t.scalar_value(t.mean(sp))
        };
        let t = Tape::new();
        let a = t.leaf(x.clone());
        let b = t.leaf(y.clone());
        let m = t.mul(a, b);
        let s = t.sigmoid(m);
        let h = t.tanh(b);
        let q = t.div(s, t.add_scalar(t.mul(h, h), 1.0));
        let sp = t.softplus(q);
        let loss = t.mean(sp);
        let g = t.backward(loss);
        assert_grads_close(
            f,
            &[x, y],
            &[g.wrt_or_zeros(a), g.wrt_or_zeros(b)],
            1e-6,
        );
    }

    #[test]
    fn matmul_matvec_pass_fd() {
        let w = arr(&[3, 4], (0..12).map(|i| (i as f64) * 0.1 - 0.5).collect());
        let x = arr(&[4], vec![0.2, -0.3, 0.5, 1.0]);
        let f = |ins: &[ArrayD<f64>]| {
            let t = Tape::new();
            let w = t.leaf(ins[0].clone());
            let x = t.leaf(ins[1].clone());
            let y = t.matvec(w, x);
            let s = t.softmax(y);
            t.scalar_value(t.pick(s, 1))
        };
        let t = Tape::new();
        let wv = t.leaf(w.clone());
        let xv = t.leaf(x.clone());
        let y = t.matvec(wv, xv);
        let s = t.softmax(y);
        let p = t.pick(s, 1);
        let g = t.backward(p);
        assert_grads_close(f, &[w, x], &[g.wrt_or_zeros(wv), g.wrt_or_zeros(xv)], 1e-6);
    }

    #[test]
    fn conv_and_sampling_pass_fd() {
        let img = arr(&[2, 5, 5], (0..50).map(|i| ((i * 7) % 11) as f64 * 0.1).collect());
        let ker = arr(
            &[3, 2, 3, 3],
            (0..54).map(|i| ((i * 5) % 13) as f64 * 0.05 - 0.3).collect(),
        );
        let bias = arr(&[3], vec![0.1, -0.2, 0.05]);
        let pts: Vec<(f64, f64)> = vec![(0.5, 0.5), (1.7, 0.3), (3.2, 3.9), (-0.4, 2.0)];
        let run = |ins: &[ArrayD<f64>]| -> (Tape, Var, Var, Var, Var) {
            let t = Tape::new();
            let i = t.leaf(ins[0].clone());
            let k = t.leaf(ins[1].clone());
            let b = t.leaf(ins[2].clone());
            let c = t.conv2d(i, k, Some(b), 2, 1);
            let r = t.relu(c);
            let s = t.bilinear_sample(r, &pts, 2, 2);
            let u = t.upsample2(s);
            let loss = t.mean(u);
            (t, i, k, b, loss)
        };
        use crate::autodiff::Var;
        let f = |ins: &[ArrayD<f64>]| {
            let (t, _, _, _, loss) = run(ins);
            t.scalar_value(loss)
        };
        let inputs = [img, ker, bias];
        let (t, i, k, b, loss) = run(&inputs);
        let g = t.backward(loss);
        assert_grads_close(
            f,
            &inputs,
            &[g.wrt_or_zeros(i), g.wrt_or_zeros(k), g.wrt_or_zeros(b)],
            1e-5,
        );
    }

    #[test]
    fn log_softmax_and_scalar_ops_pass_fd() {
        let x = arr(&[5], vec![0.1, 1.2, -0.7, 0.0, 2.0]);
        let c = arr(&[3, 3], (0..9).map(|i| i as f64 * 0.2 - 0.8).collect());
        let f = |ins: &[ArrayD<f64>]| {
            let t = Tape::new();
            let x = t.leaf(ins[0].clone());
            let ls = t.log_softmax(x);
            let s0 = t.pick(ls, 2);
            let bc = t.scalar_bcast_mul(s0, &c);
            let e = t.exp(t.mul_scalar(bc, 0.3));
            let total = t.sum(e);
            let normed = t.div_by_scalar_var(e, total);
            t.scalar_value(t.pick(normed, 4))
        };
        let t = Tape::new();
        let xv = t.leaf(x.clone());
        let ls = t.log_softmax(xv);
        let s0 = t.pick(ls, 2);
        let bc = t.scalar_bcast_mul(s0, &c);
        let e = t.exp(t.mul_scalar(bc, 0.3));
        let total = t.sum(e);
        let normed = t.div_by_scalar_var(e, total);
        let out = t.pick(normed, 4);
        let g = t.backward(out);
        assert_grads_close(f, &[x], &[g.wrt_or_zeros(xv)], 1e-6);
    }

    #[test]
    fn max_elem_concat_pass_fd() {
        let a = arr(&[4], vec![0.3, -0.2, 1.4, 0.9]);
        let b = arr(&[4], vec![0.5, -0.6, 1.1, 2.0]);
        let f = |ins: &[ArrayD<f64>]| {
            let t = Tape::new();
            let a = t.leaf(ins[0].clone());
            let b = t.leaf(ins[1].clone());
            let m = t.max_elem(a, b);
            let cat = t.concat(&[m, a]);
            t.scalar_value(t.sum(t.mul(cat, cat)))
        };
        let t = Tape::new();
        let av = t.leaf(a.clone());
        let bv = t.leaf(b.clone());
        let m = t.max_elem(av, bv);
        let cat = t.concat(&[m, av]);
        let loss = t.sum(t.mul(cat, cat));
        let g = t.backward(loss);
        assert_grads_close(f, &[a, b], &[g.wrt_or_zeros(av), g.wrt_or_zeros(bv)], 1e-6);
    }
}
