//! Operation set for the tape.

use super::{Tape, Var};
use ndarray::{Array2, ArrayD, Ix1, Ix2, IxDyn};
use std::rc::Rc;

fn assert_same_shape(a: &ArrayD<f64>, b: &ArrayD<f64>, op: &str) {
    assert_eq!(a.shape(), b.shape(), "{op}: shape mismatch");
}

fn to2(a: &ArrayD<f64>) -> ndarray::ArrayView2<'_, f64> {
    a.view().into_dimensionality::<Ix2>().expect("rank-2 value")
}

fn standard(a: ArrayD<f64>) -> ArrayD<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

impl Tape {
    // ----- elementwise -----

    pub fn add(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        assert_same_shape(&av, &bv, "add");
        let out = &*av + &*bv;
        self.push(
            out,
            vec![
                (a.0, Box::new(|g: &ArrayD<f64>| g.clone())),
                (b.0, Box::new(|g: &ArrayD<f64>| g.clone())),
            ],
        )
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        assert_same_shape(&av, &bv, "sub");
        let out = &*av - &*bv;
        self.push(
            out,
            vec![
                (a.0, Box::new(|g: &ArrayD<f64>| g.clone())),
                (b.0, Box::new(|g: &ArrayD<f64>| g.mapv(|x| -x))),
            ],
        )
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        assert_same_shape(&av, &bv, "mul");
        let out = &*av * &*bv;
        let (ac, bc) = (Rc::clone(&av), Rc::clone(&bv));
        self.push(
            out,
            vec![
                (a.0, Box::new(move |g: &ArrayD<f64>| g * &*bc)),
                (b.0, Box::new(move |g: &ArrayD<f64>| g * &*ac)),
            ],
        )
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        assert_same_shape(&av, &bv, "div");
        let out = &*av / &*bv;
        let (ac, bc) = (Rc::clone(&av), Rc::clone(&bv));
        let bc2 = Rc::clone(&bv);
        self.push(
            out,
            vec![
                (a.0, Box::new(move |g: &ArrayD<f64>| g / &*bc2)),
                (
                    b.0,
                    Box::new(move |g: &ArrayD<f64>| -(g * &*ac) / (&*bc * &*bc)),
                ),
            ],
        )
    }

    pub fn neg(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let out = av.mapv(|x| -x);
        self.push(out, vec![(a.0, Box::new(|g: &ArrayD<f64>| g.mapv(|x| -x)))])
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.value_rc(a).mapv(|x| x + c);
        self.push(out, vec![(a.0, Box::new(|g: &ArrayD<f64>| g.clone()))])
    }

    pub fn mul_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.value_rc(a).mapv(|x| x * c);
        self.push(out, vec![(a.0, Box::new(move |g: &ArrayD<f64>| g * c))])
    }

    /// Elementwise product with a constant tensor (no gradient to `c`).
    pub fn mul_const(&self, a: Var, c: &ArrayD<f64>) -> Var {
        let av = self.value_rc(a);
        assert_same_shape(&av, c, "mul_const");
        let out = &*av * c;
        let cc = c.clone();
        self.push(out, vec![(a.0, Box::new(move |g: &ArrayD<f64>| g * &cc))])
    }

    /// `c * s` where `s` is a rank-0 var and `c` a constant tensor.
    pub fn scalar_bcast_mul(&self, s: Var, c: &ArrayD<f64>) -> Var {
        let sv = self.scalar_value(s);
        let out = c.mapv(|x| x * sv);
        let cc = c.clone();
        self.push(
            out,
            vec![(
                s.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let dot = (g * &cc).sum();
                    ArrayD::from_elem(IxDyn(&[]), dot)
                }),
            )],
        )
    }

    /// Tensor divided by a rank-0 var.
    pub fn div_by_scalar_var(&self, a: Var, s: Var) -> Var {
        let av = self.value_rc(a);
        let sv = self.scalar_value(s);
        let out = av.mapv(|x| x / sv);
        let ac = Rc::clone(&av);
        self.push(
            out,
            vec![
                (a.0, Box::new(move |g: &ArrayD<f64>| g / sv)),
                (
                    s.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let dot = (g * &*ac).sum();
                        ArrayD::from_elem(IxDyn(&[]), -dot / (sv * sv))
                    }),
                ),
            ],
        )
    }

    pub fn exp(&self, a: Var) -> Var {
        let out = self.value_rc(a).mapv(f64::exp);
        let oc = out.clone();
        self.push(out, vec![(a.0, Box::new(move |g: &ArrayD<f64>| g * &oc))])
    }

    pub fn ln(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let out = av.mapv(f64::ln);
        let ac = Rc::clone(&av);
        self.push(out, vec![(a.0, Box::new(move |g: &ArrayD<f64>| g / &*ac))])
    }

    pub fn sqrt(&self, a: Var) -> Var {
        let out = self.value_rc(a).mapv(f64::sqrt);
        let oc = out.clone();
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| g * &oc.mapv(|x| 0.5 / x)),
            )],
        )
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.value_rc(a).mapv(f64::tanh);
        let oc = out.clone();
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| g * &oc.mapv(|y| 1.0 - y * y)),
            )],
        )
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.value_rc(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let oc = out.clone();
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| g * &oc.mapv(|y| y * (1.0 - y))),
            )],
        )
    }

    pub fn relu(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let out = av.mapv(|x| x.max(0.0));
        let ac = Rc::clone(&av);
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| g * &ac.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 })),
            )],
        )
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let out = av.mapv(|x| {
            if x > 0.0 {
                x + (-x).exp().ln_1p()
            } else {
                x.exp().ln_1p()
            }
        });
        let ac = Rc::clone(&av);
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| g * &ac.mapv(|x| 1.0 / (1.0 + (-x).exp()))),
            )],
        )
    }

    /// Elementwise maximum; ties route the gradient to the first argument.
    pub fn max_elem(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        assert_same_shape(&av, &bv, "max_elem");
        let mut out = (*av).clone();
        out.zip_mut_with(&bv, |x, y| *x = x.max(*y));
        let (ac, bc) = (Rc::clone(&av), Rc::clone(&bv));
        let (ac2, bc2) = (Rc::clone(&av), Rc::clone(&bv));
        self.push(
            out,
            vec![
                (
                    a.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let mut m = g.clone();
                        m.zip_mut_with(&(&*ac - &*bc), |gv, d| {
                            if *d < 0.0 {
                                *gv = 0.0
                            }
                        });
                        m
                    }),
                ),
                (
                    b.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let mut m = g.clone();
                        m.zip_mut_with(&(&*ac2 - &*bc2), |gv, d| {
                            if *d >= 0.0 {
                                *gv = 0.0
                            }
                        });
                        m
                    }),
                ),
            ],
        )
    }

    // ----- reductions -----

    pub fn sum(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let shape = av.shape().to_vec();
        let out = ArrayD::from_elem(IxDyn(&[]), av.sum());
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| ArrayD::from_elem(IxDyn(&shape), g[[]])),
            )],
        )
    }

    pub fn mean(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let n = av.len() as f64;
        let shape = av.shape().to_vec();
        let out = ArrayD::from_elem(IxDyn(&[]), av.sum() / n);
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| ArrayD::from_elem(IxDyn(&shape), g[[]] / n)),
            )],
        )
    }

    /// Sum of scalar vars.
    pub fn sum_vars(&self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "sum_vars on empty slice");
        let total: f64 = vars.iter().map(|v| self.scalar_value(*v)).sum();
        let parents = vars
            .iter()
            .map(|v| {
                (
                    v.0,
                    Box::new(|g: &ArrayD<f64>| g.clone()) as super::GradFn,
                )
            })
            .collect();
        self.push(ArrayD::from_elem(IxDyn(&[]), total), parents)
    }

    /// Mean of scalar vars.
    pub fn mean_vars(&self, vars: &[Var]) -> Var {
        let s = self.sum_vars(vars);
        self.mul_scalar(s, 1.0 / vars.len() as f64)
    }

    // ----- shape -----

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Var {
        let av = self.value_rc(a);
        let orig = av.shape().to_vec();
        let out = standard((*av).clone())
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape: incompatible size");
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| {
                    standard(g.clone())
                        .into_shape_with_order(IxDyn(&orig))
                        .expect("reshape grad")
                }),
            )],
        )
    }

    /// Concatenate rank-1 vars into one vector.
    pub fn concat(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut data = Vec::new();
        let mut spans = Vec::new();
        for v in parts {
            let val = self.value_rc(*v);
            assert_eq!(val.ndim(), 1, "concat expects rank-1 parts");
            spans.push((data.len(), val.len()));
            data.extend(val.iter().copied());
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[data.len()]), data).unwrap();
        let parents = parts
            .iter()
            .zip(spans)
            .map(|(v, (start, len))| {
                let f: super::GradFn = Box::new(move |g: &ArrayD<f64>| {
                    let gv = g.view().into_dimensionality::<Ix1>().unwrap();
                    let seg: Vec<f64> = gv.iter().skip(start).take(len).copied().collect();
                    ArrayD::from_shape_vec(IxDyn(&[len]), seg).unwrap()
                });
                (v.0, f)
            })
            .collect();
        self.push(out, parents)
    }

    /// Single element by flat index, as a rank-0 var.
    pub fn pick(&self, a: Var, flat_index: usize) -> Var {
        let av = self.value_rc(a);
        let shape = av.shape().to_vec();
        let val = *av
            .as_slice_memory_order()
            .map(|s| &s[flat_index])
            .expect("pick: non-contiguous value");
        self.push(
            ArrayD::from_elem(IxDyn(&[]), val),
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let mut z = ArrayD::zeros(IxDyn(&shape));
                    z.as_slice_memory_order_mut().unwrap()[flat_index] = g[[]];
                    z
                }),
            )],
        )
    }

    // ----- linear algebra -----

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value_rc(a), self.value_rc(b));
        let out = to2(&av).dot(&to2(&bv)).into_dyn();
        let (ac, bc) = (Rc::clone(&av), Rc::clone(&bv));
        self.push(
            out,
            vec![
                (
                    a.0,
                    Box::new(move |g: &ArrayD<f64>| to2(g).dot(&to2(&bc).t()).into_dyn()),
                ),
                (
                    b.0,
                    Box::new(move |g: &ArrayD<f64>| to2(&ac).t().dot(&to2(g)).into_dyn()),
                ),
            ],
        )
    }

    /// `W [m,n] x x [n] -> [m]`.
    pub fn matvec(&self, w: Var, x: Var) -> Var {
        let (wv, xv) = (self.value_rc(w), self.value_rc(x));
        let x1 = xv.view().into_dimensionality::<Ix1>().expect("matvec x");
        let out = to2(&wv).dot(&x1).into_dyn();
        let (wc, xc) = (Rc::clone(&wv), Rc::clone(&xv));
        self.push(
            out,
            vec![
                (
                    w.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                        let x1 = xc.view().into_dimensionality::<Ix1>().unwrap();
                        Array2::from_shape_fn((g1.len(), x1.len()), |(i, j)| g1[i] * x1[j])
                            .into_dyn()
                    }),
                ),
                (
                    x.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                        to2(&wc).t().dot(&g1).into_dyn()
                    }),
                ),
            ],
        )
    }

    /// `M [d,n] transposed x x [d] -> [n]`.
    pub fn matvec_t(&self, m: Var, x: Var) -> Var {
        let (mv, xv) = (self.value_rc(m), self.value_rc(x));
        let x1 = xv.view().into_dimensionality::<Ix1>().expect("matvec_t x");
        let out = to2(&mv).t().dot(&x1).into_dyn();
        let (mc, xc) = (Rc::clone(&mv), Rc::clone(&xv));
        self.push(
            out,
            vec![
                (
                    m.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                        let x1 = xc.view().into_dimensionality::<Ix1>().unwrap();
                        Array2::from_shape_fn((x1.len(), g1.len()), |(d, j)| x1[d] * g1[j])
                            .into_dyn()
                    }),
                ),
                (
                    x.0,
                    Box::new(move |g: &ArrayD<f64>| {
                        let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                        to2(&mc).dot(&g1).into_dyn()
                    }),
                ),
            ],
        )
    }

    // ----- softmax family -----

    pub fn softmax(&self, x: Var) -> Var {
        let xv = self.value_rc(x);
        let m = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = xv.mapv(|v| (v - m).exp());
        let s = e.sum();
        let out = e.mapv(|v| v / s);
        let oc = out.clone();
        self.push(
            out,
            vec![(
                x.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let dot = (g * &oc).sum();
                    &oc * &g.mapv(|gv| gv) - &oc * dot
                }),
            )],
        )
    }

    pub fn log_softmax(&self, x: Var) -> Var {
        let xv = self.value_rc(x);
        let m = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + xv.mapv(|v| (v - m).exp()).sum().ln();
        let out = xv.mapv(|v| v - lse);
        let soft = out.mapv(f64::exp);
        self.push(
            out,
            vec![(
                x.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let gsum = g.sum();
                    g - &(&soft * gsum)
                }),
            )],
        )
    }

    // ----- structured ops -----

    /// 2-d convolution: input `[Cin,H,W]`, kernel `[Cout,Cin,kh,kw]`,
    /// optional bias `[Cout]`, zero padding. Gradients flow to input,
    /// kernel, and bias.
    pub fn conv2d(
        &self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Var {
        let iv = self.value_rc(input);
        let kv = self.value_rc(kernel);
        let ishape = iv.shape().to_vec();
        let kshape = kv.shape().to_vec();
        assert_eq!(ishape.len(), 3, "conv2d input rank");
        assert_eq!(kshape.len(), 4, "conv2d kernel rank");
        assert_eq!(ishape[0], kshape[1], "conv2d channel mismatch");
        let (cin, h, w) = (ishape[0], ishape[1], ishape[2]);
        let (cout, kh, kw) = (kshape[0], kshape[2], kshape[3]);
        let (cols, ho, wo) = im2col(&iv, kh, kw, stride, pad);
        let cols = Rc::new(cols);
        let k2 = standard((*kv).clone())
            .into_shape_with_order(IxDyn(&[cout, cin * kh * kw]))
            .unwrap();
        let k2v = to2(&k2).to_owned();
        let mut out2 = k2v.dot(&*cols);
        if let Some(b) = bias {
            let bv = self.value_rc(b);
            for (mut row, bval) in out2.rows_mut().into_iter().zip(bv.iter()) {
                row.mapv_inplace(|x| x + bval);
            }
        }
        let out = out2
            .into_dyn()
            .into_shape_with_order(IxDyn(&[cout, ho, wo]))
            .unwrap();

        let mut parents: Vec<(usize, super::GradFn)> = Vec::new();
        {
            let k2c = k2v.clone();
            parents.push((
                input.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let g2 = standard(g.clone())
                        .into_shape_with_order(IxDyn(&[cout, ho * wo]))
                        .unwrap();
                    let dcols = k2c.t().dot(&to2(&g2));
                    col2im(&dcols, cin, h, w, kh, kw, stride, pad)
                }),
            ));
        }
        {
            let colsc = Rc::clone(&cols);
            let kshape2 = kshape.clone();
            parents.push((
                kernel.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let g2 = standard(g.clone())
                        .into_shape_with_order(IxDyn(&[cout, ho * wo]))
                        .unwrap();
                    let dk2 = to2(&g2).dot(&colsc.t());
                    dk2.into_dyn()
                        .into_shape_with_order(IxDyn(&kshape2))
                        .unwrap()
                }),
            ));
        }
        if let Some(b) = bias {
            parents.push((
                b.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let g2 = standard(g.clone())
                        .into_shape_with_order(IxDyn(&[cout, ho * wo]))
                        .unwrap();
                    let sums: Vec<f64> = to2(&g2).rows().into_iter().map(|r| r.sum()).collect();
                    ArrayD::from_shape_vec(IxDyn(&[cout]), sums).unwrap()
                }),
            ));
        }
        self.push(out, parents)
    }

    /// Nearest-neighbour x2 upsampling of `[C,H,W]`.
    pub fn upsample2(&self, a: Var) -> Var {
        let av = self.value_rc(a);
        let s = av.shape().to_vec();
        assert_eq!(s.len(), 3, "upsample2 rank");
        let (c, h, w) = (s[0], s[1], s[2]);
        let mut out = ArrayD::zeros(IxDyn(&[c, 2 * h, 2 * w]));
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let v = av[[ci, y, x]];
                    out[[ci, 2 * y, 2 * x]] = v;
                    out[[ci, 2 * y, 2 * x + 1]] = v;
                    out[[ci, 2 * y + 1, 2 * x]] = v;
                    out[[ci, 2 * y + 1, 2 * x + 1]] = v;
                }
            }
        }
        self.push(
            out,
            vec![(
                a.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let mut dg = ArrayD::zeros(IxDyn(&[c, h, w]));
                    for ci in 0..c {
                        for y in 0..h {
                            for x in 0..w {
                                dg[[ci, y, x]] = g[[ci, 2 * y, 2 * x]]
                                    + g[[ci, 2 * y, 2 * x + 1]]
                                    + g[[ci, 2 * y + 1, 2 * x]]
                                    + g[[ci, 2 * y + 1, 2 * x + 1]];
                            }
                        }
                    }
                    dg
                }),
            )],
        )
    }

    /// Bilinear sampling of a `[C,H,W]` map at continuous index-space
    /// points (x right, y down; integer coordinates at cell centers).
    /// Points outside the map read as zero. The grid is row-major
    /// `gh x gw`; gradients flow to the map values only.
    pub fn bilinear_sample(&self, feat: Var, points: &[(f64, f64)], gh: usize, gw: usize) -> Var {
        assert_eq!(points.len(), gh * gw, "bilinear grid size");
        let fv = self.value_rc(feat);
        let s = fv.shape().to_vec();
        assert_eq!(s.len(), 3, "bilinear_sample rank");
        let (c, h, w) = (s[0], s[1], s[2]);
        // Per point: up to 4 (row, col, weight) taps.
        let mut taps: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(points.len());
        for &(x, y) in points {
            let x0 = x.floor();
            let y0 = y.floor();
            let wx1 = x - x0;
            let wy1 = y - y0;
            let mut t = Vec::with_capacity(4);
            for (dy, wy) in [(0i64, 1.0 - wy1), (1, wy1)] {
                for (dx, wx) in [(0i64, 1.0 - wx1), (1, wx1)] {
                    let yy = y0 as i64 + dy;
                    let xx = x0 as i64 + dx;
                    let wgt = wy * wx;
                    if wgt != 0.0 && yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                        t.push((yy as usize, xx as usize, wgt));
                    }
                }
            }
            taps.push(t);
        }
        let mut out = ArrayD::zeros(IxDyn(&[c, gh, gw]));
        for (p, t) in taps.iter().enumerate() {
            let (gy, gx) = (p / gw, p % gw);
            for ci in 0..c {
                let mut acc = 0.0;
                for &(yy, xx, wgt) in t {
                    acc += wgt * fv[[ci, yy, xx]];
                }
                out[[ci, gy, gx]] = acc;
            }
        }
        self.push(
            out,
            vec![(
                feat.0,
                Box::new(move |g: &ArrayD<f64>| {
                    let mut df = ArrayD::zeros(IxDyn(&[c, h, w]));
                    for (p, t) in taps.iter().enumerate() {
                        let (gy, gx) = (p / gw, p % gw);
                        for ci in 0..c {
                            let gv = g[[ci, gy, gx]];
                            for &(yy, xx, wgt) in t {
                                df[[ci, yy, xx]] += wgt * gv;
                            }
                        }
                    }
                    df
                }),
            )],
        )
    }
}

/// Unfold `[Cin,H,W]` into `[Cin*kh*kw, Ho*Wo]` patches.
fn im2col(
    input: &ArrayD<f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> (Array2<f64>, usize, usize) {
    let s = input.shape();
    let (cin, h, w) = (s[0], s[1], s[2]);
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut cols = Array2::zeros((cin * kh * kw, ho * wo));
    for ci in 0..cin {
        for u in 0..kh {
            for v in 0..kw {
                let row = (ci * kh + u) * kw + v;
                for oy in 0..ho {
                    let iy = (oy * stride + u) as i64 - pad as i64;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * stride + v) as i64 - pad as i64;
                        if ix < 0 || ix >= w as i64 {
                            continue;
                        }
                        cols[[row, oy * wo + ox]] = input[[ci, iy as usize, ix as usize]];
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

/// Fold patch gradients back onto the input (adjoint of [`im2col`]).
fn col2im(
    dcols: &Array2<f64>,
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> ArrayD<f64> {
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut out = ArrayD::zeros(IxDyn(&[cin, h, w]));
    for ci in 0..cin {
        for u in 0..kh {
            for v in 0..kw {
                let row = (ci * kh + u) * kw + v;
                for oy in 0..ho {
                    let iy = (oy * stride + u) as i64 - pad as i64;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * stride + v) as i64 - pad as i64;
                        if ix < 0 || ix >= w as i64 {
                            continue;
                        }
                        out[[ci, iy as usize, ix as usize]] += dcols[[row, oy * wo + ox]];
                    }
                }
            }
        }
    }
    out
}
