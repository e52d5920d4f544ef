//! Reverse-mode differentiation over a per-forward-pass recording.
//!
//! Every primitive evaluates eagerly and appends a node holding its value and
//! the handles of its inputs. `backward` walks the nodes in reverse once.
//! Shape mismatches are programming errors and panic with the primitive name;
//! non-finite values are recorded and surfaced by `backward`.

use std::cell::{Cell, RefCell};

use super::{DiffError, Gradients, ParamId, ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    ScaleBy(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    Exp(Var),
    LogClamped(Var, f64),
    SoftmaxRows(Var),
    LayerNormRows(Var, Vec<f64>),
    Sum(Var),
    SumSq(Var),
    MeanRows(Var),
    SliceCols(Var, usize),
    ConcatCols(Var, Var),
    ConcatRows(Vec<Var>),
    SelectRow(Var, usize),
    Element(Var, usize),
    CumProd(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Const => "constant",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Affine(..) => "affine",
            Op::ScaleBy(..) => "scale_by",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Gelu(_) => "gelu",
            Op::Exp(_) => "exp",
            Op::LogClamped(..) => "log",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::LayerNormRows(..) => "layer_norm_rows",
            Op::Sum(_) => "sum",
            Op::SumSq(_) => "sum_sq",
            Op::MeanRows(_) => "mean_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SelectRow(..) => "select_row",
            Op::Element(..) => "element",
            Op::CumProd(_) => "cumprod",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of one forward pass. Not `Sync`; each thread owns its own tape.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    nonfinite: Cell<Option<(usize, &'static str)>>,
    /// Values produced by `detach`, in call order.
    detached: RefCell<Vec<Tensor>>,
    /// When set, `detach` replays these values instead of copying its input.
    frozen: Option<Vec<Tensor>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape whose `detach` calls return `values` in order, so a perturbed
    /// re-evaluation sees the stop-gradient points of a reference pass as
    /// fixed constants.
    pub fn with_frozen_detaches(values: Vec<Tensor>) -> Self {
        Self { frozen: Some(values), ..Self::default() }
    }

    /// Values produced by `detach` so far, in call order.
    pub fn detached_values(&self) -> Vec<Tensor> {
        self.detached.borrow().clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        if self.nonfinite.get().is_none() && !value.all_finite() {
            self.nonfinite.set(Some((idx, op.name())));
        }
        nodes.push(Node { value, op });
        Var(idx)
    }

    /// First primitive that produced a non-finite value, if any.
    pub fn first_nonfinite(&self) -> Option<(usize, &'static str)> {
        self.nonfinite.get()
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        let t = &nodes[v.0].value;
        assert!(t.is_scalar(), "scalar() on tensor of shape {:?}", t.shape());
        t.item()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    fn with1<R>(&self, a: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[a.0].value)
    }

    fn with2<R>(&self, a: Var, b: Var, f: impl FnOnce(&Tensor, &Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a.0].value, &nodes[b.0].value)
    }

    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Const)
    }

    pub fn constant_scalar(&self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id))
    }

    /// Value copy that blocks gradient flow.
    pub fn detach(&self, a: Var) -> Var {
        let idx = self.detached.borrow().len();
        let v = match &self.frozen {
            Some(frozen) => {
                let v = frozen.get(idx).expect("more detach calls than frozen values").clone();
                assert_eq!(v.shape(), self.shape(a).as_slice(), "frozen detach {idx} changed shape");
                v
            }
            None => self.value(a),
        };
        self.detached.borrow_mut().push(v.clone());
        self.constant(v)
    }

    fn same_shape(op: &str, a: &Tensor, b: &Tensor) {
        assert!(a.shape() == b.shape(), "{op}: shape mismatch {:?} vs {:?}", a.shape(), b.shape());
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        let v = self.with2(a, b, |x, y| {
            Self::same_shape("add", x, y);
            x.zip_map(y, |p, q| p + q)
        });
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let v = self.with2(a, b, |x, y| {
            Self::same_shape("sub", x, y);
            x.zip_map(y, |p, q| p - q)
        });
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Var {
        let v = self.with2(a, b, |x, y| {
            Self::same_shape("mul", x, y);
            x.zip_map(y, |p, q| p * q)
        });
        self.push(v, Op::Mul(a, b))
    }

    /// `scale * a + shift`.
    pub fn affine(&self, a: Var, scale: f64, shift: f64) -> Var {
        let v = self.with1(a, |x| x.map(|p| scale * p + shift));
        self.push(v, Op::Affine(a, scale))
    }

    pub fn scale(&self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    pub fn neg(&self, a: Var) -> Var {
        self.affine(a, -1.0, 0.0)
    }

    /// Tensor times a recorded scalar.
    pub fn scale_by(&self, a: Var, s: Var) -> Var {
        let v = self.with2(a, s, |x, k| {
            assert!(k.is_scalar(), "scale_by: factor shape {:?}", k.shape());
            let k = k.item();
            x.map(|p| p * k)
        });
        self.push(v, Op::ScaleBy(a, s))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let v = self.with2(a, b, |x, y| {
            assert!(
                x.shape().len() == 2 && y.shape().len() == 2 && x.cols() == y.rows(),
                "matmul: shape mismatch {:?} x {:?}",
                x.shape(),
                y.shape()
            );
            x.matmul(y)
        });
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let v = self.with1(a, Tensor::transpose);
        self.push(v, Op::Transpose(a))
    }

    /// Adds a `[1, c]` row to every row of an `[r, c]` matrix.
    pub fn add_row(&self, m: Var, row: Var) -> Var {
        let v = self.with2(m, row, |x, r| {
            assert!(r.rows() == 1 && r.cols() == x.cols(), "add_row: {:?} + {:?}", x.shape(), r.shape());
            let c = x.cols();
            let mut out = x.clone();
            for (i, o) in out.values_mut().iter_mut().enumerate() {
                *o += r.values()[i % c];
            }
            out
        });
        self.push(v, Op::AddRow(m, row))
    }

    /// Multiplies every row of an `[r, c]` matrix elementwise by a `[1, c]` row.
    pub fn mul_row(&self, m: Var, row: Var) -> Var {
        let v = self.with2(m, row, |x, r| {
            assert!(r.rows() == 1 && r.cols() == x.cols(), "mul_row: {:?} * {:?}", x.shape(), r.shape());
            let c = x.cols();
            let mut out = x.clone();
            for (i, o) in out.values_mut().iter_mut().enumerate() {
                *o *= r.values()[i % c];
            }
            out
        });
        self.push(v, Op::MulRow(m, row))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let v = self.with1(a, |x| x.map(f64::tanh));
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let v = self.with1(a, |x| x.map(sigmoid));
        self.push(v, Op::Sigmoid(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self, a: Var) -> Var {
        let v = self.with1(a, |x| x.map(|p| 0.5 * p * (1.0 + (GELU_C * (p + GELU_A * p * p * p)).tanh())));
        self.push(v, Op::Gelu(a))
    }

    pub fn exp(&self, a: Var) -> Var {
        let v = self.with1(a, |x| x.map(f64::exp));
        self.push(v, Op::Exp(a))
    }

    /// `ln(max(a, eps))`; the gradient is zero where the clamp is active.
    pub fn log_clamped(&self, a: Var, eps: f64) -> Var {
        let v = self.with1(a, |x| x.map(|p| p.max(eps).ln()));
        self.push(v, Op::LogClamped(a, eps))
    }

    pub fn softmax_rows(&self, a: Var) -> Var {
        let v = self.with1(a, |x| {
            let c = x.cols();
            let mut out = x.clone();
            for row in out.values_mut().chunks_mut(c) {
                softmax_in_place(row);
            }
            out
        });
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Per-row standardization (no affine part).
    pub fn layer_norm_rows(&self, a: Var, eps: f64) -> Var {
        let (v, inv_std) = self.with1(a, |x| {
            let c = x.cols();
            let mut out = x.clone();
            let mut inv_std = Vec::with_capacity(x.rows());
            for row in out.values_mut().chunks_mut(c) {
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / c as f64;
                let is = 1.0 / (var + eps).sqrt();
                for p in row.iter_mut() {
                    *p = (*p - mean) * is;
                }
                inv_std.push(is);
            }
            (out, inv_std)
        });
        self.push(v, Op::LayerNormRows(a, inv_std))
    }

    pub fn sum(&self, a: Var) -> Var {
        let v = self.with1(a, |x| Tensor::scalar(x.sum()));
        self.push(v, Op::Sum(a))
    }

    pub fn sum_sq(&self, a: Var) -> Var {
        let v = self.with1(a, |x| Tensor::scalar(x.sum_sq()));
        self.push(v, Op::SumSq(a))
    }

    /// Column means of an `[r, c]` matrix as a `[1, c]` row.
    pub fn mean_rows(&self, a: Var) -> Var {
        let v = self.with1(a, |x| {
            let (r, c) = (x.rows(), x.cols());
            let mut out = vec![0.0; c];
            for row in x.values().chunks(c) {
                for (o, p) in out.iter_mut().zip(row) {
                    *o += p;
                }
            }
            for o in &mut out {
                *o /= r as f64;
            }
            Tensor::row(out)
        });
        self.push(v, Op::MeanRows(a))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&self, a: Var, start: usize, end: usize) -> Var {
        let v = self.with1(a, |x| {
            assert!(start < end && end <= x.cols(), "slice_cols: {start}..{end} of {:?}", x.shape());
            let w = end - start;
            let mut out = Vec::with_capacity(x.rows() * w);
            for r in 0..x.rows() {
                out.extend_from_slice(&x.row_slice(r)[start..end]);
            }
            Tensor::matrix(x.rows(), w, out)
        });
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&self, a: Var, b: Var) -> Var {
        let v = self.with2(a, b, |x, y| {
            assert!(x.rows() == y.rows(), "concat_cols: {:?} | {:?}", x.shape(), y.shape());
            let mut out = Vec::with_capacity(x.len() + y.len());
            for r in 0..x.rows() {
                out.extend_from_slice(x.row_slice(r));
                out.extend_from_slice(y.row_slice(r));
            }
            Tensor::matrix(x.rows(), x.cols() + y.cols(), out)
        });
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: no inputs");
        let v = {
            let nodes = self.nodes.borrow();
            let c = nodes[parts[0].0].value.cols();
            let mut rows = 0;
            let mut out = Vec::new();
            for p in parts {
                let t = &nodes[p.0].value;
                assert!(t.cols() == c && t.shape().len() == 2, "concat_rows: {:?} with width {c}", t.shape());
                rows += t.rows();
                out.extend_from_slice(t.values());
            }
            Tensor::matrix(rows, c, out)
        };
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn select_row(&self, a: Var, r: usize) -> Var {
        let v = self.with1(a, |x| {
            assert!(r < x.rows(), "select_row: row {r} of {:?}", x.shape());
            Tensor::row(x.row_slice(r).to_vec())
        });
        self.push(v, Op::SelectRow(a, r))
    }

    /// Scalar at flat (row-major) index `i`.
    pub fn element(&self, a: Var, i: usize) -> Var {
        let v = self.with1(a, |x| {
            assert!(i < x.len(), "element: index {i} of {:?}", x.shape());
            Tensor::scalar(x.values()[i])
        });
        self.push(v, Op::Element(a, i))
    }

    /// Running product over the flat values.
    pub fn cumprod(&self, a: Var) -> Var {
        let v = self.with1(a, |x| {
            let mut out = x.clone();
            let mut acc = 1.0;
            for p in out.values_mut() {
                acc *= *p;
                *p = acc;
            }
            out
        });
        self.push(v, Op::CumProd(a))
    }

    /// Sums a non-empty list of same-shape values.
    pub fn add_all(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "add_all: no inputs");
        parts[1..].iter().fold(parts[0], |acc, &p| self.add(acc, p))
    }

    /// Reverse pass from a scalar `loss`, returning gradients for every
    /// parameter in `store` (zeros for parameters the loss never read).
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients, DiffError> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0].value;
        if !root.is_scalar() {
            return Err(DiffError::NonScalarLoss(root.shape().to_vec()));
        }
        if let Some((node, op)) = self.nonfinite.get() {
            if node <= loss.0 {
                return Err(DiffError::NonFinite { op, node });
            }
        }
        let mut out = store.zero_gradients();
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(root.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            let y = &node.value;
            let val = |v: &Var| &nodes[v.0].value;
            match &node.op {
                Op::Const => {}
                Op::Param(id) => out.0[id.0].add_assign(&g),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|p| -p));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, g.zip_map(val(b), |p, q| p * q));
                    accumulate(&mut grads, *b, g.zip_map(val(a), |p, q| p * q));
                }
                Op::Affine(a, s) => accumulate(&mut grads, *a, g.map(|p| p * s)),
                Op::ScaleBy(a, k) => {
                    let kv = val(k).item();
                    let dk: f64 = g.values().iter().zip(val(a).values()).map(|(p, q)| p * q).sum();
                    accumulate(&mut grads, *a, g.map(|p| p * kv));
                    accumulate(&mut grads, *k, Tensor::filled(val(k).shape(), dk));
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul(&val(b).transpose());
                    let db = val(a).transpose().matmul(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::AddRow(m, r) => {
                    let c = g.cols();
                    let mut dr = vec![0.0; c];
                    for row in g.values().chunks(c) {
                        for (o, p) in dr.iter_mut().zip(row) {
                            *o += p;
                        }
                    }
                    accumulate(&mut grads, *r, Tensor::row(dr).reshaped(val(r).shape()));
                    accumulate(&mut grads, *m, g);
                }
                Op::MulRow(m, r) => {
                    let c = g.cols();
                    let rv = val(r).values();
                    let mv = val(m).values();
                    let mut dr = vec![0.0; c];
                    let mut dm = g.clone();
                    for (i, p) in dm.values_mut().iter_mut().enumerate() {
                        dr[i % c] += *p * mv[i];
                        *p *= rv[i % c];
                    }
                    accumulate(&mut grads, *r, Tensor::row(dr).reshaped(val(r).shape()));
                    accumulate(&mut grads, *m, dm);
                }
                Op::Tanh(a) => accumulate(&mut grads, *a, g.zip_map(y, |p, t| p * (1.0 - t * t))),
                Op::Sigmoid(a) => accumulate(&mut grads, *a, g.zip_map(y, |p, s| p * s * (1.0 - s))),
                Op::Gelu(a) => accumulate(&mut grads, *a, g.zip_map(val(a), |p, x| p * gelu_grad(x))),
                Op::Exp(a) => accumulate(&mut grads, *a, g.zip_map(y, |p, e| p * e)),
                Op::LogClamped(a, eps) => {
                    let eps = *eps;
                    accumulate(&mut grads, *a, g.zip_map(val(a), |p, x| if x > eps { p / x } else { 0.0 }))
                }
                Op::SoftmaxRows(a) => {
                    let c = y.cols();
                    let mut dx = g.clone();
                    for (drow, yrow) in dx.values_mut().chunks_mut(c).zip(y.values().chunks(c)) {
                        let dot: f64 = drow.iter().zip(yrow).map(|(p, q)| p * q).sum();
                        for (d, &s) in drow.iter_mut().zip(yrow) {
                            *d = s * (*d - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::LayerNormRows(a, inv_std) => {
                    let c = y.cols();
                    let n = c as f64;
                    let mut dx = g.clone();
                    for ((drow, yrow), is) in dx.values_mut().chunks_mut(c).zip(y.values().chunks(c)).zip(inv_std) {
                        let mean_d = drow.iter().sum::<f64>() / n;
                        let mean_dy = drow.iter().zip(yrow).map(|(p, q)| p * q).sum::<f64>() / n;
                        for (d, &yh) in drow.iter_mut().zip(yrow) {
                            *d = is * (*d - mean_d - yh * mean_dy);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Sum(a) => {
                    let s = g.item();
                    accumulate(&mut grads, *a, Tensor::filled(val(a).shape(), s));
                }
                Op::SumSq(a) => {
                    let s = g.item();
                    accumulate(&mut grads, *a, val(a).map(|x| 2.0 * s * x));
                }
                Op::MeanRows(a) => {
                    let x = val(a);
                    let r = x.rows() as f64;
                    let c = x.cols();
                    let mut dx = Tensor::zeros(x.shape());
                    for (i, d) in dx.values_mut().iter_mut().enumerate() {
                        *d = g.values()[i % c] / r;
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::SliceCols(a, start) => {
                    let x = val(a);
                    let mut dx = Tensor::zeros(x.shape());
                    let w = g.cols();
                    for r in 0..x.rows() {
                        for j in 0..w {
                            dx.set(r, start + j, g.get(r, j));
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::ConcatCols(a, b) => {
                    let ca = val(a).cols();
                    let cb = val(b).cols();
                    let rows = g.rows();
                    let mut da = Vec::with_capacity(rows * ca);
                    let mut db = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let row = g.row_slice(r);
                        da.extend_from_slice(&row[..ca]);
                        db.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads, *a, Tensor::matrix(rows, ca, da));
                    accumulate(&mut grads, *b, Tensor::matrix(rows, cb, db));
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let shape = val(p).shape().to_vec();
                        let n = val(p).len();
                        let slice = g.values()[offset..offset + n].to_vec();
                        debug_assert_eq!(n % c, 0);
                        accumulate(&mut grads, *p, Tensor::new(shape, slice).expect("concat_rows grad"));
                        offset += n;
                    }
                }
                Op::SelectRow(a, r) => {
                    let x = val(a);
                    let mut dx = Tensor::zeros(x.shape());
                    let c = x.cols();
                    dx.values_mut()[r * c..(r + 1) * c].copy_from_slice(g.values());
                    accumulate(&mut grads, *a, dx);
                }
                Op::Element(a, i) => {
                    let x = val(a);
                    let mut dx = Tensor::zeros(x.shape());
                    dx.values_mut()[*i] = g.item();
                    accumulate(&mut grads, *a, dx);
                }
                Op::CumProd(a) => {
                    let x = val(a).values();
                    let n = x.len();
                    let gv = g.values();
                    let mut dx = vec![0.0; n];
                    // d y_i / d x_j = prod_{l <= i, l != j} x_l, computed without division.
                    for (j, d) in dx.iter_mut().enumerate() {
                        let mut prod = 1.0;
                        for l in 0..j {
                            prod *= x[l];
                        }
                        let mut acc = 0.0;
                        for i in j..n {
                            if i > j {
                                prod *= x[i];
                            }
                            acc += gv[i] * prod;
                        }
                        *d = acc;
                    }
                    accumulate(&mut grads, *a, Tensor::new(val(a).shape().to_vec(), dx).expect("cumprod grad"));
                }
            }
        }
        Ok(out)
    }

    /// Runs [`Tape::backward`] and writes the result into the store's gradient slots.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<(), DiffError> {
        let grads = self.backward(loss, store)?;
        store.set_grads(&grads);
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for p in row.iter_mut() {
        *p = (*p - max).exp();
        total += *p;
    }
    for p in row.iter_mut() {
        *p /= total;
    }
}
