//! Tape-based reverse-mode differentiation over [`Array`] values.
//!
//! Ops are batched (whole minibatches flow through one node), so the tape
//! stays short even when a loss spans an unrolled recurrent episode. Each op
//! records exactly what its hand-written backward rule needs; the finite-
//! difference checker in [`crate::gradcheck`] is the oracle for every rule.
//!
//! Nodes are appended in topological order, so one reverse sweep propagates
//! gradients. Intermediate gradients are dropped as soon as they have been
//! consumed; leaf gradients survive for extraction.

use crate::array::Array;
use crate::error::{CoreError, Result};
use crate::math::{self, Activation, GruGrads, GruSaved, GruWeights};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// References to the nine parameter nodes of a GRU cell.
#[derive(Debug, Clone, Copy)]
pub struct GruParamNodes {
    pub wz: NodeId,
    pub uz: NodeId,
    pub bz: NodeId,
    pub wr: NodeId,
    pub ur: NodeId,
    pub br: NodeId,
    pub wn: NodeId,
    pub un: NodeId,
    pub bn: NodeId,
}

enum Op {
    Leaf,
    /// out = x · Wᵀ + b, x: [B,n] (or [n]), W: [m,n], b: [m]
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Activation { x: NodeId, kind: Activation },
    Gru {
        x: NodeId,
        h: NodeId,
        p: GruParamNodes,
        d_in: usize,
        d_h: usize,
        saved: GruSaved,
    },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// Elementwise product with a constant array (masks, stop-gradient data).
    MulConst { x: NodeId, c: Array },
    AddScalar { x: NodeId },
    Scale { x: NodeId, c: f64 },
    /// out[b,e] = Σ_n q[b,n] · w[b, n·E+e]; per-row vector–matrix product.
    RowMatVec { q: NodeId, w: NodeId, n: usize, e: usize },
    /// out[b] = Σ_m a[b,m] · b[b,m]
    DotRows { a: NodeId, b: NodeId },
    /// out[b] = Σ_n x[b,n]
    SumRows { x: NodeId },
    /// out[b] = x[b, idx[b]]
    GatherCols { x: NodeId, idx: Vec<usize> },
    SumAll { x: NodeId },
    Reshape { x: NodeId },
}

struct Node {
    value: Array,
    op: Op,
}

/// A single-use gradient tape. Build a forward computation, call
/// [`Tape::backward`] once from a scalar node, then read leaf gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    ran_backward: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        id
    }

    /// Records an input value. Leaves are both parameters and constants;
    /// gradients accumulate for all of them and are read selectively.
    pub fn leaf(&mut self, value: Array) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    /// Gradient of the backward root with respect to this node.
    /// Zero if the node does not influence the root. Only leaves retain
    /// gradients after the sweep.
    pub fn grad(&self, id: NodeId) -> &[f64] {
        self.grads[id.0]
            .as_deref()
            .expect("gradient not available; call backward() first (interior grads are dropped)")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// x · Wᵀ + b. Accepts x of shape [n] or [B,n]; W: [m,n]; b: [m].
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let n = xv.cols();
        let rows = xv.rows();
        if wv.shape().len() != 2 || wv.shape()[1] != n {
            return Err(CoreError::config(format!(
                "affine: weight shape {:?} does not accept input width {n}",
                wv.shape()
            )));
        }
        let m = wv.shape()[0];
        if bv.len() != m {
            return Err(CoreError::config(format!(
                "affine: bias length {} does not match output width {m}",
                bv.len()
            )));
        }
        let mut out = vec![0.0; rows * m];
        math::matmul_nt(xv.data(), rows, n, wv.data(), m, &mut out);
        for row in out.chunks_mut(m) {
            for (o, bias) in row.iter_mut().zip(bv.data()) {
                *o += bias;
            }
        }
        let shape: Vec<usize> = if xv.shape().len() == 1 {
            vec![m]
        } else {
            vec![rows, m]
        };
        let value = Array::from_vec(&shape, out)?;
        Ok(self.push(value, Op::Affine { x, w, b }))
    }

    pub fn activation(&mut self, kind: Activation, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let data: Vec<f64> = xv.data().iter().map(|&v| kind.apply(v)).collect();
        let value = Array::from_vec(xv.shape(), data).expect("same shape");
        self.push(value, Op::Activation { x, kind })
    }

    /// One GRU cell step. x: [B,d_in], h: [B,d_h]; returns h': [B,d_h].
    pub fn gru_cell(&mut self, x: NodeId, h: NodeId, p: GruParamNodes) -> Result<NodeId> {
        let xv = self.value(x);
        let hv = self.value(h);
        let rows = xv.rows();
        let d_in = xv.cols();
        let d_h = hv.cols();
        if hv.rows() != rows {
            return Err(CoreError::config(format!(
                "gru_cell: batch mismatch between input rows {rows} and hidden rows {}",
                hv.rows()
            )));
        }
        let w = self.gru_weights(p, d_in, d_h)?;
        let mut out = vec![0.0; rows * d_h];
        let saved = math::gru_forward(xv.data(), hv.data(), rows, d_in, d_h, w, &mut out);
        let shape: Vec<usize> = if xv.shape().len() == 1 {
            vec![d_h]
        } else {
            vec![rows, d_h]
        };
        let value = Array::from_vec(&shape, out)?;
        Ok(self.push(value, Op::Gru { x, h, p, d_in, d_h, saved }))
    }

    fn gru_weights(&self, p: GruParamNodes, d_in: usize, d_h: usize) -> Result<GruWeights<'_>> {
        let check = |id: NodeId, rows: usize, cols: usize, what: &str| -> Result<&[f64]> {
            let v = self.value(id);
            if v.len() != rows * cols {
                return Err(CoreError::config(format!(
                    "gru_cell: {what} has {} entries, expected {rows}x{cols}",
                    v.len()
                )));
            }
            Ok(v.data())
        };
        Ok(GruWeights {
            wz: check(p.wz, d_h, d_in, "Wz")?,
            uz: check(p.uz, d_h, d_h, "Uz")?,
            bz: check(p.bz, d_h, 1, "bz")?,
            wr: check(p.wr, d_h, d_in, "Wr")?,
            ur: check(p.ur, d_h, d_h, "Ur")?,
            br: check(p.br, d_h, 1, "br")?,
            wn: check(p.wn, d_h, d_in, "Wn")?,
            un: check(p.un, d_h, d_h, "Un")?,
            bn: check(p.bn, d_h, 1, "bn")?,
        })
    }

    fn binary_elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.len(), bv.len(), "elementwise shape mismatch");
        let data: Vec<f64> = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Array::from_vec(av.shape(), data).expect("same shape");
        self.push(value, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    /// Elementwise product with a constant (no gradient flows into `c`).
    pub fn mul_const(&mut self, x: NodeId, c: Array) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.len(), c.len(), "mul_const shape mismatch");
        let data: Vec<f64> = xv.data().iter().zip(c.data()).map(|(&a, &b)| a * b).collect();
        let value = Array::from_vec(xv.shape(), data).expect("same shape");
        self.push(value, Op::MulConst { x, c })
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let xv = self.value(x);
        let data: Vec<f64> = xv.data().iter().map(|&v| v + c).collect();
        let value = Array::from_vec(xv.shape(), data).expect("same shape");
        self.push(value, Op::AddScalar { x })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let xv = self.value(x);
        let data: Vec<f64> = xv.data().iter().map(|&v| v * c).collect();
        let value = Array::from_vec(xv.shape(), data).expect("same shape");
        self.push(value, Op::Scale { x, c })
    }

    /// Per-row vector–matrix product: q: [B,N], w: [B,N·E] → [B,E].
    pub fn row_mat_vec(&mut self, q: NodeId, w: NodeId, n: usize, e: usize) -> NodeId {
        let qv = self.value(q);
        let wv = self.value(w);
        let b = qv.rows();
        assert_eq!(qv.cols(), n, "row_mat_vec: q width");
        assert_eq!(wv.rows(), b, "row_mat_vec: batch mismatch");
        assert_eq!(wv.cols(), n * e, "row_mat_vec: w width");
        let mut out = vec![0.0; b * e];
        for bi in 0..b {
            let qrow = &qv.data()[bi * n..(bi + 1) * n];
            let wrow = &wv.data()[bi * n * e..(bi + 1) * n * e];
            let orow = &mut out[bi * e..(bi + 1) * e];
            for (ni, &qn) in qrow.iter().enumerate() {
                let wslice = &wrow[ni * e..(ni + 1) * e];
                for (o, &wv) in orow.iter_mut().zip(wslice) {
                    *o += qn * wv;
                }
            }
        }
        let value = Array::from_vec(&[b, e], out).expect("shape");
        self.push(value, Op::RowMatVec { q, w, n, e })
    }

    /// Row-wise dot product: a, b: [B,M] → [B].
    pub fn dot_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        let rows = av.rows();
        let m = av.cols();
        assert_eq!(bv.rows(), rows, "dot_rows batch mismatch");
        assert_eq!(bv.cols(), m, "dot_rows width mismatch");
        let out: Vec<f64> = (0..rows)
            .map(|bi| {
                let ar = &av.data()[bi * m..(bi + 1) * m];
                let br = &bv.data()[bi * m..(bi + 1) * m];
                ar.iter().zip(br).map(|(&x, &y)| x * y).sum()
            })
            .collect();
        let value = Array::from_vec(&[rows], out).expect("shape");
        self.push(value, Op::DotRows { a, b })
    }

    /// Row sums: x: [B,N] → [B].
    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let rows = xv.rows();
        let n = xv.cols();
        let out: Vec<f64> = (0..rows)
            .map(|bi| xv.data()[bi * n..(bi + 1) * n].iter().sum())
            .collect();
        let value = Array::from_vec(&[rows], out).expect("shape");
        self.push(value, Op::SumRows { x })
    }

    /// Per-row column pick: out[b] = x[b, idx[b]].
    pub fn gather_cols(&mut self, x: NodeId, idx: Vec<usize>) -> NodeId {
        let xv = self.value(x);
        let rows = xv.rows();
        let cols = xv.cols();
        assert_eq!(idx.len(), rows, "gather_cols index length");
        let out: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(bi, &j)| {
                assert!(j < cols, "gather_cols index out of range");
                xv.data()[bi * cols + j]
            })
            .collect();
        let value = Array::from_vec(&[rows], out).expect("shape");
        self.push(value, Op::GatherCols { x, idx })
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).data().iter().sum();
        self.push(Array::scalar(total), Op::SumAll { x })
    }

    /// Same data viewed under a new shape.
    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    fn grad_slot(&mut self, id: NodeId) -> &mut Vec<f64> {
        let len = self.nodes[id.0].value.len();
        self.grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    /// Reverse sweep from a scalar node. Leaf gradients are retained; interior
    /// gradients are dropped once consumed.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.ran_backward {
            return Err(CoreError::contract("backward() may run once per tape".into()));
        }
        self.ran_backward = true;
        if self.nodes[root.0].value.len() != 1 {
            return Err(CoreError::contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        *self.grad_slot(root) = vec![1.0];

        for i in (0..self.nodes.len()).rev() {
            let g = match self.grads[i].take() {
                Some(g) => g,
                None => continue, // node does not influence the root
            };
            // Leaves keep their gradient for extraction.
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.grads[i] = Some(g);
                continue;
            }
            self.apply_backward(i, &g);
        }
        Ok(())
    }

    fn apply_backward(&mut self, i: usize, g: &[f64]) {
        // Take the op out to appease the borrow checker; values of other
        // nodes stay accessible through self.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => unreachable!("leaf handled by caller"),
            Op::Affine { x, w, b } => {
                let rows = self.nodes[x.0].value.rows();
                let n = self.nodes[x.0].value.cols();
                let m = self.nodes[w.0].value.shape()[0];
                {
                    let wv = self.nodes[w.0].value.data().to_vec();
                    let gx = self.grad_slot(*x);
                    math::matmul_nn_acc(g, rows, m, &wv, n, gx);
                }
                {
                    let xv = self.nodes[x.0].value.data().to_vec();
                    let gw = self.grad_slot(*w);
                    math::matmul_tn_acc(g, rows, m, &xv, n, gw);
                }
                {
                    let gb = self.grad_slot(*b);
                    math::colsum_acc(g, rows, m, gb);
                }
            }
            Op::Activation { x, kind } => {
                let y = &self.nodes[i].value;
                let xv = &self.nodes[x.0].value;
                let local: Vec<f64> = xv
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(g)
                    .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                    .collect();
                let gx = self.grad_slot(*x);
                for (dst, src) in gx.iter_mut().zip(&local) {
                    *dst += src;
                }
            }
            Op::Gru { x, h, p, d_in, d_h, saved } => {
                let rows = self.nodes[x.0].value.rows();
                let xv = self.nodes[x.0].value.data().to_vec();
                let hv = self.nodes[h.0].value.data().to_vec();
                let weights_owned: Vec<Vec<f64>> = [p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wn, p.un, p.bn]
                    .iter()
                    .map(|id| self.nodes[id.0].value.data().to_vec())
                    .collect();
                let w = GruWeights {
                    wz: &weights_owned[0],
                    uz: &weights_owned[1],
                    bz: &weights_owned[2],
                    wr: &weights_owned[3],
                    ur: &weights_owned[4],
                    br: &weights_owned[5],
                    wn: &weights_owned[6],
                    un: &weights_owned[7],
                    bn: &weights_owned[8],
                };
                let mut gx = vec![0.0; rows * d_in];
                let mut gh = vec![0.0; rows * d_h];
                let mut gwz = vec![0.0; d_h * d_in];
                let mut guz = vec![0.0; d_h * d_h];
                let mut gbz = vec![0.0; *d_h];
                let mut gwr = vec![0.0; d_h * d_in];
                let mut gur = vec![0.0; d_h * d_h];
                let mut gbr = vec![0.0; *d_h];
                let mut gwn = vec![0.0; d_h * d_in];
                let mut gun = vec![0.0; d_h * d_h];
                let mut gbn = vec![0.0; *d_h];
                math::gru_backward(
                    g,
                    &xv,
                    &hv,
                    rows,
                    *d_in,
                    *d_h,
                    w,
                    saved,
                    &mut gx,
                    &mut gh,
                    GruGrads {
                        wz: &mut gwz,
                        uz: &mut guz,
                        bz: &mut gbz,
                        wr: &mut gwr,
                        ur: &mut gur,
                        br: &mut gbr,
                        wn: &mut gwn,
                        un: &mut gun,
                        bn: &mut gbn,
                    },
                );
                let pairs: [(NodeId, &Vec<f64>); 11] = [
                    (*x, &gx),
                    (*h, &gh),
                    (p.wz, &gwz),
                    (p.uz, &guz),
                    (p.bz, &gbz),
                    (p.wr, &gwr),
                    (p.ur, &gur),
                    (p.br, &gbr),
                    (p.wn, &gwn),
                    (p.un, &gun),
                    (p.bn, &gbn),
                ];
                for (id, src) in pairs {
                    let dst = self.grad_slot(id);
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            Op::Add { a, b } => {
                for id in [a, b] {
                    let dst = self.grad_slot(*id);
                    for (d, s) in dst.iter_mut().zip(g) {
                        *d += s;
                    }
                }
            }
            Op::Sub { a, b } => {
                {
                    let dst = self.grad_slot(*a);
                    for (d, s) in dst.iter_mut().zip(g) {
                        *d += s;
                    }
                }
                {
                    let dst = self.grad_slot(*b);
                    for (d, s) in dst.iter_mut().zip(g) {
                        *d -= s;
                    }
                }
            }
            Op::Mul { a, b } => {
                let av = self.nodes[a.0].value.data().to_vec();
                let bv = self.nodes[b.0].value.data().to_vec();
                {
                    let dst = self.grad_slot(*a);
                    for i in 0..dst.len() {
                        dst[i] += g[i] * bv[i];
                    }
                }
                {
                    let dst = self.grad_slot(*b);
                    for i in 0..dst.len() {
                        dst[i] += g[i] * av[i];
                    }
                }
            }
            Op::MulConst { x, c } => {
                let cv = c.data().to_vec();
                let dst = self.grad_slot(*x);
                for i in 0..dst.len() {
                    dst[i] += g[i] * cv[i];
                }
            }
            Op::AddScalar { x } | Op::Reshape { x } => {
                let dst = self.grad_slot(*x);
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += s;
                }
            }
            Op::Scale { x, c } => {
                let c = *c;
                let dst = self.grad_slot(*x);
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += c * s;
                }
            }
            Op::RowMatVec { q, w, n, e } => {
                let (n, e) = (*n, *e);
                let b = self.nodes[q.0].value.rows();
                let qv = self.nodes[q.0].value.data().to_vec();
                let wv = self.nodes[w.0].value.data().to_vec();
                {
                    let gq = self.grad_slot(*q);
                    for bi in 0..b {
                        let grow = &g[bi * e..(bi + 1) * e];
                        let wrow = &wv[bi * n * e..(bi + 1) * n * e];
                        for ni in 0..n {
                            let ws = &wrow[ni * e..(ni + 1) * e];
                            let mut acc = 0.0;
                            for ei in 0..e {
                                acc += grow[ei] * ws[ei];
                            }
                            gq[bi * n + ni] += acc;
                        }
                    }
                }
                {
                    let gw = self.grad_slot(*w);
                    for bi in 0..b {
                        let grow = &g[bi * e..(bi + 1) * e];
                        let qrow = &qv[bi * n..(bi + 1) * n];
                        let gwrow = &mut gw[bi * n * e..(bi + 1) * n * e];
                        for (ni, &qn) in qrow.iter().enumerate() {
                            let gws = &mut gwrow[ni * e..(ni + 1) * e];
                            for ei in 0..e {
                                gws[ei] += qn * grow[ei];
                            }
                        }
                    }
                }
            }
            Op::DotRows { a, b } => {
                let rows = self.nodes[a.0].value.rows();
                let m = self.nodes[a.0].value.cols();
                let av = self.nodes[a.0].value.data().to_vec();
                let bv = self.nodes[b.0].value.data().to_vec();
                {
                    let ga = self.grad_slot(*a);
                    for bi in 0..rows {
                        for mi in 0..m {
                            ga[bi * m + mi] += g[bi] * bv[bi * m + mi];
                        }
                    }
                }
                {
                    let gb = self.grad_slot(*b);
                    for bi in 0..rows {
                        for mi in 0..m {
                            gb[bi * m + mi] += g[bi] * av[bi * m + mi];
                        }
                    }
                }
            }
            Op::SumRows { x } => {
                let rows = self.nodes[x.0].value.rows();
                let n = self.nodes[x.0].value.cols();
                let gx = self.grad_slot(*x);
                for bi in 0..rows {
                    for ni in 0..n {
                        gx[bi * n + ni] += g[bi];
                    }
                }
            }
            Op::GatherCols { x, idx } => {
                let cols = self.nodes[x.0].value.cols();
                let gx = self.grad_slot(*x);
                for (bi, &j) in idx.iter().enumerate() {
                    gx[bi * cols + j] += g[bi];
                }
            }
            Op::SumAll { x } => {
                let gx = self.grad_slot(*x);
                for d in gx.iter_mut() {
                    *d += g[0];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_zero_weights() {
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0]));
        let w = t.leaf(Array::zeros(&[2, 2]));
        let b = t.leaf(Array::zeros(&[2]));
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_identity() {
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0]));
        let w = t.leaf(Array::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = t.leaf(Array::zeros(&[2]));
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, 2.0]);
    }

    #[test]
    fn affine_hand_example() {
        // x=[1,2], W=[[1,1],[2,0]], b=[0.5,-1] -> [3.5, 1]
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0]));
        let w = t.leaf(Array::from_vec(&[2, 2], vec![1.0, 1.0, 2.0, 0.0]).unwrap());
        let b = t.leaf(Array::vector(&[0.5, -1.0]));
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[3.5, 1.0]);
    }

    #[test]
    fn affine_shape_mismatch_is_config_error() {
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0, 3.0]));
        let w = t.leaf(Array::zeros(&[2, 2]));
        let b = t.leaf(Array::zeros(&[2]));
        assert!(t.affine(x, w, b).is_err());
    }

    #[test]
    fn backward_through_affine_matches_hand_gradients() {
        // f = sum(W·x + b); df/dx = colsum(W), df/dW = x broadcast, df/db = 1
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0]));
        let w = t.leaf(Array::from_vec(&[2, 2], vec![1.0, 1.0, 2.0, 0.0]).unwrap());
        let b = t.leaf(Array::vector(&[0.5, -1.0]));
        let y = t.affine(x, w, b).unwrap();
        let loss = t.sum_all(y);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x), &[3.0, 1.0]);
        assert_eq!(t.grad(w), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(t.grad(b), &[1.0, 1.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        // f = sum(x * x): df/dx = 2x
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[3.0, -1.0]));
        let y = t.mul(x, x);
        let loss = t.sum_all(y);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x), &[6.0, -2.0]);
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let mut t = Tape::new();
        let x = t.leaf(Array::from_vec(&[2, 3], vec![1.0, 5.0, 3.0, 0.0, 2.0, 4.0]).unwrap());
        let picked = t.gather_cols(x, vec![1, 2]);
        assert_eq!(t.value(picked).data(), &[5.0, 4.0]);
        let loss = t.sum_all(picked);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x), &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut t = Tape::new();
        let x = t.leaf(Array::vector(&[1.0, 2.0]));
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn determinism_bitwise() {
        let run = || {
            let mut t = Tape::new();
            let x = t.leaf(Array::vector(&[0.3, -0.7, 1.9]));
            let w = t.leaf(Array::from_vec(&[2, 3], vec![0.1, -0.2, 0.5, 0.7, 0.11, -0.3]).unwrap());
            let b = t.leaf(Array::vector(&[0.01, -0.02]));
            let y = t.affine(x, w, b).unwrap();
            let a = t.activation(Activation::Tanh, y);
            let loss = t.sum_all(a);
            t.backward(loss).unwrap();
            (
                t.value(loss).data().to_vec(),
                t.grad(w).to_vec(),
            )
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert_eq!(v1, v2);
        assert_eq!(g1, g2);
    }
}
