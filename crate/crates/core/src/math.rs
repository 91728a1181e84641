//! Value-only numeric kernels.
//!
//! Both the differentiable tape and the no-gradient inference paths (action
//! selection, target networks, evaluation) call these, so the two paths can
//! never disagree on forward values.

/// out[b,m] = sum_n x[b,n] * w[m,n]   (x: [B,n] row-major, w: [m,n] row-major)
pub fn matmul_nt(x: &[f64], b: usize, n: usize, w: &[f64], m: usize, out: &mut [f64]) {
    debug_assert_eq!(x.len(), b * n);
    debug_assert_eq!(w.len(), m * n);
    debug_assert_eq!(out.len(), b * m);
    for bi in 0..b {
        let xrow = &x[bi * n..(bi + 1) * n];
        let orow = &mut out[bi * m..(bi + 1) * m];
        for (mi, o) in orow.iter_mut().enumerate() {
            let wrow = &w[mi * n..(mi + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                acc += xrow[i] * wrow[i];
            }
            *o = acc;
        }
    }
}

/// out[b,n] += sum_m g[b,m] * w[m,n]
pub fn matmul_nn_acc(g: &[f64], b: usize, m: usize, w: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(g.len(), b * m);
    debug_assert_eq!(w.len(), m * n);
    debug_assert_eq!(out.len(), b * n);
    for bi in 0..b {
        let grow = &g[bi * m..(bi + 1) * m];
        let orow = &mut out[bi * n..(bi + 1) * n];
        for mi in 0..m {
            let gv = grow[mi];
            if gv == 0.0 {
                continue;
            }
            let wrow = &w[mi * n..(mi + 1) * n];
            for i in 0..n {
                orow[i] += gv * wrow[i];
            }
        }
    }
}

/// out[m,n] += sum_b g[b,m] * x[b,n]
pub fn matmul_tn_acc(g: &[f64], b: usize, m: usize, x: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(g.len(), b * m);
    debug_assert_eq!(x.len(), b * n);
    debug_assert_eq!(out.len(), m * n);
    for bi in 0..b {
        let grow = &g[bi * m..(bi + 1) * m];
        let xrow = &x[bi * n..(bi + 1) * n];
        for mi in 0..m {
            let gv = grow[mi];
            if gv == 0.0 {
                continue;
            }
            let orow = &mut out[mi * n..(mi + 1) * n];
            for i in 0..n {
                orow[i] += gv * xrow[i];
            }
        }
    }
}

/// out[m] += sum_b g[b,m]
pub fn colsum_acc(g: &[f64], b: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(g.len(), b * m);
    debug_assert_eq!(out.len(), m);
    for bi in 0..b {
        let grow = &g[bi * m..(bi + 1) * m];
        for mi in 0..m {
            out[mi] += grow[mi];
        }
    }
}

/// Elementwise activation kinds used by the agent networks and mixers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
    Sigmoid,
    Abs,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Abs => x.abs(),
        }
    }

    /// Derivative given the input `x` and the already-computed output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of one GRU cell, as raw slices. Shapes:
/// w_*: [hidden, input], u_*: [hidden, hidden], b_*: [hidden].
#[derive(Clone, Copy)]
pub struct GruWeights<'a> {
    pub wz: &'a [f64],
    pub uz: &'a [f64],
    pub bz: &'a [f64],
    pub wr: &'a [f64],
    pub ur: &'a [f64],
    pub br: &'a [f64],
    pub wn: &'a [f64],
    pub un: &'a [f64],
    pub bn: &'a [f64],
}

/// Gate values saved by the forward pass for the backward pass.
pub struct GruSaved {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// u = h · Unᵀ, the recurrent candidate pre-product.
    pub u: Vec<f64>,
}

/// Batched GRU cell forward.
///
/// Convention: z = σ(Wz·x + Uz·h + bz), r = σ(Wr·x + Ur·h + br),
/// n = tanh(Wn·x + r∘(Un·h) + bn), h' = (1−z)∘n + z∘h.
pub fn gru_forward(
    x: &[f64],
    h: &[f64],
    b: usize,
    d_in: usize,
    d_h: usize,
    w: GruWeights,
    out: &mut [f64],
) -> GruSaved {
    debug_assert_eq!(x.len(), b * d_in);
    debug_assert_eq!(h.len(), b * d_h);
    debug_assert_eq!(out.len(), b * d_h);
    let mut z = vec![0.0; b * d_h];
    let mut r = vec![0.0; b * d_h];
    let mut n = vec![0.0; b * d_h];
    let mut u = vec![0.0; b * d_h];
    let mut tmp = vec![0.0; b * d_h];

    // z
    matmul_nt(x, b, d_in, w.wz, d_h, &mut z);
    matmul_nt(h, b, d_h, w.uz, d_h, &mut tmp);
    for bi in 0..b {
        for i in 0..d_h {
            let k = bi * d_h + i;
            z[k] = sigmoid(z[k] + tmp[k] + w.bz[i]);
        }
    }
    // r
    matmul_nt(x, b, d_in, w.wr, d_h, &mut r);
    matmul_nt(h, b, d_h, w.ur, d_h, &mut tmp);
    for bi in 0..b {
        for i in 0..d_h {
            let k = bi * d_h + i;
            r[k] = sigmoid(r[k] + tmp[k] + w.br[i]);
        }
    }
    // n and h'
    matmul_nt(x, b, d_in, w.wn, d_h, &mut n);
    matmul_nt(h, b, d_h, w.un, d_h, &mut u);
    for bi in 0..b {
        for i in 0..d_h {
            let k = bi * d_h + i;
            n[k] = (n[k] + r[k] * u[k] + w.bn[i]).tanh();
            out[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
        }
    }
    GruSaved { z, r, n, u }
}

/// Gradient slots for one GRU cell's weights; mirrors [`GruWeights`].
pub struct GruGrads<'a> {
    pub wz: &'a mut [f64],
    pub uz: &'a mut [f64],
    pub bz: &'a mut [f64],
    pub wr: &'a mut [f64],
    pub ur: &'a mut [f64],
    pub br: &'a mut [f64],
    pub wn: &'a mut [f64],
    pub un: &'a mut [f64],
    pub bn: &'a mut [f64],
}

/// Batched GRU cell backward; accumulates into gx, gh, and the weight grads.
#[allow(clippy::too_many_arguments)]
pub fn gru_backward(
    g_out: &[f64],
    x: &[f64],
    h: &[f64],
    b: usize,
    d_in: usize,
    d_h: usize,
    w: GruWeights,
    saved: &GruSaved,
    gx: &mut [f64],
    gh: &mut [f64],
    grads: GruGrads,
) {
    let len = b * d_h;
    let mut g_sz = vec![0.0; len];
    let mut g_sr = vec![0.0; len];
    let mut g_sn = vec![0.0; len];

    for k in 0..len {
        let g = g_out[k];
        let (z, r, n, u) = (saved.z[k], saved.r[k], saved.n[k], saved.u[k]);
        let hk = h[k];
        let g_z = g * (hk - n);
        let g_n = g * (1.0 - z);
        gh[k] += g * z;
        let gsn = g_n * (1.0 - n * n);
        g_sn[k] = gsn;
        g_sr[k] = gsn * u * (r * (1.0 - r));
        g_sz[k] = g_z * (z * (1.0 - z));
    }

    // n-branch: sn = Wn·x + r∘u + bn, u = Un·h
    matmul_tn_acc(&g_sn, b, d_h, x, d_in, grads.wn);
    matmul_nn_acc(&g_sn, b, d_h, w.wn, d_in, gx);
    colsum_acc(&g_sn, b, d_h, grads.bn);
    let g_u: Vec<f64> = (0..len).map(|k| g_sn[k] * saved.r[k]).collect();
    matmul_tn_acc(&g_u, b, d_h, h, d_h, grads.un);
    matmul_nn_acc(&g_u, b, d_h, w.un, d_h, gh);

    // z-branch
    matmul_tn_acc(&g_sz, b, d_h, x, d_in, grads.wz);
    matmul_nn_acc(&g_sz, b, d_h, w.wz, d_in, gx);
    matmul_tn_acc(&g_sz, b, d_h, h, d_h, grads.uz);
    matmul_nn_acc(&g_sz, b, d_h, w.uz, d_h, gh);
    colsum_acc(&g_sz, b, d_h, grads.bz);

    // r-branch
    matmul_tn_acc(&g_sr, b, d_h, x, d_in, grads.wr);
    matmul_nn_acc(&g_sr, b, d_h, w.wr, d_in, gx);
    matmul_tn_acc(&g_sr, b, d_h, h, d_h, grads.ur);
    matmul_nn_acc(&g_sr, b, d_h, w.ur, d_h, gh);
    colsum_acc(&g_sr, b, d_h, grads.br);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_nt_small() {
        // x = [1,2], w = [[1,1],[2,0]] -> [3, 2]
        let x = [1.0, 2.0];
        let w = [1.0, 1.0, 2.0, 0.0];
        let mut out = [0.0; 2];
        matmul_nt(&x, 1, 2, &w, 2, &mut out);
        assert_eq!(out, [3.0, 2.0]);
    }

    #[test]
    fn matmul_roundtrip_shapes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // [2,3]
        let w = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]; // [2,3]
        let mut out = [0.0; 4];
        matmul_nt(&x, 2, 3, &w, 2, &mut out);
        assert_eq!(out, [1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        let e = Activation::Elu.apply(-1.0);
        assert!((e - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((e + 0.632121).abs() < 1e-6);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(40.0) < 1.0 && sigmoid(40.0) > 0.999);
        assert_eq!(Activation::Abs.apply(-2.5), 2.5);
    }

    #[test]
    fn gru_zero_params_halves_hidden() {
        let d_in = 3;
        let d_h = 4;
        let zeros_w = vec![0.0; d_h * d_in];
        let zeros_u = vec![0.0; d_h * d_h];
        let zeros_b = vec![0.0; d_h];
        let w = GruWeights {
            wz: &zeros_w,
            uz: &zeros_u,
            bz: &zeros_b,
            wr: &zeros_w,
            ur: &zeros_u,
            br: &zeros_b,
            wn: &zeros_w,
            un: &zeros_u,
            bn: &zeros_b,
        };
        let x = [0.3, -0.4, 2.0];
        let h = [1.0, -2.0, 0.5, 0.0];
        let mut out = [0.0; 4];
        gru_forward(&x, &h, 1, d_in, d_h, w, &mut out);
        // z = sigmoid(0) = 0.5, n = tanh(0) = 0 so h' = 0.5 h
        for i in 0..d_h {
            assert!((out[i] - 0.5 * h[i]).abs() < 1e-15);
        }
        // and with h = 0, h' = 0
        let h0 = [0.0; 4];
        gru_forward(&x, &h0, 1, d_in, d_h, w, &mut out);
        assert_eq!(out, [0.0; 4]);
    }
}
