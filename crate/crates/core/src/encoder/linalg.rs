//! Row-major dense kernels used by the encoder.

use crate::scalar::Scalar;

/// `a (n×k) · b (k×m)`.
pub(crate) fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `out (k×m) += aᵀ · b` for `a (n×k)`, `b (n×m)`.
pub(crate) fn matmul_tn_acc<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out (n×k) += a (n×m) · bᵀ` for `b (k×m)`.
pub(crate) fn matmul_nt_acc<T: Scalar>(a: &[T], b: &[T], n: usize, m: usize, k: usize, out: &mut [T]) {
    for i in 0..n {
        let arow = &a[i * m..(i + 1) * m];
        for j in 0..k {
            let brow = &b[j * m..(j + 1) * m];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s = s + x * y;
            }
            out[i * k + j] = out[i * k + j] + s;
        }
    }
}

pub(crate) fn add_bias<T: Scalar>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v = *v + b;
        }
    }
}

/// Column sums of `x (n×m)` added into `out (m)`.
pub(crate) fn colsum_acc<T: Scalar>(x: &[T], out: &mut [T]) {
    for row in x.chunks(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) struct NormCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub(crate) fn layer_norm<T: Scalar>(x: &[T], gain: &[T], bias: &[T]) -> (Vec<T>, NormCache<T>) {
    let d = gain.len();
    let n = x.len() / d;
    let inv_d = T::one() / T::of(d as f64);
    let eps = T::of(LN_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().fold(T::zero(), |s, &v| s + v) * inv_d;
        let var = row.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) * inv_d;
        let r = T::one() / (var + eps).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (row[j] - mean) * r;
            xhat[i * d + j] = h;
            y[i * d + j] = h * gain[j] + bias[j];
        }
    }
    (y, NormCache { xhat, rstd })
}

/// Backward of [`layer_norm`]; accumulates gain/bias gradients and returns
/// the input gradient.
pub(crate) fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    cache: &NormCache<T>,
    gain: &[T],
    dgain: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let d = gain.len();
    let n = dy.len() / d;
    let inv_d = T::one() / T::of(d as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); d];
    for i in 0..n {
        let (dyr, xh) = (&dy[i * d..(i + 1) * d], &cache.xhat[i * d..(i + 1) * d]);
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for j in 0..d {
            dgain[j] = dgain[j] + dyr[j] * xh[j];
            dbias[j] = dbias[j] + dyr[j];
            dxhat[j] = dyr[j] * gain[j];
            mean_dxhat = mean_dxhat + dxhat[j];
            mean_dxhat_xhat = mean_dxhat_xhat + dxhat[j] * xh[j];
        }
        mean_dxhat = mean_dxhat * inv_d;
        mean_dxhat_xhat = mean_dxhat_xhat * inv_d;
        for j in 0..d {
            dx[i * d + j] = cache.rstd[i] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub(crate) fn gelu<T: Scalar>(u: T) -> T {
    let k = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    half * u * (T::one() + (k * (u + T::of(GELU_A) * u * u * u)).tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(u: T) -> T {
    let k = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    let a = T::of(GELU_A);
    let t = (k * (u + a * u * u * u)).tanh();
    half * (T::one() + t) + half * u * (T::one() - t * t) * k * (T::one() + T::of(3.0) * a * u * u)
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
