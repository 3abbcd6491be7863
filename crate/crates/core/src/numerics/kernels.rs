//! Forward and backward kernels over [`Tensor`]. Every forward function is
//! pure; the tape in `tape.rs` composes them.

use crate::error::{Error, Result};
use crate::numerics::flops;
use crate::numerics::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

// ---------------------------------------------------------------------------
// GEMM helpers over row-major slices. All of them accumulate into `c`.

/// c[m×n] += a[m×k] · b[k×n]
fn gemm_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// c[m×k] += a[m×n] · b[k×n]ᵀ
fn gemm_nt<T: Scalar>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            c[i * k + j] += acc;
        }
    }
}

/// c[k×n] += a[m×k]ᵀ · b[m×n]
fn gemm_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// matmul

struct MatmulLayout {
    out_shape: Vec<usize>,
    batch: usize,
    a_batched: bool,
    b_batched: bool,
    m: usize,
    k: usize,
    n: usize,
}

fn matmul_layout(a: &[usize], b: &[usize]) -> Result<MatmulLayout> {
    let mismatch = || Error::Shape {
        op: "matmul",
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    };
    if a.len() < 2 || b.len() < 2 {
        return Err(mismatch());
    }
    let (a_lead, a_mat) = a.split_at(a.len() - 2);
    let (b_lead, b_mat) = b.split_at(b.len() - 2);
    let (m, k) = (a_mat[0], a_mat[1]);
    let (k2, n) = (b_mat[0], b_mat[1]);
    if k != k2 {
        return Err(mismatch());
    }
    let a_batch: usize = a_lead.iter().product();
    let b_batch: usize = b_lead.iter().product();
    let lead = if a_lead == b_lead {
        a_lead
    } else if a_batch == 1 {
        b_lead
    } else if b_batch == 1 {
        a_lead
    } else {
        return Err(mismatch());
    };
    let mut out_shape = lead.to_vec();
    out_shape.extend([m, n]);
    let batch = lead.iter().product();
    Ok(MatmulLayout {
        out_shape,
        batch,
        a_batched: a_batch == batch && batch > 1,
        b_batched: b_batch == batch && batch > 1,
        m,
        k,
        n,
    })
}

/// Batched matrix product over the last two axes. Leading axes must agree,
/// or one operand's leading axes must all be 1 (broadcast).
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let l = matmul_layout(a.shape(), b.shape())?;
    let mut out = Tensor::zeros(&l.out_shape);
    let (am, bm, cm) = (l.m * l.k, l.k * l.n, l.m * l.n);
    for t in 0..l.batch {
        let ao = if l.a_batched { t * am } else { 0 };
        let bo = if l.b_batched { t * bm } else { 0 };
        gemm_nn(
            l.m,
            l.k,
            l.n,
            &a.data()[ao..ao + am],
            &b.data()[bo..bo + bm],
            &mut out.data_mut()[t * cm..(t + 1) * cm],
        );
    }
    flops::record(2 * (l.batch * l.m * l.k * l.n) as u64);
    Ok(out)
}

pub fn matmul_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let l = matmul_layout(a.shape(), b.shape()).expect("validated in forward");
    let mut da = Tensor::zeros(a.shape());
    let mut db = Tensor::zeros(b.shape());
    let (am, bm, cm) = (l.m * l.k, l.k * l.n, l.m * l.n);
    for t in 0..l.batch {
        let ao = if l.a_batched { t * am } else { 0 };
        let bo = if l.b_batched { t * bm } else { 0 };
        let g = &dy.data()[t * cm..(t + 1) * cm];
        // da = dy · bᵀ ; db = aᵀ · dy
        gemm_nt(l.m, l.n, l.k, g, &b.data()[bo..bo + bm], &mut da.data_mut()[ao..ao + am]);
        gemm_tn(l.m, l.k, l.n, &a.data()[ao..ao + am], g, &mut db.data_mut()[bo..bo + bm]);
    }
    (da, db)
}

/// Swaps the last two axes.
pub fn transpose_last2<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let r = a.rank();
    if r < 2 {
        return Err(Error::Dimension(format!(
            "transpose needs rank >= 2, got shape {:?}",
            a.shape()
        )));
    }
    let (m, n) = (a.shape()[r - 2], a.shape()[r - 1]);
    let mut shape = a.shape().to_vec();
    shape.swap(r - 2, r - 1);
    let batch = a.len() / (m * n).max(1);
    let mut out = vec![T::zero(); a.len()];
    let src = a.data();
    for t in 0..batch {
        let o = t * m * n;
        for i in 0..m {
            for j in 0..n {
                out[o + j * m + i] = src[o + i * n + j];
            }
        }
    }
    Tensor::new(shape, out)
}

// ---------------------------------------------------------------------------
// dense

/// `x · w + b` over the last axis of `x`; `w` is `f_in × f_out`.
pub fn dense<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, f_in, f_out) = dense_dims(x, w, b)?;
    let mut out_shape = x.shape().to_vec();
    *out_shape.last_mut().unwrap() = f_out;
    let mut data = Vec::with_capacity(rows * f_out);
    for _ in 0..rows {
        data.extend_from_slice(b.data());
    }
    gemm_nn(rows, f_in, f_out, x.data(), w.data(), &mut data);
    flops::record(2 * (rows * f_in * f_out) as u64);
    Tensor::new(out_shape, data)
}

fn dense_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if x.rank() < 1 || w.rank() != 2 || b.shape() != [w.shape()[1]] || *x.shape().last().unwrap() != w.shape()[0] {
        return Err(Error::Shape {
            op: "dense",
            lhs: x.shape().to_vec(),
            rhs: w.shape().to_vec(),
        });
    }
    let f_in = w.shape()[0];
    let f_out = w.shape()[1];
    Ok((x.len() / f_in.max(1), f_in, f_out))
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let f_in = w.shape()[0];
    let f_out = w.shape()[1];
    let rows = x.len() / f_in.max(1);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[f_out]);
    gemm_nt(rows, f_out, f_in, dy.data(), w.data(), dx.data_mut());
    gemm_tn(rows, f_in, f_out, x.data(), dy.data(), dw.data_mut());
    for row in dy.data().chunks(f_out) {
        for (acc, &g) in db.data_mut().iter_mut().zip(row) {
            *acc += g;
        }
    }
    (dx, dw, db)
}

// ---------------------------------------------------------------------------
// conv2d, NHWC input and (k, k, c_in, c_out) kernel

struct ConvDims {
    n: usize,
    h: usize,
    w: usize,
    c_in: usize,
    k: usize,
    c_out: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<ConvDims> {
    let mismatch = || Error::Shape {
        op: "conv2d",
        lhs: input.shape().to_vec(),
        rhs: kernel.shape().to_vec(),
    };
    let (&[n, h, w, c_in], &[k, k2, kc, c_out]) = (input.shape(), kernel.shape()) else {
        return Err(mismatch());
    };
    if k != k2 || kc != c_in || bias.shape() != [c_out] {
        return Err(mismatch());
    }
    if k != 1 && k != 3 {
        return Err(Error::Argument(format!("conv2d kernel size must be 1 or 3, got {k}")));
    }
    let pad = match padding {
        Padding::Same => k / 2,
        Padding::Valid => 0,
    };
    if h + 2 * pad < k || w + 2 * pad < k {
        return Err(Error::Dimension(format!(
            "conv2d kernel {k}x{k} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    Ok(ConvDims {
        n,
        h,
        w,
        c_in,
        k,
        c_out,
        pad,
        oh: h + 2 * pad - k + 1,
        ow: w + 2 * pad - k + 1,
    })
}

/// Cross-correlation plus bias. Operation count follows the usual
/// convention of a full k×k window per output, padding included.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    let d = conv_dims(input, kernel, bias, padding)?;
    let mut out = Tensor::zeros(&[d.n, d.oh, d.ow, d.c_out]);
    let x = input.data();
    let kd = kernel.data();
    let o = out.data_mut();
    for b in 0..d.n {
        for y in 0..d.oh {
            for xo in 0..d.ow {
                let base = ((b * d.oh + y) * d.ow + xo) * d.c_out;
                let orow = &mut o[base..base + d.c_out];
                orow.copy_from_slice(bias.data());
                for dy in 0..d.k {
                    let Some(iy) = (y + dy).checked_sub(d.pad).filter(|&v| v < d.h) else {
                        continue;
                    };
                    for dx in 0..d.k {
                        let Some(ix) = (xo + dx).checked_sub(d.pad).filter(|&v| v < d.w) else {
                            continue;
                        };
                        let ibase = ((b * d.h + iy) * d.w + ix) * d.c_in;
                        for c in 0..d.c_in {
                            let v = x[ibase + c];
                            let kbase = ((dy * d.k + dx) * d.c_in + c) * d.c_out;
                            for (ov, &kv) in orow.iter_mut().zip(&kd[kbase..kbase + d.c_out]) {
                                *ov += v * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    flops::record(2 * (d.n * d.oh * d.ow * d.k * d.k * d.c_in * d.c_out) as u64);
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    padding: Padding,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let bias_shape = [kernel.shape()[3]];
    let d = conv_dims(input, kernel, &Tensor::zeros(&bias_shape), padding).expect("validated in forward");
    let mut dx = Tensor::zeros(input.shape());
    let mut dk = Tensor::zeros(kernel.shape());
    let mut db = Tensor::zeros(&bias_shape);
    let x = input.data();
    let kd = kernel.data();
    let g = dy.data();
    for b in 0..d.n {
        for y in 0..d.oh {
            for xo in 0..d.ow {
                let base = ((b * d.oh + y) * d.ow + xo) * d.c_out;
                let grow = &g[base..base + d.c_out];
                for (acc, &gv) in db.data_mut().iter_mut().zip(grow) {
                    *acc += gv;
                }
                for dyk in 0..d.k {
                    let Some(iy) = (y + dyk).checked_sub(d.pad).filter(|&v| v < d.h) else {
                        continue;
                    };
                    for dxk in 0..d.k {
                        let Some(ix) = (xo + dxk).checked_sub(d.pad).filter(|&v| v < d.w) else {
                            continue;
                        };
                        let ibase = ((b * d.h + iy) * d.w + ix) * d.c_in;
                        for c in 0..d.c_in {
                            let kbase = ((dyk * d.k + dxk) * d.c_in + c) * d.c_out;
                            let krow = &kd[kbase..kbase + d.c_out];
                            let mut acc = T::zero();
                            for (&gv, &kv) in grow.iter().zip(krow) {
                                acc += gv * kv;
                            }
                            dx.data_mut()[ibase + c] += acc;
                            let v = x[ibase + c];
                            for (dkv, &gv) in dk.data_mut()[kbase..kbase + d.c_out].iter_mut().zip(grow) {
                                *dkv += v * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dk, db)
}

// ---------------------------------------------------------------------------
// activations

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| {
        // split by sign so exp never overflows
        if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        }
    })
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(T::tanh)
}

/// Softmax over the last axis with max subtraction.
pub fn softmax_lastdim<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let Some(&n) = x.shape().last() else {
        return Err(Error::Dimension("softmax needs rank >= 1".into()));
    };
    if n == 0 {
        return Err(Error::Dimension("softmax over an empty axis".into()));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(n) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(out)
}

pub fn softmax_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let n = *y.shape().last().unwrap();
    let mut dx = Tensor::zeros(y.shape());
    for ((yr, gr), dr) in y
        .data()
        .chunks(n)
        .zip(dy.data().chunks(n))
        .zip(dx.data_mut().chunks_mut(n))
    {
        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
            *d = yv * (gv - dot);
        }
    }
    dx
}

/// Mean softmax cross-entropy of `logits` (`batch × classes`) against class
/// indices, using log-sum-exp.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let (batch, classes) = ce_dims(logits, labels)?;
    let mut total = T::zero();
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total += lse - row[label];
    }
    Ok(total / T::of(batch as f64))
}

fn ce_dims<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::Dimension(format!(
            "cross-entropy expects batch x classes logits, got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != batch || batch == 0 {
        return Err(Error::Argument(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Argument(format!("label {bad} out of range for {classes} classes")));
    }
    Ok((batch, classes))
}

pub fn cross_entropy_backward<T: Scalar>(logits: &Tensor<T>, labels: &[usize], g: T) -> Tensor<T> {
    let classes = logits.shape()[1];
    let mut dx = softmax_lastdim(logits).expect("validated in forward");
    let scale = g / T::of(labels.len() as f64);
    for (row, &label) in dx.data_mut().chunks_mut(classes).zip(labels) {
        row[label] -= T::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// token-axis helpers on rank-3 tensors `batch × tokens × features`

fn rank3(x: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
    match *x {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Dimension(format!("{op} expects a rank-3 tensor, got {x:?}"))),
    }
}

/// Mean over axis 1: `n × t × c → n × c`.
pub fn mean_axis1<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, t, c) = rank3(x.shape(), "mean_axis1")?;
    let inv = T::one() / T::of(t as f64);
    let mut out = Tensor::zeros(&[n, c]);
    for b in 0..n {
        let o = &mut out.data_mut()[b * c..(b + 1) * c];
        for row in x.data()[b * t * c..(b + 1) * t * c].chunks(c) {
            for (acc, &v) in o.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in o.iter_mut() {
            *v *= inv;
        }
    }
    Ok(out)
}

/// Token `index` of every batch element: `n × t × c → n × c`.
pub fn select_axis1<T: Scalar>(x: &Tensor<T>, index: usize) -> Result<Tensor<T>> {
    let (n, t, c) = rank3(x.shape(), "select_axis1")?;
    if index >= t {
        return Err(Error::Argument(format!("token index {index} out of range for {t} tokens")));
    }
    let mut data = Vec::with_capacity(n * c);
    for b in 0..n {
        let o = (b * t + index) * c;
        data.extend_from_slice(&x.data()[o..o + c]);
    }
    Tensor::new(vec![n, c], data)
}

/// Rows of `x` at `indices` (`n × k`, row-major) per batch element:
/// `n × t × c → n × k × c`.
pub fn gather_axis1<T: Scalar>(x: &Tensor<T>, indices: &[usize], k: usize) -> Result<Tensor<T>> {
    let (n, t, c) = rank3(x.shape(), "gather")?;
    if indices.len() != n * k {
        return Err(Error::Argument(format!(
            "gather expects {} indices ({n} x {k}), got {}",
            n * k,
            indices.len()
        )));
    }
    let mut data = Vec::with_capacity(n * k * c);
    for b in 0..n {
        for &ix in &indices[b * k..(b + 1) * k] {
            if ix >= t {
                return Err(Error::Argument(format!("gather index {ix} out of range for {t} tokens")));
            }
            let o = (b * t + ix) * c;
            data.extend_from_slice(&x.data()[o..o + c]);
        }
    }
    Tensor::new(vec![n, k, c], data)
}

/// Stacks along axis 1: `n × ta × c` and `n × tb × c` → `n × (ta + tb) × c`.
pub fn concat_axis1<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ta, c) = rank3(a.shape(), "concat")?;
    let (n2, tb, c2) = rank3(b.shape(), "concat")?;
    if n != n2 || c != c2 {
        return Err(Error::Shape {
            op: "concat",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..n {
        data.extend_from_slice(&a.data()[i * ta * c..(i + 1) * ta * c]);
        data.extend_from_slice(&b.data()[i * tb * c..(i + 1) * tb * c]);
    }
    Tensor::new(vec![n, ta + tb, c], data)
}

/// Indices of the `k` largest scores of each row of `scores` (`n × t`),
/// highest first; equal scores keep the lower index first.
pub fn top_indices<T: Scalar>(scores: &[T], n: usize, t: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > t {
        return Err(Error::Argument(format!("cannot select {k} of {t} tokens")));
    }
    debug_assert_eq!(scores.len(), n * t);
    let by_priority = |row: &[T]| {
        let row = row.to_vec();
        move |&a: &usize, &b: &usize| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        }
    };
    let mut out = Vec::with_capacity(n * k);
    for row in scores.chunks(t) {
        let cmp = by_priority(row);
        let mut idx: Vec<usize> = (0..t).collect();
        if k < t {
            idx.select_nth_unstable_by(k - 1, &cmp);
        }
        idx.truncate(k);
        idx.sort_unstable_by(&cmp);
        out.extend(idx);
    }
    Ok(out)
}
