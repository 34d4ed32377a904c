//! Allocation-free joint density for repeated evaluation under one model.
//!
//! [`CsphModel::joint_pdf`] rebuilds its block matrices on every call, which
//! dominates the cost of a likelihood pass. [`DensityKernel`] assembles the
//! Van Loan block once and evaluates exponentials on flat row-major buffers
//! held in a reusable [`KernelWorkspace`]. [`DensityKernel::pdf_batch`]
//! goes further and shares work between points with nearby times.

use rayon::prelude::*;

use super::{CsphModel, Margin};
use crate::error::{Error, Result};

/// Points per chain in [`DensityKernel::pdf_batch`].
const CHAIN: usize = 32;

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn matmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..n {
        for k in 0..n {
            let x = a[i * n + k];
            if x != 0.0 {
                let (row, src) = (&mut out[i * n..(i + 1) * n], &b[k * n..(k + 1) * n]);
                for (o, s) in row.iter_mut().zip(src) {
                    *o += x * s;
                }
            }
        }
    }
}

/// Scaling-and-squaring Padé exponential on `n × n` row-major buffers.
#[derive(Debug, Clone)]
struct Expm {
    n: usize,
    a: Vec<f64>,
    powers: [Vec<f64>; 4],
    u: Vec<f64>,
    v: Vec<f64>,
    tmp: Vec<f64>,
}

impl Expm {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n * n];
        Expm {
            n,
            a: z(),
            powers: [z(), z(), z(), z()],
            u: z(),
            v: z(),
            tmp: z(),
        }
    }

    fn norm_one(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `u = a · Σ b_odd A^{2j}`, `v = Σ b_even A^{2j}` for orders below 13,
    /// with `powers[j-1] = A^{2j}` already filled.
    fn pade_low(&mut self, b: &[f64]) {
        let n = self.n;
        self.tmp.fill(0.0);
        self.v.fill(0.0);
        for i in 0..n {
            self.tmp[i * n + i] = b[1];
            self.v[i * n + i] = b[0];
        }
        for j in 1..=(b.len() - 1) / 2 {
            let p = &self.powers[j - 1];
            for ((t, v), x) in self.tmp.iter_mut().zip(self.v.iter_mut()).zip(p) {
                *t += b[2 * j + 1] * x;
                *v += b[2 * j] * x;
            }
        }
        matmul(n, &self.a, &self.tmp, &mut self.u);
    }

    fn pade13(&mut self) {
        let n = self.n;
        let b = &B13;
        // The fourth power slot is free at this order and holds the inner sums.
        let [a2, a4, a6, inner] = &mut self.powers;
        // u = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
        for idx in 0..n * n {
            inner[idx] = b[13] * a6[idx] + b[11] * a4[idx] + b[9] * a2[idx];
        }
        matmul(n, a6, inner, &mut self.tmp);
        for idx in 0..n * n {
            self.tmp[idx] += b[7] * a6[idx] + b[5] * a4[idx] + b[3] * a2[idx];
        }
        for i in 0..n {
            self.tmp[i * n + i] += b[1];
        }
        matmul(n, &self.a, &self.tmp, &mut self.u);
        for idx in 0..n * n {
            inner[idx] = b[12] * a6[idx] + b[10] * a4[idx] + b[8] * a2[idx];
        }
        matmul(n, a6, inner, &mut self.v);
        for idx in 0..n * n {
            self.v[idx] += b[6] * a6[idx] + b[4] * a4[idx] + b[2] * a2[idx];
        }
        for i in 0..n {
            self.v[i * n + i] += b[0];
        }
    }

    /// `powers[j] = A^{2(j+1)}` for `j < count`.
    fn fill_powers(&mut self, count: usize) {
        let n = self.n;
        matmul(n, &self.a, &self.a, &mut self.powers[0]);
        for j in 1..count {
            let (done, todo) = self.powers.split_at_mut(j);
            matmul(n, &done[j - 1], &done[0], &mut todo[0]);
        }
    }

    /// Writes `exp(scale · m)` into `out`; `false` on overflow or a singular
    /// Padé denominator.
    fn exp(&mut self, m: &[f64], scale: f64, out: &mut [f64]) -> bool {
        let n = self.n;
        for (a, x) in self.a.iter_mut().zip(m) {
            *a = x * scale;
        }
        let norm = self.norm_one();
        let mut squarings = 0;
        if norm <= THETA[0] {
            self.fill_powers(1);
            self.pade_low(&B3);
        } else if norm <= THETA[1] {
            self.fill_powers(2);
            self.pade_low(&B5);
        } else if norm <= THETA[2] {
            self.fill_powers(3);
            self.pade_low(&B7);
        } else if norm <= THETA[3] {
            self.fill_powers(4);
            self.pade_low(&B9);
        } else {
            squarings = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
            let f = 2f64.powi(-squarings);
            self.a.iter_mut().for_each(|x| *x *= f);
            self.fill_powers(3);
            self.pade13();
        }
        // Solve (V − U) X = (V + U) by Gaussian elimination with partial
        // pivoting; `tmp` holds the coefficient matrix, `out` the right side.
        for idx in 0..n * n {
            self.tmp[idx] = self.v[idx] - self.u[idx];
            out[idx] = self.v[idx] + self.u[idx];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| self.tmp[i * n + col].abs().total_cmp(&self.tmp[j * n + col].abs()))
                .expect("nonempty range");
            let p = self.tmp[pivot * n + col];
            if p == 0.0 || !p.is_finite() {
                return false;
            }
            if pivot != col {
                for j in 0..n {
                    self.tmp.swap(pivot * n + j, col * n + j);
                    out.swap(pivot * n + j, col * n + j);
                }
            }
            for i in col + 1..n {
                let f = self.tmp[i * n + col] / p;
                if f != 0.0 {
                    for j in col..n {
                        self.tmp[i * n + j] -= f * self.tmp[col * n + j];
                    }
                    for j in 0..n {
                        out[i * n + j] -= f * out[col * n + j];
                    }
                }
            }
        }
        for col in (0..n).rev() {
            let p = self.tmp[col * n + col];
            for j in 0..n {
                let mut s = out[col * n + j];
                for k in col + 1..n {
                    s -= self.tmp[col * n + k] * out[k * n + j];
                }
                out[col * n + j] = s / p;
            }
        }
        for _ in 0..squarings {
            matmul(n, out, out, &mut self.tmp);
            out.copy_from_slice(&self.tmp);
        }
        out.iter().all(|x| x.is_finite())
    }
}

fn max_abs_line_sum(n: usize, m: &[f64]) -> f64 {
    let rows = (0..n).map(|i| (0..n).map(|j| m[i * n + j].abs()).sum::<f64>());
    let cols = (0..n).map(|j| (0..n).map(|i| m[i * n + j].abs()).sum::<f64>());
    rows.chain(cols).fold(0.0, f64::max)
}

/// `t ↦ start · e^{M t}` (row) or `t ↦ e^{M t} · start` (column).
struct Action<'a> {
    m: &'a [f64],
    start: &'a [f64],
    row: bool,
    n: usize,
    norm: f64,
}

impl<'a> Action<'a> {
    fn new(m: &'a [f64], start: &'a [f64], row: bool) -> Self {
        let n = start.len();
        Action { m, start, row, n, norm: max_abs_line_sum(n, m) }
    }

    fn exact(&self, ws: &mut Expm, e: &mut [f64], t: f64, out: &mut [f64]) -> Result<()> {
        if !ws.exp(self.m, t, e) {
            return Err(Error::Numeric("matrix exponential overflowed".into()));
        }
        let n = self.n;
        for (j, o) in out.iter_mut().enumerate() {
            *o = if self.row {
                (0..n).map(|i| self.start[i] * e[i * n + j]).sum()
            } else {
                (0..n).map(|i| e[j * n + i] * self.start[i]).sum()
            };
        }
        Ok(())
    }

    /// `v ← v e^{M h}` (or `e^{M h} v`) by Taylor series on substeps of
    /// norm at most 1/2.
    fn advance(&self, h: f64, v: &mut [f64], term: &mut [f64], next: &mut [f64]) {
        if h == 0.0 {
            return;
        }
        let n = self.n;
        let steps = (2.0 * h * self.norm).ceil().max(1.0);
        let dt = h / steps;
        for _ in 0..steps as usize {
            term.copy_from_slice(v);
            for k in 1..=40 {
                if self.row {
                    next.fill(0.0);
                    for (i, &x) in term.iter().enumerate() {
                        if x != 0.0 {
                            for (o, a) in next.iter_mut().zip(&self.m[i * n..(i + 1) * n]) {
                                *o += x * a;
                            }
                        }
                    }
                } else {
                    for (i, o) in next.iter_mut().enumerate() {
                        *o = self.m[i * n..(i + 1) * n].iter().zip(term.iter()).map(|(a, x)| a * x).sum();
                    }
                }
                let f = dt / k as f64;
                let (mut tn, mut vn) = (0.0, 0.0);
                for j in 0..n {
                    term[j] = next[j] * f;
                    v[j] += term[j];
                    tn += term[j].abs();
                    vn += v[j].abs();
                }
                if tn <= 1e-18 * vn {
                    break;
                }
            }
        }
    }

    /// The action at every time in `times` (sorted), written to
    /// `out[idx * n..]`. Each run of [`CHAIN`] consecutive times starts from
    /// a direct exponential and steps forward from there, so the result
    /// depends only on the sorted times.
    fn run(&self, times: &[(f64, usize)], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let values: Vec<Vec<f64>> = times
            .par_chunks(CHAIN)
            .map(|chunk| {
                let mut ws = Expm::new(n);
                let (mut e, mut term, mut next) = (vec![0.0; n * n], vec![0.0; n], vec![0.0; n]);
                let mut v = vec![0.0; n];
                let mut vals = Vec::with_capacity(chunk.len() * n);
                self.exact(&mut ws, &mut e, chunk[0].0, &mut v)?;
                vals.extend_from_slice(&v);
                for w in chunk.windows(2) {
                    self.advance(w[1].0 - w[0].0, &mut v, &mut term, &mut next);
                    if !v.iter().all(|x| x.is_finite()) {
                        return Err(Error::Numeric("matrix exponential action overflowed".into()));
                    }
                    vals.extend_from_slice(&v);
                }
                Ok(vals)
            })
            .collect::<Result<_>>()?;
        for (chunk, vals) in times.chunks(CHAIN).zip(values) {
            for (&(_, idx), v) in chunk.iter().zip(vals.chunks(n)) {
                out[idx * n..(idx + 1) * n].copy_from_slice(v);
            }
        }
        Ok(())
    }
}

/// Precomputed blocks of one model for fast repeated [`DensityKernel::pdf`].
#[derive(Debug, Clone)]
pub struct DensityKernel {
    p0: usize,
    p1: usize,
    a1: f64,
    a2: f64,
    alpha: Vec<f64>,
    /// `[[T, P], [0, a1 Q1 ⊕ a2 Q2]]`, row-major.
    block: Vec<f64>,
    q: [Vec<f64>; 2],
    exit: [Vec<f64>; 2],
}

/// Scratch space for one evaluating thread.
#[derive(Debug, Clone)]
pub struct KernelWorkspace {
    block: Expm,
    post: Expm,
    block_exp: Vec<f64>,
    post_exp: Vec<f64>,
    w: [Vec<f64>; 2],
}

fn row_major(m: &crate::matrix::Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl DensityKernel {
    pub fn new(m: &CsphModel) -> Self {
        let (p0, p1) = (m.pre_states(), m.post_states());
        let d = p0 + p1 * p1;
        let mut block = vec![0.0; d * d];
        for i in 0..p0 {
            for j in 0..p0 {
                block[i * d + j] = m.t()[(i, j)];
            }
            for k in 0..p1 {
                block[i * d + p0 + k * p1 + k] = m.u()[(i, k)];
            }
        }
        let (s1, s2) = (m.q1() * m.a1(), m.q2() * m.a2());
        for k in 0..p1 {
            for l in 0..p1 {
                let row = p0 + k * p1 + l;
                for kk in 0..p1 {
                    for ll in 0..p1 {
                        let col = p0 + kk * p1 + ll;
                        let mut v = 0.0;
                        if l == ll {
                            v += s1[(k, kk)];
                        }
                        if k == kk {
                            v += s2[(l, ll)];
                        }
                        block[row * d + col] = v;
                    }
                }
            }
        }
        DensityKernel {
            p0,
            p1,
            a1: m.a1(),
            a2: m.a2(),
            alpha: m.alpha().iter().copied().collect(),
            block,
            q: [row_major(m.q1()), row_major(m.q2())],
            exit: [
                m.exit(Margin::First).iter().copied().collect(),
                m.exit(Margin::Second).iter().copied().collect(),
            ],
        }
    }

    pub fn workspace(&self) -> KernelWorkspace {
        let d = self.p0 + self.p1 * self.p1;
        KernelWorkspace {
            block: Expm::new(d),
            post: Expm::new(self.p1),
            block_exp: vec![0.0; d * d],
            post_exp: vec![0.0; self.p1 * self.p1],
            w: [vec![0.0; self.p1], vec![0.0; self.p1]],
        }
    }

    /// Same value as [`CsphModel::joint_pdf`].
    pub fn pdf(&self, ws: &mut KernelWorkspace, z1: f64, z2: f64) -> Result<f64> {
        if !(z1 >= 0.0 && z2 >= 0.0) || !z1.is_finite() || !z2.is_finite() {
            return Ok(0.0);
        }
        let u = (z1 / self.a1).min(z2 / self.a2);
        if u == 0.0 {
            return Ok(0.0);
        }
        let overflow = || Error::Numeric("matrix exponential overflowed".into());
        let (p0, p1) = (self.p0, self.p1);
        let d = p0 + p1 * p1;
        if !ws.block.exp(&self.block, u, &mut ws.block_exp) {
            return Err(overflow());
        }
        for (i, r) in [z1 - self.a1 * u, z2 - self.a2 * u].into_iter().enumerate() {
            if r > 0.0 {
                if !ws.post.exp(&self.q[i], r, &mut ws.post_exp) {
                    return Err(overflow());
                }
                for k in 0..p1 {
                    ws.w[i][k] = (0..p1).map(|l| ws.post_exp[k * p1 + l] * self.exit[i][l]).sum();
                }
            } else {
                ws.w[i].copy_from_slice(&self.exit[i]);
            }
        }
        let mut total = 0.0;
        for k in 0..p1 {
            for l in 0..p1 {
                let col = p0 + k * p1 + l;
                let row: f64 = (0..p0).map(|i| self.alpha[i] * ws.block_exp[i * d + col]).sum();
                total += row * ws.w[0][k] * ws.w[1][l];
            }
        }
        Ok(total.max(0.0))
    }

    /// [`DensityKernel::pdf`] at every point, agreeing with it to a few
    /// units of roundoff. Points are sorted by their shock-time and
    /// residual coordinates and the exponentials advanced along the sorted
    /// order, which is much cheaper than one exponential per point. The
    /// result does not depend on the order of `points` or the thread count.
    pub fn pdf_batch(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let (p0, p1, n) = (self.p0, self.p1, points.len());
        let d = p0 + p1 * p1;
        let mut shock = Vec::with_capacity(n);
        let mut resid: [Vec<(f64, usize)>; 2] = [vec![], vec![]];
        for (idx, &[z1, z2]) in points.iter().enumerate() {
            if !(z1 >= 0.0 && z2 >= 0.0) || !z1.is_finite() || !z2.is_finite() {
                continue;
            }
            let u = (z1 / self.a1).min(z2 / self.a2);
            if u == 0.0 {
                continue;
            }
            shock.push((u, idx));
            for (i, r) in [z1 - self.a1 * u, z2 - self.a2 * u].into_iter().enumerate() {
                if r > 0.0 {
                    resid[i].push((r, idx));
                }
            }
        }
        // Ties are broken by the point itself so that any permutation of
        // the data yields the same sequence of values.
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            let (pa, pb) = (points[a.1], points[b.1]);
            a.0.total_cmp(&b.0).then(pa[0].total_cmp(&pb[0])).then(pa[1].total_cmp(&pb[1]))
        };
        shock.sort_by(order);
        resid.iter_mut().for_each(|r| r.sort_by(order));

        let mut start = vec![0.0; d];
        start[..p0].copy_from_slice(&self.alpha);
        let mut rows = vec![0.0; n * d];
        Action::new(&self.block, &start, true).run(&shock, &mut rows)?;
        let mut w = [self.exit[0].repeat(n), self.exit[1].repeat(n)];
        for i in 0..2 {
            Action::new(&self.q[i], &self.exit[i], false).run(&resid[i], &mut w[i])?;
        }

        let mut out = vec![0.0; n];
        for &(_, idx) in &shock {
            let row = &rows[idx * d + p0..(idx + 1) * d];
            let (w1, w2) = (&w[0][idx * p1..(idx + 1) * p1], &w[1][idx * p1..(idx + 1) * p1]);
            let mut total = 0.0;
            for k in 0..p1 {
                for l in 0..p1 {
                    total += row[k * p1 + l] * w1[k] * w2[l];
                }
            }
            out[idx] = total.max(0.0);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matrix::{self, Matrix};

    #[test]
    fn flat_exponential_matches_reference() {
        let a = Matrix::from_row_slice(
            3,
            3,
            &[-2.0, 1.0, 0.5, 0.3, -1.2, 0.4, 0.0, 0.7, -0.9],
        );
        let mut e = Expm::new(3);
        let mut out = vec![0.0; 9];
        // One scale per Padé branch, plus a scaled-and-squared one.
        for s in [0.002, 0.05, 0.2, 0.45, 1.0, 30.0] {
            assert!(e.exp(&row_major(&a), s, &mut out));
            let want = matrix::mat_exp(&(&a * s)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((out[i * 3 + j] - want[(i, j)]).abs() < 1e-14 * (1.0 + want[(i, j)].abs()));
                }
            }
        }
    }

    #[test]
    fn kernel_matches_joint_pdf() {
        for m in [fixtures::example_one(), fixtures::scalar(0.7, 1.3, 0.4, 1.5, 0.5)] {
            let k = DensityKernel::new(&m);
            let mut ws = k.workspace();
            for &z1 in &[0.0, 0.3, 2.0, 11.0, 45.0] {
                for &z2 in &[0.0, 0.5, 4.0, 9.0, 30.0] {
                    let want = m.joint_pdf(z1, z2).unwrap();
                    let got = k.pdf(&mut ws, z1, z2).unwrap();
                    assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "({z1}, {z2}): {got} vs {want}");
                }
            }
            assert_eq!(k.pdf(&mut ws, -1.0, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn batch_matches_pointwise() {
        let m = fixtures::example_one();
        let k = DensityKernel::new(&m);
        let mut ws = k.workspace();
        let data = crate::simulation::sample_dataset(&m, 3000, 5).unwrap();
        let mut points = data.points().to_vec();
        points.extend([[0.0, 0.0], [-1.0, 2.0], [0.0, 3.0], [4.0, f64::INFINITY], [6.0, 3.0], [6.0, 3.0]]);
        let batch = k.pdf_batch(&points).unwrap();
        for (p, got) in points.iter().zip(&batch) {
            let want = k.pdf(&mut ws, p[0], p[1]).unwrap();
            assert!((got - want).abs() <= 1e-13 * want, "{p:?}: {got} vs {want}");
        }
    }

    #[test]
    fn batch_ignores_order() {
        let m = fixtures::scalar(0.7, 1.3, 0.4, 1.5, 0.5);
        let k = DensityKernel::new(&m);
        let points = crate::simulation::sample_dataset(&m, 500, 9).unwrap().points().to_vec();
        let mut rev = points.clone();
        rev.reverse();
        let (a, mut b) = (k.pdf_batch(&points).unwrap(), k.pdf_batch(&rev).unwrap());
        b.reverse();
        assert_eq!(a, b);
    }
}
