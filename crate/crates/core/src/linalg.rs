//! Linear-algebra kernels: envelope Cholesky for sparse SPD operators and
//! sine transforms for lattice boxes.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Entries allowed in an envelope factor before refusing (about 1.2 GB).
pub const MAX_ENVELOPE_ENTRIES: usize = 150_000_000;

/// Cholesky factor `A = L L^T` stored row by row over each row's envelope
/// `first[i]..=i`. Fill stays inside the envelope, so the factor is exact.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factor a symmetric matrix given its lower triangle row-wise:
    /// `rows[i]` lists `(j, a_ij)` with `j <= i`.
    pub fn factor(rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = rows.len();
        let mut first = Vec::with_capacity(n);
        for (i, r) in rows.iter().enumerate() {
            let f = r.iter().map(|&(j, _)| j).min().unwrap_or(i).min(i);
            first.push(f);
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        if total > MAX_ENVELOPE_ENTRIES {
            return Err(Error::Resource(format!(
                "envelope factor needs {total} entries (limit {MAX_ENVELOPE_ENTRIES})"
            )));
        }
        let mut data = vec![0.0; total];
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in r {
                if j > i {
                    return Err(Error::Contract("lower triangle expected".into()));
                }
                data[offset[i] + j - first[i]] += v;
            }
        }
        let mut me = Self { n, first, offset, data };
        me.factor_in_place()?;
        Ok(me)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..=i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let mut s = self.data[oi + j - fi];
                if k0 < j {
                    let a = &self.data[oi + k0 - fi..oi + j - fi];
                    let b = &self.data[oj + k0 - fj..oj + j - fj];
                    s -= dot(a, b);
                }
                if j < i {
                    let d = self.data[oj + j - fj];
                    self.data[oi + j - fi] = s / d;
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    self.data[oi + j - fi] = s.sqrt();
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_len(&self) -> usize {
        self.data.len()
    }

    /// Solve `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let row = &self.data[oi..oi + i - fi];
            let s = b[i] - dot(row, &b[fi..i]);
            b[i] = s / self.data[oi + i - fi];
        }
    }

    /// Solve `L^T x = y` in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let oi = self.offset[i];
            let xi = y[i] / self.data[oi + i - fi];
            y[i] = xi;
            let row = &self.data[oi..oi + i - fi];
            for (yk, &l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Unnormalized type-I sine transform `y_k = sum_j x_j sin(pi j k / (n+1))`,
/// `j, k = 1..n`, computed through an odd extension of length `2(n+1)`.
#[derive(Clone)]
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst1").field("n", &self.n).finish()
    }
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn buffers(&self) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let m = 2 * (self.n + 1);
        (vec![Complex::new(0.0, 0.0); m], vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()])
    }

    /// Transform two real vectors with one complex FFT.
    pub fn apply_pair_with(&self, a: &mut [f64], b: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let n = self.n;
        let m = 2 * (n + 1);
        buf[0] = Complex::new(0.0, 0.0);
        buf[n + 1] = Complex::new(0.0, 0.0);
        for j in 0..n {
            buf[j + 1] = Complex::new(a[j], b[j]);
            buf[m - 1 - j] = Complex::new(-a[j], -b[j]);
        }
        self.fft.process_with_scratch(buf, scratch);
        for k in 0..n {
            let w = buf[k + 1];
            a[k] = -0.5 * w.im;
            b[k] = 0.5 * w.re;
        }
    }

    pub fn apply(&self, a: &mut [f64]) {
        let (mut buf, mut scratch) = self.buffers();
        let mut b = vec![0.0; self.n];
        self.apply_pair_with(a, &mut b, &mut buf, &mut scratch);
    }
}

/// Sine eigenbasis of the killed-walk operator `I - P` on a `w x h` box.
/// Data are stored with index `i * h + j` for box coordinates `(i+1, j+1)`.
#[derive(Debug, Clone)]
pub struct BoxSpectrum {
    pub w: usize,
    pub h: usize,
    dw: Dst1,
    dh: Dst1,
    /// Eigenvalues `1 - (cos(pi j/(w+1)) + cos(pi k/(h+1)))/2`.
    pub eig: Vec<f64>,
    /// `2 / sqrt((w+1)(h+1))`: the eigenfunction normalization.
    pub norm: f64,
}

impl BoxSpectrum {
    pub fn new(w: usize, h: usize) -> Self {
        let cw: Vec<f64> = (1..=w).map(|j| (std::f64::consts::PI * j as f64 / (w + 1) as f64).cos()).collect();
        let ch: Vec<f64> = (1..=h).map(|k| (std::f64::consts::PI * k as f64 / (h + 1) as f64).cos()).collect();
        let mut eig = Vec::with_capacity(w * h);
        for a in &cw {
            for b in &ch {
                eig.push(1.0 - 0.5 * (a + b));
            }
        }
        Self {
            w,
            h,
            dw: Dst1::new(w),
            dh: Dst1::new(h),
            eig,
            norm: 2.0 / (((w + 1) * (h + 1)) as f64).sqrt(),
        }
    }

    /// Unnormalized 2-D sine transform in place.
    pub fn dst2(&self, data: &mut [f64]) {
        let (w, h) = (self.w, self.h);
        debug_assert_eq!(data.len(), w * h);
        // along the contiguous axis
        let (mut buf, mut scratch) = self.dh.buffers();
        let mut rows = data.chunks_exact_mut(h);
        loop {
            match (rows.next(), rows.next()) {
                (Some(a), Some(b)) => self.dh.apply_pair_with(a, b, &mut buf, &mut scratch),
                (Some(a), None) => {
                    let mut z = vec![0.0; h];
                    self.dh.apply_pair_with(a, &mut z, &mut buf, &mut scratch);
                }
                _ => break,
            }
        }
        // along the strided axis
        let (mut buf, mut scratch) = self.dw.buffers();
        let mut ca = vec![0.0; w];
        let mut cb = vec![0.0; w];
        let mut j = 0;
        while j < h {
            let two = j + 1 < h;
            for i in 0..w {
                ca[i] = data[i * h + j];
                cb[i] = if two { data[i * h + j + 1] } else { 0.0 };
            }
            self.dw.apply_pair_with(&mut ca, &mut cb, &mut buf, &mut scratch);
            for i in 0..w {
                data[i * h + j] = ca[i];
                if two {
                    data[i * h + j + 1] = cb[i];
                }
            }
            j += 2;
        }
    }

    /// Solve `(I - P) u = b` on the box in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.dst2(b);
        let c2 = self.norm * self.norm;
        for (v, l) in b.iter_mut().zip(&self.eig) {
            *v *= c2 / l;
        }
        self.dst2(b);
    }

    /// Green function `G(x, y)` between box coordinates (1-based).
    pub fn green_entry(&self, x: (usize, usize), y: (usize, usize)) -> f64 {
        let pw = std::f64::consts::PI / (self.w + 1) as f64;
        let ph = std::f64::consts::PI / (self.h + 1) as f64;
        let mut s = 0.0;
        for j in 1..=self.w {
            let a = (pw * (j * x.0) as f64).sin() * (pw * (j * y.0) as f64).sin();
            if a == 0.0 {
                continue;
            }
            let row = &self.eig[(j - 1) * self.h..j * self.h];
            let mut t = 0.0;
            for k in 1..=self.h {
                t += (ph * (k * x.1) as f64).sin() * (ph * (k * y.1) as f64).sin() / row[k - 1];
            }
            s += a * t;
        }
        s * self.norm * self.norm
    }

    /// Diagonal `G(x, x)` at every box site, by separable sums.
    pub fn green_diagonal(&self) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let sq = |n: usize| -> Vec<f64> {
            let p = std::f64::consts::PI / (n + 1) as f64;
            let mut m = vec![0.0; n * n];
            for x in 1..=n {
                for j in 1..=n {
                    let s = (p * (x * j) as f64).sin();
                    m[(x - 1) * n + (j - 1)] = s * s;
                }
            }
            m
        };
        let sw = sq(w);
        let sh = sq(h);
        // T[j][x2] = sum_k sh[x2][k] / eig[j][k]
        let mut t = vec![0.0; w * h];
        for j in 0..w {
            let row = &self.eig[j * h..(j + 1) * h];
            let inv: Vec<f64> = row.iter().map(|l| 1.0 / l).collect();
            for x2 in 0..h {
                t[j * h + x2] = dot(&sh[x2 * h..(x2 + 1) * h], &inv);
            }
        }
        let c2 = self.norm * self.norm;
        let mut out = vec![0.0; w * h];
        for x1 in 0..w {
            let s = &sw[x1 * w..(x1 + 1) * w];
            let o = &mut out[x1 * h..(x1 + 1) * h];
            for (j, &a) in s.iter().enumerate() {
                let tr = &t[j * h..(j + 1) * h];
                for (ov, tv) in o.iter_mut().zip(tr) {
                    *ov += a * tv;
                }
            }
            for v in o.iter_mut() {
                *v *= c2;
            }
        }
        out
    }
}
