//! Symmetric banded matrices and their Cholesky factorization.

/// Lower band of a symmetric matrix: `band[i][k]` holds entry `(i, i - k)`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.bw + 1) + k
    }

    /// Adds `v` to entry `(i, j)` (and its mirror). Entries outside the band are ignored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k <= self.bw {
            let at = self.idx(hi, k);
            self.band[at] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k <= self.bw {
            self.band[self.idx(hi, k)]
        } else {
            0.0
        }
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
    }

    /// Replaces row and column `i` by the identity row.
    pub fn pin(&mut self, i: usize) {
        for k in 0..=self.bw {
            if k <= i {
                let at = self.idx(i, k);
                self.band[at] = 0.0;
            }
            if i + k < self.n {
                let at = self.idx(i + k, k);
                self.band[at] = 0.0;
            }
        }
        let at = self.idx(i, 0);
        self.band[at] = 1.0;
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.get(i, i) * x[i];
            for k in 1..=self.bw.min(i) {
                let v = self.band[self.idx(i, k)];
                y[i] += v * x[i - k];
                y[i - k] += v * x[i];
            }
        }
        y
    }

    /// Cholesky factor of `self + shift I`, or `None` if not positive definite.
    pub fn cholesky(&self, shift: f64) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.band.clone();
        for i in 0..n {
            l[self.idx(i, 0)] += shift;
        }
        for i in 0..n {
            for k in (1..=bw.min(i)).rev() {
                let j = i - k;
                let mut s = l[self.idx(i, k)];
                for m in 1..=bw.min(j) {
                    if k + m > bw {
                        break;
                    }
                    s -= l[self.idx(i, k + m)] * l[self.idx(j, m)];
                }
                l[self.idx(i, k)] = s / l[self.idx(j, 0)];
            }
            let mut d = l[self.idx(i, 0)];
            for k in 1..=bw.min(i) {
                d -= l[self.idx(i, k)].powi(2);
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            l[self.idx(i, 0)] = d.sqrt();
        }
        Some(BandedCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    fn at(&self, i: usize, k: usize) -> f64 {
        self.l[i * (self.bw + 1) + k]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in 1..=self.bw.min(i) {
                s -= self.at(i, k) * y[i - k];
            }
            y[i] = s / self.at(i, 0);
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in 1..=self.bw.min(self.n - 1 - i) {
                s -= self.at(i + k, k) * y[i + k];
            }
            y[i] = s / self.at(i, 0);
        }
        y
    }
}
