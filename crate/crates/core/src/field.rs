//! Real-valued samples on the periodic grid.
//!
//! Storage order is x1-fastest row-major: the sample at `(i1, i2, i3)` lives
//! at `i1 + n * (i2 + n * i3)`.

use rayon::prelude::*;

/// Leaf size for the pairwise summation tree.
const PAIRWISE_LEAF: usize = 128;
/// Chunk length for the parallel reductions; fixed so results never depend
/// on the thread count.
const REDUCE_CHUNK: usize = 4096;

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Deterministic parallel sum of `f(i)` over `0..len`.
pub fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..len.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(len);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partial)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    n: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n * n] }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n * n, "field length does not match n^3");
        Self { n, data }
    }

    /// Sample `f(i1, i2, i3)` at every grid index.
    pub fn from_index_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> f64 + Sync,
    {
        let data = (0..n * n * n)
            .into_par_iter()
            .map(|idx| f(idx % n, (idx / n) % n, idx / (n * n)))
            .collect();
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.n * (i2 + self.n * i3)
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[self.index(i1, i2, i3)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Sync,
    {
        Self { n: self.n, data: self.data.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self { n: self.n, data }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.n, other.n);
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, &b)| *a += s * b);
    }

    /// Deterministic sum of all samples.
    pub fn sum(&self) -> f64 {
        det_sum(self.data.len(), |i| self.data[i])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField, c3: ScalarField) -> Self {
        assert!(c1.n() == c2.n() && c2.n() == c3.n());
        Self { comps: [c1, c2, c3] }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(ScalarField::zeros(n), ScalarField::zeros(n), ScalarField::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.comps[0].n()
    }

    /// Pointwise Euclidean sup norm.
    pub fn max_abs(&self) -> f64 {
        let [a, b, c] = &self.comps;
        (0..a.as_slice().len())
            .into_par_iter()
            .map(|i| {
                let (x, y, z) = (a.as_slice()[i], b.as_slice()[i], c.as_slice()[i]);
                (x * x + y * y + z * z).sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn norm_sq(&self) -> ScalarField {
        let [a, b, c] = &self.comps;
        let n = self.n();
        let data = (0..n * n * n)
            .into_par_iter()
            .map(|i| {
                let (x, y, z) = (a.as_slice()[i], b.as_slice()[i], c.as_slice()[i]);
                x * x + y * y + z * z
            })
            .collect();
        ScalarField::from_vec(n, data)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { comps: [self.comps[0].scaled(s), self.comps[1].scaled(s), self.comps[2].scaled(s)] }
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(s, b);
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.as_slice().iter().all(|&v| v == 0.0))
    }
}
