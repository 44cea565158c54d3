//! Three-dimensional FFTs on `n³` cubes, built from batched 1D transforms and
//! axis rotations.
//!
//! Coefficients are Fourier-series coefficients: `u(x) = Σ_k û_k e^{i ξ_k·x}`.
//! [`Fft3::inverse`] is the unnormalised synthesis and [`Fft3::forward`]
//! includes the `1/n³` factor.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Physical values to coefficients, normalised by `1/n³`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }

    /// Coefficients to physical values.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        thread_local! {
            static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
        }
        BUFFERS.with(|b| {
            let (tmp, scratch) = &mut *b.borrow_mut();
            tmp.resize(data.len(), Complex64::new(0.0, 0.0));
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            // Transform the contiguous axis, then rotate (a,b,c) -> (c,a,b); three
            // passes visit every axis and restore the original layout.
            let mut in_data = true;
            for _ in 0..3 {
                let (src, dst): (&mut [Complex64], &mut [Complex64]) =
                    if in_data { (&mut *data, &mut tmp[..]) } else { (&mut tmp[..], &mut *data) };
                for row in src.chunks_exact_mut(n) {
                    // band-limited inputs leave many rows empty in the first passes
                    if row.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
                        plan.process_with_scratch(row, scratch);
                    }
                }
                rotate(src, dst, n);
                in_data = !in_data;
            }
            if !in_data {
                data.copy_from_slice(tmp);
            }
        });
    }
}

fn rotate(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    // dst[c][r] = src[r][c] for the (n², n) matrix src, in 8 × 8 tiles
    const T: usize = 8;
    let rows = n * n;
    for r0 in (0..rows).step_by(T) {
        for c0 in (0..n).step_by(T) {
            for r in r0..(r0 + T).min(rows) {
                let row = &src[r * n..r * n + n];
                for c in c0..(c0 + T).min(n) {
                    dst[c * rows + r] = row[c];
                }
            }
        }
    }
}

/// Shared plan for cubes of side `n`.
pub fn plan(n: usize) -> Arc<Fft3> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    let mut map = PLANS.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    map.entry(n).or_insert_with(|| Arc::new(Fft3::new(n))).clone()
}

/// Synthesises two real fields from Hermitian coefficient arrays with one
/// complex transform.
pub fn inverse_pair(a: &[Complex64], b: &[Complex64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let i = Complex64::new(0.0, 1.0);
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
    plan(n).inverse(&mut z);
    (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
}

pub fn inverse_real(a: &[Complex64], n: usize) -> Vec<f64> {
    let mut z = a.to_vec();
    plan(n).inverse(&mut z);
    z.iter().map(|c| c.re).collect()
}

/// Analyses two real fields with one complex transform.
pub fn forward_pair(x: &[f64], y: &[f64], n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z: Vec<Complex64> = x.iter().zip(y).map(|(&a, &b)| Complex64::new(a, b)).collect();
    plan(n).forward(&mut z);
    let mut xa = vec![Complex64::new(0.0, 0.0); z.len()];
    let mut ya = vec![Complex64::new(0.0, 0.0); z.len()];
    let nn = n * n;
    for idx in 0..z.len() {
        let (a, b, c) = (idx / nn, (idx / n) % n, idx % n);
        let cj = ((n - a) % n) * nn + ((n - b) % n) * n + (n - c) % n;
        let zk = z[idx];
        let zc = z[cj].conj();
        xa[idx] = (zk + zc) * 0.5;
        ya[idx] = Complex64::new(0.0, -0.5) * (zk - zc);
    }
    (xa, ya)
}

pub fn forward_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut z: Vec<Complex64> = x.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    plan(n).forward(&mut z);
    z
}
