//! Discrete convolution of nodal values with sampled kernel weights.
//!
//! Both paths compute `out[i] = Σ_j table[|i - j|] · v[j]` over the support
//! `lo..=hi`. The FFT path convolves over the whole window, which is exact
//! because `v` vanishes off the support.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// O(N²) sum over the occupied nodes, parallel over output nodes.
    Direct,
    /// Zero-padded FFT linear convolution over the full window.
    #[default]
    Fft,
}

const PARALLEL_THRESHOLD: usize = 512;

struct FftPlan<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    spectrum: Vec<Complex<T>>,
    buffer: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

pub(crate) struct Convolver<T: Real> {
    table: Vec<T>,
    method: ConvolutionMethod,
    plan: Option<FftPlan<T>>,
}

impl<T: Real> Convolver<T> {
    /// `table[k]` is the weight for lag `k ≥ 0`; the window has `table.len()` nodes.
    pub fn new(table: Vec<T>, method: ConvolutionMethod) -> Self {
        let plan = match method {
            ConvolutionMethod::Direct => None,
            ConvolutionMethod::Fft => Some(Self::plan(&table)),
        };
        Self { table, method, plan }
    }

    fn plan(table: &[T]) -> FftPlan<T> {
        let n = table.len();
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); len];
        spectrum[0].re = table[0];
        for k in 1..n {
            spectrum[k].re = table[k];
            spectrum[len - k].re = table[k];
        }
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];
        forward.process_with_scratch(&mut spectrum, &mut scratch);
        let norm = T::one() / T::from_usize_exact(len);
        for c in &mut spectrum {
            *c *= norm;
        }
        FftPlan { forward, inverse, spectrum, buffer: vec![Complex::new(T::zero(), T::zero()); len], scratch }
    }

    pub fn method(&self) -> ConvolutionMethod {
        self.method
    }

    /// Fills `out[lo..=hi]`; other entries of `out` are left untouched.
    pub fn apply(&mut self, v: &[T], lo: usize, hi: usize, out: &mut [T]) {
        debug_assert!(hi < v.len() && v.len() == out.len() && v.len() == self.table.len());
        match self.plan.as_mut() {
            None => direct(&self.table, v, lo, hi, out),
            Some(plan) => {
                let zero = Complex::new(T::zero(), T::zero());
                plan.buffer.iter_mut().for_each(|c| *c = zero);
                for (c, &x) in plan.buffer[lo..=hi].iter_mut().zip(&v[lo..=hi]) {
                    c.re = x;
                }
                plan.forward.process_with_scratch(&mut plan.buffer, &mut plan.scratch);
                for (c, k) in plan.buffer.iter_mut().zip(&plan.spectrum) {
                    *c *= *k;
                }
                plan.inverse.process_with_scratch(&mut plan.buffer, &mut plan.scratch);
                for (o, c) in out[lo..=hi].iter_mut().zip(&plan.buffer[lo..=hi]) {
                    *o = c.re;
                }
            }
        }
    }
}

fn direct<T: Real>(table: &[T], v: &[T], lo: usize, hi: usize, out: &mut [T]) {
    let row = |i: usize| -> T {
        let mut acc = T::zero();
        for (j, &vj) in v.iter().enumerate().take(hi + 1).skip(lo) {
            acc += table[i.abs_diff(j)] * vj;
        }
        acc
    };
    let slice = &mut out[lo..=hi];
    if slice.len() >= PARALLEL_THRESHOLD {
        slice.par_iter_mut().enumerate().for_each(|(k, o)| *o = row(lo + k));
    } else {
        slice.iter_mut().enumerate().for_each(|(k, o)| *o = row(lo + k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_and_fft_agree() {
        let n = 301;
        let table: Vec<f64> = (0..n).map(|k| (-(k as f64) * 0.05).exp()).collect();
        let v: Vec<f64> =
            (0..n).map(|j| if (40..=250).contains(&j) { (j as f64 * 0.1).sin().abs() } else { 0.0 }).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        Convolver::new(table.clone(), ConvolutionMethod::Direct).apply(&v, 40, 250, &mut a);
        Convolver::new(table, ConvolutionMethod::Fft).apply(&v, 40, 250, &mut b);
        for i in 40..=250 {
            assert!((a[i] - b[i]).abs() < 1e-12, "i={i}");
        }
        assert_eq!(a[0], 0.0);
    }
}
