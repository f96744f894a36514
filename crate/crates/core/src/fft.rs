//! FFT-backed self-convolution with cached plans.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, PlanPair>> = RefCell::new(HashMap::new());
}

fn plans_for(len: usize) -> PlanPair {
    PLANS.with(|cache| {
        let mut cache = cache.borrow_mut();
        cache
            .entry(len)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
            })
            .clone()
    })
}

/// Linear self-convolution `out[j] = sum_{k} w[k] w[j-k]` for `j < out_len`,
/// computed with zero padding to at least `2 * w.len()` so circular
/// wrap-around cannot alias back into the requested prefix.
pub fn self_convolve_prefix(w: &[f64], out_len: usize) -> Vec<f64> {
    assert!(out_len <= 2 * w.len());
    let fft_len = (2 * w.len()).next_power_of_two();
    let (forward, inverse) = plans_for(fft_len);

    let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(fft_len, Complex64::new(0.0, 0.0));
    forward.process(&mut buf);
    for v in buf.iter_mut() {
        *v = *v * *v;
    }
    inverse.process(&mut buf);

    let scale = 1.0 / fft_len as f64;
    buf.iter().take(out_len).map(|c| c.re * scale).collect()
}
