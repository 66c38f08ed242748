use super::normal::{cdf, expected_positive_part, pdf};
use super::{fantasy_scale, observed_index, observed_moments};
use crate::gp::PosteriorState;

/// Slopes closer than this are treated as equal; the larger intercept wins.
const SLOPE_TIE: f64 = 1e-12;

/// Upper envelope of the lines `a_i + b_i z`: indices of the lines that are
/// maximal somewhere, by increasing slope, and the breakpoints between them.
pub(crate) fn upper_envelope(a: &[f64], b: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| b[i].total_cmp(&b[j]).then(a[i].total_cmp(&a[j])));
    let mut lines: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        if let Some(&last) = lines.last() {
            if (b[i] - b[last]).abs() <= SLOPE_TIE {
                if a[i] >= a[last] {
                    lines.pop();
                    lines.push(i);
                }
                continue;
            }
        }
        lines.push(i);
    }

    let mut keep: Vec<usize> = Vec::with_capacity(lines.len());
    let mut breaks: Vec<f64> = Vec::with_capacity(lines.len());
    for i in lines {
        loop {
            let Some(&j) = keep.last() else { break };
            let c = (a[j] - a[i]) / (b[i] - b[j]);
            if breaks.last().is_some_and(|&prev| c <= prev) {
                keep.pop();
                breaks.pop();
                continue;
            }
            breaks.push(c);
            break;
        }
        keep.push(i);
    }
    (keep, breaks)
}

/// `E[max_i (a_i + b_i Z)] - max_i a_i` for standard normal `Z`.
#[cfg(test)]
pub(crate) fn expected_max_gain(a: &[f64], b: &[f64]) -> f64 {
    let (keep, breaks) = upper_envelope(a, b);
    let mut gain = 0.0;
    for (k, c) in breaks.iter().enumerate() {
        gain += (b[keep[k + 1]] - b[keep[k]]) * expected_positive_part(-c.abs());
    }
    gain
}

/// Knowledge gradient restricted to evaluated points (KGCP) at `x`:
/// `E_n[mu**_{n+1} - mu**_n]` with its gradient in `x`. The gradient holds
/// the envelope breakpoints fixed.
pub fn kgcp(state: &PosteriorState, x: &[f64]) -> (f64, Vec<f64>) {
    let n = state.len();
    let d = x.len();
    let noise = state.hypers().noise_variance;
    let y = state.data().values();
    let weights = state.weights();
    let mut a: Vec<f64> = (0..n).map(|i| y[i] - noise * weights[i]).collect();
    let best_old = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut m = state.moments_with_grad(x);
    if let Some(i) = observed_index(state, x) {
        (m.mean, m.variance) = observed_moments(state, i);
    }
    if fantasy_scale(state, x) == 0.0 {
        let gain = m.mean - best_old;
        return if gain > 0.0 { (gain, m.mean_grad) } else { (0.0, vec![0.0; d]) };
    }
    let (var, var_grad) = if m.variance > 0.0 { (m.variance, m.variance_grad) } else { (0.0, vec![0.0; d]) };
    let s2 = var + noise;
    let s = s2.sqrt();
    let s_grad: Vec<f64> = var_grad.iter().map(|g| g / (2.0 * s)).collect();

    // Sigma_n(x_i, x) = noise * [(K + D)^{-1} k(X, x)]_i under the nugget view
    let mut k = Vec::with_capacity(n);
    let mut dk: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d];
    for p in state.data().points() {
        let (v, g) = state.hypers().kernel.value_and_grad(p, x);
        k.push(v);
        for j in 0..d {
            dk[j].push(g[j]);
        }
    }
    let u = state.solve(&k);
    let du: Vec<Vec<f64>> = dk.iter().map(|col| state.solve(col)).collect();

    let mut b: Vec<f64> = u.iter().map(|ui| noise * ui / s).collect();
    a.push(m.mean);
    b.push(var / s);

    let grad_b = |i: usize, j: usize| -> f64 {
        if i < n {
            noise * (du[j][i] / s - u[i] * s_grad[j] / s2)
        } else {
            var_grad[j] / s - var * s_grad[j] / s2
        }
    };

    let (keep, breaks) = upper_envelope(&a, &b);
    let mut gain = a.iter().copied().fold(f64::NEG_INFINITY, f64::max) - best_old;
    for (kk, c) in breaks.iter().enumerate() {
        gain += (b[keep[kk + 1]] - b[keep[kk]]) * expected_positive_part(-c.abs());
    }

    let mut grad = vec![0.0; d];
    for (kk, &line) in keep.iter().enumerate() {
        let lo = if kk == 0 { f64::NEG_INFINITY } else { breaks[kk - 1] };
        let hi = if kk + 1 == keep.len() { f64::INFINITY } else { breaks[kk] };
        let d_cdf = cdf(hi) - cdf(lo);
        let d_pdf = pdf(lo) - pdf(hi);
        for (j, g) in grad.iter_mut().enumerate() {
            if line == n {
                *g += m.mean_grad[j] * d_cdf;
            }
            *g += grad_b(line, j) * d_pdf;
        }
    }
    (gain.max(0.0), grad)
}
