//! Non-learning gap fillers: zeros, a straight line, and Janssen's iterative
//! autoregressive interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::GapSpec;

fn check_gap(signal: &[f64], gap: GapSpec) -> Result<()> {
    if gap.end() > signal.len() {
        return Err(Error::GapOutOfRange { start: gap.start, end: gap.end(), len: signal.len() });
    }
    Ok(())
}

pub fn fill_zero(signal: &[f64], gap: GapSpec) -> Result<Vec<f64>> {
    check_gap(signal, gap)?;
    let mut out = signal.to_vec();
    out[gap.range()].iter_mut().for_each(|v| *v = 0.0);
    Ok(out)
}

/// Straight line between the two samples bordering the gap.
pub fn fill_linear(signal: &[f64], gap: GapSpec) -> Result<Vec<f64>> {
    check_gap(signal, gap)?;
    let mut out = signal.to_vec();
    if gap.len == 0 {
        return Ok(out);
    }
    if gap.start == 0 || gap.end() >= signal.len() {
        return Err(Error::GapTouchesEdge);
    }
    let (a, b) = (signal[gap.start - 1], signal[gap.end()]);
    let steps = (gap.len + 1) as f64;
    for (k, v) in out[gap.range()].iter_mut().enumerate() {
        *v = a + (b - a) * (k + 1) as f64 / steps;
    }
    Ok(out)
}

/// Biased autocorrelation `r[k] = (1/N) sum_t x[t] x[t+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::TooShort { needed: max_lag + 1, got: x.len() });
    }
    let n = x.len() as f64;
    Ok((0..=max_lag)
        .map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect())
}

/// Forward linear predictor `x[t] ~ sum_k coeffs[k-1] x[t-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub coeffs: Vec<f64>,
    /// Prediction error power for the fitted order.
    pub error: f64,
    pub reflection: Vec<f64>,
}

/// Levinson-Durbin recursion on `r[0..=order]`.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<ArFit> {
    if r.len() <= order {
        return Err(Error::TooShort { needed: order + 1, got: r.len() });
    }
    if !(r[0] > 0.0) {
        return Err(Error::SingularToeplitz);
    }
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut error = r[0];
    for m in 0..order {
        // error hit zero: the signal is exactly predictable at this order
        if error <= r[0] * 1e-15 {
            break;
        }
        let acc = r[m + 1] - (0..m).map(|k| a[k] * r[m - k]).sum::<f64>();
        let k = acc / error;
        prev[..m].copy_from_slice(&a[..m]);
        a[m] = k;
        for j in 0..m {
            a[j] = prev[j] - k * prev[m - 1 - j];
        }
        error *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(ArFit { coeffs: a, error, reflection })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JanssenConfig {
    /// AR order; `min(256, context_len / 3)` when absent.
    pub ar_order: Option<usize>,
    pub iterations: usize,
    /// Samples of context used on each side of the gap.
    pub context_len: usize,
}

impl Default for JanssenConfig {
    fn default() -> Self {
        Self { ar_order: None, iterations: 10, context_len: 4096 }
    }
}

impl JanssenConfig {
    pub fn order(&self) -> usize {
        self.ar_order.unwrap_or((self.context_len / 3).min(256))
    }

    fn validate(&self) -> Result<()> {
        let p = self.order();
        if p == 0 || self.iterations == 0 || self.context_len <= p {
            return Err(Error::InvalidConfig(format!(
                "janssen needs order >= 1, iterations >= 1, context > order (got p={p}, iterations={}, context={})",
                self.iterations, self.context_len
            )));
        }
        Ok(())
    }
}

/// Error filter `[1, -a1, ..., -ap]`.
fn error_filter(fit: &ArFit) -> Vec<f64> {
    std::iter::once(1.0).chain(fit.coeffs.iter().map(|a| -a)).collect()
}

/// Energy of the full (zero-padded) convolution of `y` with `c`.
fn residual_energy(y: &[f64], c: &[f64]) -> f64 {
    let p = c.len() - 1;
    (0..y.len() + p)
        .map(|t| {
            let lo = t.saturating_sub(y.len() - 1);
            let e: f64 = (lo..=p.min(t)).map(|k| c[k] * y[t - k]).sum();
            e * e
        })
        .sum()
}

/// Lower band Cholesky factor of a symmetric Toeplitz matrix with first
/// row `acf[0..=p]` (zero beyond), stored row-wise with `p + 1` entries.
struct BandCholesky {
    n: usize,
    p: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor_toeplitz(acf: &[f64], n: usize) -> Result<Self> {
        let p = acf.len() - 1;
        let w = p + 1;
        let mut l = vec![0.0; n * w];
        // entry (i, j) with i - p <= j <= i lives at i * w + (j + p - i)
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let k0 = i.saturating_sub(p).max(j.saturating_sub(p));
                let mut sum = acf[i - j];
                let ri = &l[i * w + (k0 + p - i)..i * w + (j + p - i)];
                let rj = &l[j * w + (k0 + p - j)..j * w + p];
                sum -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::SingularSystem);
                    }
                    l[i * w + p] = sum.sqrt();
                } else {
                    l[i * w + (j + p - i)] = sum / l[j * w + p];
                }
            }
        }
        Ok(Self { n, p, l })
    }

    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            let s: f64 = (j0..i).map(|j| self.l[i * w + (j + p - i)] * b[j]).sum();
            b[i] = (b[i] - s) / self.l[i * w + p];
        }
        for i in (0..n).rev() {
            let j1 = (i + p).min(n - 1);
            let s: f64 = (i + 1..=j1).map(|j| self.l[j * w + (i + p - j)] * b[j]).sum();
            b[i] = (b[i] - s) / self.l[i * w + p];
        }
        b
    }
}

/// Least-squares gap samples for error filter `c`: minimizes the residual
/// energy of `y` over the unknowns in `gap_lo..gap_lo + g`.
fn solve_gap(y: &[f64], gap_lo: usize, g: usize, c: &[f64]) -> Result<Vec<f64>> {
    let p = c.len() - 1;
    let acf: Vec<f64> = (0..=p).map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum()).collect();
    // residual of the known part only, for every t whose window touches the gap
    let mut known = y.to_vec();
    known[gap_lo..gap_lo + g].iter_mut().for_each(|v| *v = 0.0);
    let e_known: Vec<f64> = (gap_lo..gap_lo + g + p)
        .map(|t| (0..=p).map(|k| c[k] * known[t - k]).sum())
        .collect();
    let rhs: Vec<f64> = (0..g).map(|j| -(0..=p).map(|k| c[k] * e_known[j + k]).sum::<f64>()).collect();
    Ok(BandCholesky::factor_toeplitz(&acf, g)?.solve(rhs))
}

/// Janssen interpolation; also returns the residual energy after each
/// iteration (non-increasing).
pub fn janssen_inpaint_traced(signal: &[f64], gap: GapSpec, config: &JanssenConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    check_gap(signal, gap)?;
    if gap.len == 0 {
        return Ok((signal.to_vec(), Vec::new()));
    }
    let p = config.order();
    let left = gap.start.min(config.context_len);
    let right = (signal.len() - gap.end()).min(config.context_len);
    if left <= p || right <= p {
        return Err(Error::InsufficientContext { start: gap.start, needed: p + 1 });
    }
    let lo = gap.start - left;
    let mut y = fill_linear(signal, gap)?[lo..gap.end() + right].to_vec();
    let mut residuals = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let r = autocorrelation(&y, p)?;
        let fit = levinson_durbin(&r, p)?;
        let c = error_filter(&fit);
        let u = solve_gap(&y, left, gap.len, &c)?;
        y[left..left + gap.len].copy_from_slice(&u);
        residuals.push(residual_energy(&y, &c));
    }
    let mut out = signal.to_vec();
    out[gap.range()].copy_from_slice(&y[left..left + gap.len]);
    Ok((out, residuals))
}

pub fn janssen_inpaint(signal: &[f64], gap: GapSpec, config: &JanssenConfig) -> Result<Vec<f64>> {
    janssen_inpaint_traced(signal, gap, config).map(|(out, _)| out)
}
