/// Aitken acceleration over the last three log-likelihoods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AitkenState {
    pub l_prev2: f64,
    pub l_prev: f64,
    pub l_curr: f64,
    /// `(l_curr - l_prev) / (l_prev - l_prev2)`; NaN when the denominator vanishes.
    pub a_k: f64,
    /// Asymptotic estimate `l_prev + (l_curr - l_prev) / (1 - a_k)`; NaN unless `a_k < 1`.
    pub l_inf: f64,
}

impl AitkenState {
    pub fn new(l_prev2: f64, l_prev: f64, l_curr: f64) -> Self {
        let denom = l_prev - l_prev2;
        let a_k = if denom != 0.0 { (l_curr - l_prev) / denom } else { f64::NAN };
        let l_inf = if a_k < 1.0 { l_prev + (l_curr - l_prev) / (1.0 - a_k) } else { f64::NAN };
        AitkenState { l_prev2, l_prev, l_curr, a_k, l_inf }
    }

    /// From the tail of a trace; `None` until three values exist.
    pub fn from_trace(trace: &[f64]) -> Option<Self> {
        match trace {
            [.., a, b, c] => Some(AitkenState::new(*a, *b, *c)),
            _ => None,
        }
    }

    /// Lindsay's variant `l_inf - l_prev < epsilon` when `0 < a_k < 1`,
    /// otherwise `|l_curr - l_prev| < epsilon`.
    pub fn converged(&self, epsilon: f64) -> bool {
        if self.a_k > 0.0 && self.a_k < 1.0 {
            self.l_inf - self.l_prev < epsilon
        } else {
            (self.l_curr - self.l_prev).abs() < epsilon
        }
    }
}
