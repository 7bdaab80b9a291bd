//! Interference-coupled rate computation shared by both environments.
//!
//! An [`InterferenceSystem`] holds the received-power coupling matrix of a
//! network at full per-transmitter power: entry `(i, j)` is the power rx `i`
//! receives from tx `j` when `x_j = 1`. Rates follow
//! `r_i = w * log2(1 + C_ii x_i / (sum_{j != i} C_ij x_j + noise))`.

#[derive(Clone, Debug)]
pub struct InterferenceSystem {
    n: usize,
    /// Row-major coupling matrix, watts at full power.
    coupling: Vec<f64>,
    pub noise_watts: f64,
    pub bandwidth_hz: f64,
}

impl InterferenceSystem {
    pub fn new(n: usize, coupling: Vec<f64>, noise_watts: f64, bandwidth_hz: f64) -> Self {
        assert_eq!(coupling.len(), n * n, "coupling matrix must be n x n");
        Self {
            n,
            coupling,
            noise_watts,
            bandwidth_hz,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coupling(&self, rx: usize, tx: usize) -> f64 {
        self.coupling[rx * self.n + tx]
    }

    /// Signal power and interference-plus-noise power at rx `i`.
    #[inline]
    fn signal_and_floor(&self, i: usize, x: &[f64]) -> (f64, f64) {
        let row = &self.coupling[i * self.n..(i + 1) * self.n];
        let mut interference = 0.0;
        for (j, (&c, &xj)) in row.iter().zip(x).enumerate() {
            if j != i {
                interference += c * xj;
            }
        }
        (row[i] * x[i], interference + self.noise_watts)
    }

    pub fn sinrs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (s, d) = self.signal_and_floor(i, x);
                s / d
            })
            .collect()
    }

    /// Per-node achievable rates in bits/s (log base 2).
    pub fn rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (s, d) = self.signal_and_floor(i, x);
                self.bandwidth_hz * (1.0 + s / d).log2()
            })
            .collect()
    }

    /// Minimum rate and its achieving index (lexicographically first on ties).
    pub fn min_rate(&self, x: &[f64]) -> (usize, f64) {
        let rates = self.rates(x);
        let mut arg = 0;
        for (i, &r) in rates.iter().enumerate() {
            if r < rates[arg] {
                arg = i;
            }
        }
        (arg, rates[arg])
    }

    /// Gradient of the minimum rate with respect to `x`: the gradient of the
    /// achieving node's rate, with ties resolved to the first achiever.
    pub fn min_rate_gradient(&self, x: &[f64]) -> Vec<f64> {
        let (k, _) = self.min_rate(x);
        let (s, d) = self.signal_and_floor(k, x);
        let w_ln2 = self.bandwidth_hz / std::f64::consts::LN_2;
        let mut grad = vec![0.0; self.n];
        for j in 0..self.n {
            let c = self.coupling(k, j);
            if j == k {
                grad[j] = w_ln2 * c / (d + s);
            } else {
                grad[j] = -w_ln2 * c * s / (d * (d + s));
            }
        }
        grad
    }
}
