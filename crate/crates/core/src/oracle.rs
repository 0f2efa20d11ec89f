//! Brute-force reference transforms, written as the literal double sums.
//! Used by the self-test and the test suites to cross-check the FFT path.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::numerology::SymbolGrid;

fn ratio(rx: &SymbolGrid, reference: &SymbolGrid) -> Vec<Vec<Complex64>> {
    (0..rx.rows())
        .map(|k| (0..rx.cols()).map(|n| rx.get(k, n) / reference.get(k, n)).collect())
        .collect()
}

/// `D[d][j] = |(1/M) Σ_k Σ_n G[k][n] e^{-j2πnl/N} e^{+j2πkd/M}|²` with
/// `j = (l + N/2) mod N`.
pub fn brute_force_ddp(rx: &SymbolGrid, reference: &SymbolGrid) -> Vec<Vec<f64>> {
    let (m, n) = rx.shape();
    let g = ratio(rx, reference);
    let mut out = vec![vec![0.0; n]; m];
    for (d, row) in out.iter_mut().enumerate() {
        for l in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, gk) in g.iter().enumerate() {
                for (sym, z) in gk.iter().enumerate() {
                    let phase = 2.0 * PI * ((k * d) as f64 / m as f64 - (sym * l) as f64 / n as f64);
                    acc += z * Complex64::cis(phase);
                }
            }
            row[(l + n / 2) % n] = (acc / m as f64).norm_sqr();
        }
    }
    out
}

/// `P[d] = (1/N) Σ_n |(1/M) Σ_k G[k][n] e^{+j2πkd/M}|²`.
pub fn brute_force_pdp(rx: &SymbolGrid, reference: &SymbolGrid) -> Vec<f64> {
    let (m, n) = rx.shape();
    let g = ratio(rx, reference);
    (0..m)
        .map(|d| {
            (0..n)
                .map(|sym| {
                    let acc: Complex64 = (0..m)
                        .map(|k| g[k][sym] * Complex64::cis(2.0 * PI * (k * d) as f64 / m as f64))
                        .sum();
                    (acc / m as f64).norm_sqr()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}
