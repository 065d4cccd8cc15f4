//! Cumulative Stieltjes quadrature `∫_s^t F(u) dx(u)` from grid samples.
//!
//! `Simpson` is a fourth-order interpolatory rule: on each interval both `F`
//! and `x` are replaced by their cubic interpolants through four nearby grid
//! points (all at or after the base point `s`) and the product `F x′` is
//! integrated exactly. It is exact whenever `F` and `x` are cubic
//! polynomials on the stencil, and degrades to quadratic and linear
//! interpolation when fewer than four points are available.
//! `Trapezoid` uses `(F_k + F_{k+1})/2 · (x_{k+1} − x_k)`.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::increments::Grid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum QuadratureRule {
    Trapezoid,
    #[default]
    Simpson,
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadratureRule::Trapezoid => "trapezoid",
            QuadratureRule::Simpson => "simpson",
        })
    }
}

impl FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "trapezoid" => Ok(QuadratureRule::Trapezoid),
            "simpson" => Ok(QuadratureRule::Simpson),
            other => Err(Error::Parse(format!("unknown quadrature rule {other:?}"))),
        }
    }
}

const GAUSS_X: [f64; 4] =
    [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GAUSS_W: [f64; 4] =
    [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// `W[i][j] = ∫_a^b L_i(u) L_j′(u) du` for the Lagrange basis on `nodes`.
fn stencil_weights(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    let m = nodes.len();
    let shift = a;
    let p: Vec<f64> = nodes.iter().map(|v| v - shift).collect();
    let (a, b) = (0.0, b - shift);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut w = vec![0.0; m * m];
    for (gx, gw) in GAUSS_X.iter().zip(GAUSS_W) {
        let u = mid + half * gx;
        let basis: Vec<f64> =
            (0..m).map(|i| (0..m).filter(|&k| k != i).map(|k| (u - p[k]) / (p[i] - p[k])).product()).collect();
        let deriv: Vec<f64> = (0..m)
            .map(|j| {
                let denom: f64 = (0..m).filter(|&k| k != j).map(|k| p[j] - p[k]).product();
                let num: f64 = (0..m)
                    .filter(|&l| l != j)
                    .map(|l| (0..m).filter(|&k| k != j && k != l).map(|k| u - p[k]).product::<f64>())
                    .sum();
                num / denom
            })
            .collect();
        for i in 0..m {
            for j in 0..m {
                w[i * m + j] += gw * half * basis[i] * deriv[j];
            }
        }
    }
    w
}

/// Precomputed interval weights for one grid and rule.
#[derive(Clone, Debug)]
pub struct Stieltjes {
    rule: QuadratureRule,
    m: usize,
    times: Vec<f64>,
    // w4[k][o]: four-point stencil starting at k + o - 2 for interval k.
    w4: Vec<[Option<Vec<f64>>; 3]>,
    // Stencils used when fewer than four points remain after the base.
    w3: [Vec<f64>; 2],
    w2: Vec<f64>,
}

impl Stieltjes {
    pub fn new(grid: &Grid, rule: QuadratureRule) -> Stieltjes {
        let m = grid.intervals();
        let times = grid.times().to_vec();
        let mut w4 = Vec::with_capacity(m);
        let mut w3 = [Vec::new(), Vec::new()];
        let mut w2 = Vec::new();
        if rule == QuadratureRule::Simpson {
            for k in 0..m {
                let entry: [Option<Vec<f64>>; 3] = std::array::from_fn(|o| {
                    let start = (k + o).checked_sub(2)?;
                    if start + 3 > m {
                        return None;
                    }
                    Some(stencil_weights(&times[start..start + 4], times[k], times[k + 1]))
                });
                w4.push(entry);
            }
            if m >= 2 {
                for (slot, k) in [m - 2, m - 1].into_iter().enumerate() {
                    w3[slot] = stencil_weights(&times[m - 2..=m], times[k], times[k + 1]);
                }
            }
            w2 = stencil_weights(&times[m - 1..=m], times[m - 1], times[m]);
        }
        Stieltjes { rule, m, times, w4, w3, w2 }
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Fills `out[r] = ∫_{t_s}^{t_{s+r}} F dx` for `r = 0..=M−s`, where
    /// `f[r] = F(t_{s+r})` and `x` holds the integrator at every grid point.
    pub fn cumulative(&self, s: usize, f: &[f64], x: &[f64], out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(f.len(), m - s + 1);
        debug_assert_eq!(x.len(), m + 1);
        out[0] = 0.0;
        for k in s..m {
            let piece = match self.rule {
                QuadratureRule::Trapezoid => 0.5 * (f[k - s] + f[k + 1 - s]) * (x[k + 1] - x[k]),
                QuadratureRule::Simpson => self.simpson_piece(s, k, f, x),
            };
            out[k + 1 - s] = out[k - s] + piece;
        }
    }

    fn simpson_piece(&self, s: usize, k: usize, f: &[f64], x: &[f64]) -> f64 {
        let m = self.m;
        let avail = m - s + 1;
        let (start, w): (usize, &[f64]) = if avail >= 4 {
            let start = (k.max(s + 1) - 1).max(s).min(m - 3);
            let o = start + 2 - k;
            (start, self.w4[k][o].as_deref().expect("stencil precomputed"))
        } else if avail == 3 {
            (m - 2, &self.w3[k + 2 - m])
        } else {
            (m - 1, &self.w2)
        };
        let n = (w.len() as f64).sqrt() as usize;
        let xk = x[k];
        let mut acc = 0.0;
        for i in 0..n {
            let fi = f[start + i - s];
            if fi == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for j in 0..n {
                inner += w[i * n + j] * (x[start + j] - xk);
            }
            acc += fi * inner;
        }
        acc
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}
