//! Independent reference computations used by the acceptance checks. None of
//! these call into the engine's own estimators.

use rand::Rng;
use sensiloop_core::rng;

/// Analytic first-order and total indices of the Ishigami function on [-pi, pi]^3.
pub fn ishigami_indices(a: f64, b: f64) -> ([f64; 3], [f64; 3]) {
    let pi4 = std::f64::consts::PI.powi(4);
    let pi8 = pi4 * pi4;
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    let v = v1 + v2 + v13;
    ([v1 / v, v2 / v, 0.0], [(v1 + v13) / v, v2 / v, v13 / v])
}

pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

/// Saltelli sampling with the Saltelli (2010) first-order and Jansen total
/// estimators, inputs uniform on `bounds`.
pub fn saltelli_jansen(f: &dyn Fn(&[f64]) -> f64, bounds: &[(f64, f64)], n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let d = bounds.len();
    let mut g = rng::seeded(seed);
    let mut draw = || -> Vec<f64> { bounds.iter().map(|(lo, hi)| g.random_range(*lo..*hi)).collect() };
    let a: Vec<Vec<f64>> = (0..n).map(|_| draw()).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| draw()).collect();
    let fa: Vec<f64> = a.iter().map(|x| f(x)).collect();
    let fb: Vec<f64> = b.iter().map(|x| f(x)).collect();
    let all: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / all.len() as f64;
    let mut s1 = vec![0.0; d];
    let mut st = vec![0.0; d];
    for i in 0..d {
        let mut first = 0.0;
        let mut total = 0.0;
        for k in 0..n {
            let mut abi = a[k].clone();
            abi[i] = b[k][i];
            let y = f(&abi);
            first += fb[k] * (y - fa[k]);
            total += (fa[k] - y).powi(2);
        }
        s1[i] = first / n as f64 / var;
        st[i] = 0.5 * total / n as f64 / var;
    }
    (s1, st)
}

/// Shapley values by averaging marginal contributions over all d! orderings.
/// `value` maps a coalition bitmask to the game value.
pub fn shapley_by_permutations(d: usize, value: &dyn Fn(usize) -> f64) -> Vec<f64> {
    let mut cache = vec![f64::NAN; 1 << d];
    for (m, c) in cache.iter_mut().enumerate() {
        *c = value(m);
    }
    let mut perm: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0; d];
    let mut count = 0u64;
    // Heap's algorithm
    let mut c = vec![0usize; d];
    let visit = |perm: &[usize], phi: &mut [f64]| {
        let mut mask = 0usize;
        for &i in perm {
            let next = mask | 1 << i;
            phi[i] += cache[next] - cache[mask];
            mask = next;
        }
    };
    visit(&perm, &mut phi);
    count += 1;
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm, &mut phi);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count as f64).collect()
}

/// Per-sample loss terms written out directly from the textbook definitions.
pub mod losses {
    fn clamp(p: f64) -> f64 {
        p.max(1e-12).min(1.0 - 1e-12)
    }

    fn argmax(v: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    pub fn regression(kind: &str, p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (pr, tr) in p.iter().zip(t) {
            let mut row = 0.0;
            for (a, b) in pr.iter().zip(tr) {
                row += match kind {
                    "mae" => (a - b).abs(),
                    "mse" | "rmse" => (a - b) * (a - b),
                    "msle" | "rmsle" => ((1.0 + a).ln() - (1.0 + b).ln()).powi(2),
                    "log_cosh" => (a - b).cosh().ln(),
                    _ => unreachable!(),
                };
            }
            total += row / pr.len() as f64;
        }
        let mean = total / p.len() as f64;
        if kind.starts_with('r') {
            mean.sqrt()
        } else {
            mean
        }
    }

    /// `p` rows are class probabilities (log-probabilities for nll), `t` one-hot.
    pub fn classification(kind: &str, p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (pr, tr) in p.iter().zip(t) {
            let k = pr.len();
            let pos = pr[k - 1];
            let y = if tr[k - 1] > 0.5 { 1.0 } else { -1.0 };
            let yf = y * (2.0 * pos - 1.0);
            total += match kind {
                "hinge" => f64::max(0.0, 1.0 - yf),
                "squared_hinge" => f64::max(0.0, 1.0 - yf).powi(2),
                "smoothed_hinge" => {
                    if yf >= 1.0 {
                        0.0
                    } else if yf >= 0.0 {
                        0.5 * (1.0 - yf) * (1.0 - yf)
                    } else {
                        0.5 - yf
                    }
                }
                "modified_huber" => {
                    if yf >= -1.0 {
                        f64::max(0.0, 1.0 - yf).powi(2)
                    } else {
                        -4.0 * yf
                    }
                }
                "ramp" => (1.0 - yf).max(0.0).min(2.0),
                "cross_entropy" => -clamp(pr[argmax(tr)]).ln(),
                "binary_cross_entropy" => {
                    if k == 2 {
                        let (q, t) = (clamp(pos), tr[1]);
                        -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
                    } else {
                        let mut s = 0.0;
                        for (q, t) in pr.iter().zip(tr) {
                            let q = clamp(*q);
                            s -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
                        }
                        s / k as f64
                    }
                }
                "nll" => -pr[argmax(tr)],
                _ => unreachable!(),
            };
        }
        total / p.len() as f64
    }
}
