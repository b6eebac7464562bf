//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Nothing here calls into the code under test
//! except to build inputs.

#![allow(dead_code)]

use linkstop::causal::LinkedUnit;
use linkstop::selection::LadderPoint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Jaro and Jaro-Winkler values checked by hand (matching window, half
/// transpositions, prefix of at most four at scale 0.1).
pub const JW_TABLE: &[(&str, &str, f64, f64)] = &[
    ("MARTHA", "MARHTA", 0.944444444444445, 0.961111111111111),
    ("DWAYNE", "DUANE", 0.822222222222222, 0.840000000000000),
    ("DIXON", "DICKSONX", 0.766666666666667, 0.813333333333333),
    ("JELLYFISH", "SMELLYFISH", 0.896296296296296, 0.896296296296296),
    ("CRATE", "TRACE", 0.733333333333333, 0.733333333333333),
    ("PAUL", "PAFUL", 0.933333333333333, 0.946666666666667),
    ("GERTRUD", "GERTRUCD", 0.958333333333333, 0.975000000000000),
    ("MUELLER", "MUEKLER", 0.904761904761905, 0.933333333333333),
    ("ABC", "XYZ", 0.0, 0.0),
    ("MUELLER", "MUELLER", 1.0, 1.0),
    ("SHACKLEFORD", "SHACKELFORD", 0.969696969696970, 0.981818181818182),
    ("SCHMIDT", "SCHMITT", 0.904761904761905, 0.942857142857143),
    ("XAB", "YAB", 0.777777777777778, 0.777777777777778),
    ("18", "81", 0.0, 0.0),
    ("KARIN", "ULRIKE", 0.577777777777778, 0.577777777777778),
    ("A", "B", 0.0, 0.0),
];

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot = a[col].clone();
                    for (v, p) in a[r].iter_mut().zip(&pivot) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Subclassified difference in means with λ_j = n_j / n over populated
/// classes; `None` when a populated class has fewer than two units per arm.
pub fn dim_oracle(units: &[LinkedUnit], classes: usize) -> Option<(f64, f64)> {
    let n = units.len() as f64;
    let (mut tau, mut var) = (0.0, 0.0);
    for j in 0..classes {
        let y1: Vec<f64> = units
            .iter()
            .filter(|u| u.subclass == j && u.treated)
            .map(|u| u.outcome)
            .collect();
        let y0: Vec<f64> = units
            .iter()
            .filter(|u| u.subclass == j && !u.treated)
            .map(|u| u.outcome)
            .collect();
        if y1.is_empty() && y0.is_empty() {
            continue;
        }
        if y1.len() < 2 || y0.len() < 2 {
            return None;
        }
        let lam = (y1.len() + y0.len()) as f64 / n;
        tau += lam * (mean(&y1) - mean(&y0));
        var += lam * lam * (sample_var(&y1) / y1.len() as f64 + sample_var(&y0) / y0.len() as f64);
    }
    Some((tau, var))
}

/// OLS through the normal equations; returns coefficients and the
/// estimated variance of the last one.
pub fn ols_oracle(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let (n, k) = (x.len(), x[0].len());
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| x.iter().map(|r| r[a] * r[b]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..k).map(|a| x.iter().zip(y).map(|(r, yi)| r[a] * yi).sum()).collect();
    let inv = invert(&xtx)?;
    let beta: Vec<f64> = (0..k).map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    let s2 = rss / (n - k) as f64;
    Some((beta, s2 * inv[k - 1][k - 1]))
}

/// Per-class regression of y on (1, covariates, w), combined with λ_j.
pub fn regression_oracle(units: &[LinkedUnit], classes: usize) -> Option<(f64, f64)> {
    let n = units.len() as f64;
    let (mut tau, mut var) = (0.0, 0.0);
    for j in 0..classes {
        let members: Vec<&LinkedUnit> = units.iter().filter(|u| u.subclass == j).collect();
        if members.is_empty() {
            continue;
        }
        let x: Vec<Vec<f64>> = members
            .iter()
            .map(|u| {
                let mut r = vec![1.0];
                r.extend(&u.covariates);
                r.push(if u.treated { 1.0 } else { 0.0 });
                r
            })
            .collect();
        let y: Vec<f64> = members.iter().map(|u| u.outcome).collect();
        let (beta, v) = ols_oracle(&x, &y)?;
        let lam = members.len() as f64 / n;
        tau += lam * beta[beta.len() - 1];
        var += lam * lam * v;
    }
    Some((tau, var))
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn design_row(x: &[f64]) -> Vec<f64> {
    let mut r = vec![1.0];
    r.extend(x);
    r
}

/// Score vector of the logistic log-likelihood (intercept first).
pub fn logistic_gradient(x: &[Vec<f64>], w: &[bool], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &t) in x.iter().zip(w) {
        let z = design_row(row);
        let p = logistic(z.iter().zip(beta).map(|(a, b)| a * b).sum());
        let r = if t { 1.0 } else { 0.0 } - p;
        for (gi, zi) in g.iter_mut().zip(&z) {
            *gi += r * zi;
        }
    }
    g
}

/// Plain Newton-Raphson for logistic regression from zero.
pub fn newton_logistic(x: &[Vec<f64>], w: &[bool]) -> Vec<f64> {
    let k = x[0].len() + 1;
    let mut beta = vec![0.0; k];
    for _ in 0..200 {
        let g = logistic_gradient(x, w, &beta);
        let mut h = vec![vec![0.0; k]; k];
        for row in x {
            let z = design_row(row);
            let p = logistic(z.iter().zip(&beta).map(|(a, b)| a * b).sum());
            for a in 0..k {
                for b in 0..k {
                    h[a][b] += p * (1.0 - p) * z[a] * z[b];
                }
            }
        }
        let inv = invert(&h).expect("non-singular information matrix");
        let step: Vec<f64> = (0..k).map(|a| (0..k).map(|b| inv[a][b] * g[b]).sum()).collect();
        for (bi, s) in beta.iter_mut().zip(&step) {
            *bi += s;
        }
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    beta
}

/// Unrestricted Damerau-Levenshtein distance (Lowrance-Wagner). Unlike
/// optimal string alignment it is a metric, so it never exceeds the number
/// of edit operations that produced one string from the other.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let inf = n + m;
    let mut last_row: std::collections::HashMap<char, usize> = std::collections::HashMap::new();
    let mut d = vec![vec![0usize; m + 2]; n + 2];
    d[0][0] = inf;
    for i in 0..=n {
        d[i + 1][0] = inf;
        d[i + 1][1] = i;
    }
    for j in 0..=m {
        d[0][j + 1] = inf;
        d[1][j + 1] = j;
    }
    for i in 1..=n {
        let mut last_col = 0;
        for j in 1..=m {
            let i1 = *last_row.get(&b[j - 1]).unwrap_or(&0);
            let j1 = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            d[i + 1][j + 1] = (d[i][j] + cost)
                .min(d[i + 1][j] + 1)
                .min(d[i][j + 1] + 1)
                .min(d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1));
        }
        last_row.insert(a[i - 1], i);
    }
    d[n + 1][m + 1]
}

/// Random linked units with `p` covariates and every (class, arm) cell
/// holding at least `min_cell` units.
pub fn random_units(rng: &mut ChaCha8Rng, n: usize, classes: usize, p: usize, min_cell: usize) -> Vec<LinkedUnit> {
    let noise = Normal::new(0.0, 3.0).unwrap();
    let cells = classes * 2;
    assert!(n >= cells * min_cell);
    (0..n)
        .map(|i| {
            let (class, treated) = if i < cells * min_cell {
                ((i / 2) % classes, i % 2 == 1)
            } else {
                (rng.random_range(0..classes), rng.random_bool(0.5))
            };
            let covariates: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let outcome = 10.0 * class as f64
                + if treated { 4.0 } else { 0.0 }
                + covariates.iter().sum::<f64>()
                + noise.sample(rng);
            LinkedUnit {
                a_id: i as u64 + 1,
                b_id: i as u64 + 1,
                covariates,
                treated,
                outcome,
                subclass: class,
            }
        })
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// A ladder of made-up estimates; h = 0 is always eligible and roughly one
/// point in five is not.
pub fn random_ladder(rng: &mut ChaCha8Rng, len: usize) -> Vec<LadderPoint> {
    (0..len)
        .map(|h| {
            let eligible = h == 0 || rng.random_bool(0.8);
            let tau = rng.random_range(40.0..60.0);
            // Coarse variances so that ties occur.
            let var = (rng.random_range(1..40) as f64) / 10.0;
            LadderPoint {
                h,
                n_links: 100 + h,
                threshold: Some(20.0 - h as f64 * 0.1),
                tau_hat: eligible.then_some(tau),
                var_hat: eligible.then_some(var),
                marginal_tau: Some(tau - 15.0),
                marginal_var: eligible.then_some(var * 1.5),
            }
        })
        .collect()
}
