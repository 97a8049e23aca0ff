//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use diffnet::sgmcp::{Coefficients, DatasetBlock, JointDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ChaCha = ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// Logistic data with Gaussian features; `signal` scales the true coefficients.
/// Both classes are always present.
pub fn random_design<R: Rng>(rng: &mut R, n: usize, d: usize, l: usize, m: usize, signal: f64) -> JointDesign {
    let blocks = (0..m)
        .map(|_| loop {
            let x = normal_matrix(rng, n, d);
            let q = normal_matrix(rng, n, l);
            let b = DVector::from_fn(d, |_, _| signal * normal(rng));
            let e = DVector::from_fn(l, |_, _| signal * normal(rng));
            let lp = &x * &b + &q * &e;
            let z = lp.map(|v| if rng.random::<f64>() < 1.0 / (1.0 + (-v).exp()) { 1.0 } else { 0.0 });
            let cases = z.sum() as usize;
            if cases >= 2 && cases + 2 <= n {
                break DatasetBlock::new(x, q, z);
            }
        })
        .collect();
    JointDesign::new(blocks).unwrap()
}

fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Unpenalized logistic regression per dataset by damped Newton with a
/// backtracking line search on the full `[1, Q, X]` design.
/// Returns `None` if the gradient does not vanish (e.g. separable data).
pub fn newton_oracle(design: &JointDesign) -> Option<Coefficients> {
    let mut coef = Coefficients::zeros(design);
    for (m, block) in design.datasets.iter().enumerate() {
        let n = block.n();
        let (l, d) = (block.confounders.ncols(), block.features.ncols());
        let k = 1 + l + d;
        let mut a = DMatrix::from_element(n, k, 1.0);
        a.columns_mut(1, l).copy_from(&block.confounders);
        a.columns_mut(1 + l, d).copy_from(&block.features);
        let z = &block.labels;
        let loss = |w: &DVector<f64>| -> f64 {
            let eta = &a * w;
            eta.iter().zip(z.iter()).map(|(&e, &y)| log1pexp(e) - y * e).sum::<f64>()
        };
        let mut w = DVector::zeros(k);
        let mut done = false;
        for _ in 0..200 {
            let eta = &a * &w;
            let p = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
            let g = a.tr_mul(&(&p - z));
            if g.amax() < 1e-11 {
                done = true;
                break;
            }
            let wts = p.map(|v| v * (1.0 - v));
            let h = a.tr_mul(&DMatrix::from_fn(n, k, |r, c| wts[r] * a[(r, c)]));
            let step = h.cholesky()?.solve(&g);
            let base = loss(&w);
            let mut t = 1.0;
            while loss(&(&w - &step * t)) > base - 1e-4 * t * g.dot(&step) && t > 1e-12 {
                t *= 0.5;
            }
            w -= &step * t;
        }
        if !done {
            return None;
        }
        coef.intercept[m] = w[0];
        coef.eta[m] = w.rows(1, l).into_owned();
        coef.beta.set_column(m, &w.rows(1 + l, d));
    }
    Some(coef)
}

/// `lambda * int_0^|t| max(0, 1 - x / (gamma lambda)) dx` by composite Simpson
/// on the two smooth pieces.
pub fn mcp_quadrature(t: f64, lambda: f64, gamma: f64) -> f64 {
    let f = |x: f64| lambda * (1.0 - x / (gamma * lambda)).max(0.0);
    let simpson = |a: f64, b: f64| {
        let n = 64;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let t = t.abs();
    let kink = gamma * lambda;
    if t <= kink {
        simpson(0.0, t)
    } else {
        simpson(0.0, kink) + simpson(kink, t)
    }
}

/// One CLIME column `argmin |w|_1 s.t. |S w - e_j|_inf <= lambda` with a
/// general-purpose LP solver.
pub fn clime_column_lp(sigma: &DMatrix<f64>, j: usize, lambda: f64) -> Vec<f64> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let p = sigma.nrows();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..p {
        let row: Vec<_> = (0..p)
            .flat_map(|k| [(pos[k], sigma[(i, k)]), (neg[k], -sigma[(i, k)])])
            .collect();
        let e = if i == j { 1.0 } else { 0.0 };
        lp.add_constraint(row.as_slice(), ComparisonOp::Le, e + lambda);
        lp.add_constraint(row.as_slice(), ComparisonOp::Ge, e - lambda);
    }
    let sol = lp.solve().expect("reference LP solvable");
    (0..p).map(|k| sol[pos[k]] - sol[neg[k]]).collect()
}

/// Random SPD matrix with a controlled condition number.
pub fn random_spd<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, p, p);
    a.transpose() * a / p as f64 + DMatrix::identity(p, p) * 0.2
}

/// `(tp, fp, tn, fn)` by walking every upper-triangular pair.
pub fn exhaustive_counts(
    truth: &std::collections::BTreeSet<(usize, usize)>,
    estimate: &std::collections::BTreeSet<(usize, usize)>,
    p: usize,
) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for i in 0..p {
        for j in i + 1..p {
            match (truth.contains(&(i, j)), estimate.contains(&(i, j))) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    (tp, fp, tn, fn_)
}
