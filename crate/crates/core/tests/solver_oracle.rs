use credit_response::solver::{lasso, ridge, CdOptions, Gram, SparseRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Problem {
    fn random(rng: &mut ChaCha8Rng, n: usize, p: usize, intercept: bool) -> Self {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|j| if intercept && j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) })
                    .collect()
            })
            .collect();
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = x
            .iter()
            .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-1.0..1.0))
            .collect();
        Problem { x, y }
    }

    fn gram(&self) -> Gram {
        let rows: Vec<SparseRow> = self
            .x
            .iter()
            .map(|r| {
                let mut s = SparseRow::default();
                for (j, &v) in r.iter().enumerate() {
                    s.push(j, v);
                }
                s
            })
            .collect();
        Gram::from_rows(&rows, &self.y, self.x[0].len()).unwrap()
    }

    /// Gradient of `(1/n)||y - Xw||^2`, straight from the rows.
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        let mut g = vec![0.0; w.len()];
        for (row, &t) in self.x.iter().zip(&self.y) {
            let r = t - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj -= 2.0 * xj * r / n;
            }
        }
        g
    }

    fn objective_l1(&self, w: &[f64], lambda: f64) -> f64 {
        let n = self.y.len() as f64;
        let sse: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(row, t)| (t - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).powi(2))
            .sum();
        sse / n + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    }
}

#[test]
fn ridge_satisfies_regularized_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let n = rng.random_range(20..80);
        let p = rng.random_range(2..8);
        let prob = Problem::random(&mut rng, n, p, true);
        let lambda = 10f64.powf(rng.random_range(-3.0..2.0));
        let penalized: Vec<bool> = (0..p).map(|j| j != 0).collect();
        let w = ridge(&prob.gram(), lambda, &penalized).unwrap();
        // d/dw of the objective: grad + 2 lambda D w = 0
        let g = prob.gradient(&w);
        for j in 0..p {
            let pen = if penalized[j] { 2.0 * lambda * w[j] } else { 0.0 };
            assert!((g[j] + pen).abs() < 1e-8, "trial {trial} coord {j}: {}", g[j] + pen);
        }
    }
}

#[test]
fn lasso_satisfies_subgradient_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..50 {
        let n = rng.random_range(30..100);
        let p = rng.random_range(2..10);
        let prob = Problem::random(&mut rng, n, p, true);
        let lambda = rng.random_range(0.05..3.0);
        let penalized: Vec<bool> = (0..p).map(|j| j != 0).collect();
        let fit = lasso(&prob.gram(), lambda, &penalized, CdOptions::default());
        assert!(fit.converged, "trial {trial}");
        let g = prob.gradient(&fit.w);
        for j in 0..p {
            if !penalized[j] {
                assert!(g[j].abs() < 1e-6, "trial {trial} intercept grad {}", g[j]);
            } else if fit.w[j] == 0.0 {
                assert!(g[j].abs() <= lambda + 1e-6, "trial {trial} coord {j}");
            } else {
                assert!((g[j] + lambda * fit.w[j].signum()).abs() < 1e-6, "trial {trial} coord {j}");
            }
        }
    }
}

/// Exact lasso for two penalized coefficients: try every sign pattern,
/// solve the stationarity equations on its support and keep the
/// consistent candidate with the lowest objective.
fn enumerate_two(prob: &Problem, lambda: f64) -> [f64; 2] {
    let gram = prob.gram();
    let (g, c) = (|i, j| gram.at(i, j), &gram.c);
    let mut best = ([0.0, 0.0], prob.objective_l1(&[0.0, 0.0], lambda));
    for s0 in [-1.0, 0.0, 1.0] {
        for s1 in [-1.0, 0.0, 1.0] {
            // G_AA w_A = c_A - (lambda / 2) s_A
            let r0 = c[0] - lambda / 2.0 * s0;
            let r1 = c[1] - lambda / 2.0 * s1;
            let w = match (s0 != 0.0, s1 != 0.0) {
                (false, false) => continue,
                (true, false) => [r0 / g(0, 0), 0.0],
                (false, true) => [0.0, r1 / g(1, 1)],
                (true, true) => {
                    let det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
                    [(r0 * g(1, 1) - g(0, 1) * r1) / det, (g(0, 0) * r1 - g(1, 0) * r0) / det]
                }
            };
            let consistent = [(w[0], s0), (w[1], s1)]
                .iter()
                .all(|&(v, s)| s == 0.0 || v.signum() == s);
            if consistent {
                let obj = prob.objective_l1(&w, lambda);
                if obj < best.1 {
                    best = (w, obj);
                }
            }
        }
    }
    best.0
}

#[test]
fn lasso_matches_enumeration_on_two_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let n = rng.random_range(5..40);
        let prob = Problem::random(&mut rng, n, 2, false);
        let lambda = rng.random_range(0.01..6.0);
        let fit = lasso(&prob.gram(), lambda, &[true, true], CdOptions::default());
        let exact = enumerate_two(&prob, lambda);
        for j in 0..2 {
            assert!(
                (fit.w[j] - exact[j]).abs() < 1e-6,
                "trial {trial}: cd {:?} vs exact {exact:?}",
                fit.w
            );
        }
    }
}

#[test]
fn lasso_with_huge_penalty_keeps_only_intercept() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let prob = Problem::random(&mut rng, 60, 4, true);
    let fit = lasso(&prob.gram(), 1e6, &[false, true, true, true], CdOptions::default());
    let mean = prob.y.iter().sum::<f64>() / prob.y.len() as f64;
    assert_eq!(&fit.w[1..], &[0.0, 0.0, 0.0]);
    assert!((fit.w[0] - mean).abs() < 1e-9);
}
