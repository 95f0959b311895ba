use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_row, column_scaling, fold_labels, soft_threshold, Conditional, ConditionalModel,
    PenaltyConfig,
};
use crate::error::{Error, Result};

const PROB_CLIP: f64 = 1e-12;

/// Solver settings for the proximal-gradient multinomial fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultinomialConfig {
    pub max_iter: usize,
    /// Stop when the objective changes by less than this between iterations.
    pub tol: f64,
    /// Every class must occur at least this often.
    pub min_level_count: usize,
}

impl Default for MultinomialConfig {
    fn default() -> Self {
        MultinomialConfig {
            max_iter: 500,
            tol: 1e-6,
            min_level_count: 5,
        }
    }
}

/// Symmetric (one coefficient row per class) multinomial logit.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialFit {
    pub class_labels: Vec<u32>,
    pub intercepts: Vec<f64>,
    /// classes x features
    pub coef: DMatrix<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

impl MultinomialFit {
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.intercepts.len())
            .map(|k| {
                self.intercepts[k]
                    + row
                        .iter()
                        .enumerate()
                        .map(|(j, x)| self.coef[(k, j)] * x)
                        .sum::<f64>()
            })
            .collect();
        softmax(&scores)
    }
}

impl ConditionalModel for MultinomialFit {
    fn n_features(&self) -> usize {
        self.coef.ncols()
    }

    fn conditional(&self, row: &[f64]) -> Result<Conditional> {
        check_row(self.coef.ncols(), row)?;
        Ok(Conditional::Categorical {
            probs: self.probabilities(row),
        })
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Standardized design over a row subset, plus one-hot responses.
struct Problem {
    xs: DMatrix<f64>,
    active: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y: Vec<u32>,
    yoh: DMatrix<f64>,
    n_classes: usize,
    curvature: f64,
}

impl Problem {
    fn new(x: &DMatrix<f64>, y: &[u32], rows: &[usize], n_classes: usize) -> Problem {
        let (means, sds) = column_scaling(x, rows);
        let active: Vec<usize> = (0..x.ncols()).filter(|&j| sds[j].is_some()).collect();
        let n = rows.len();
        let mut xs = DMatrix::zeros(n, active.len());
        for (a, &j) in active.iter().enumerate() {
            let sd = sds[j].expect("active");
            let col = x.column(j);
            for (r, &i) in rows.iter().enumerate() {
                xs[(r, a)] = (col[i] - means[j]) / sd;
            }
        }
        let yy: Vec<u32> = rows.iter().map(|&i| y[i]).collect();
        let mut yoh = DMatrix::zeros(n, n_classes);
        for (r, &c) in yy.iter().enumerate() {
            yoh[(r, c as usize)] = 1.0;
        }
        let curvature = if active.is_empty() {
            1.0
        } else {
            let gram = xs.tr_mul(&xs) / n as f64;
            SymmetricEigen::new(gram)
                .eigenvalues
                .iter()
                .copied()
                .fold(1.0, f64::max)
        };
        Problem {
            xs,
            active,
            means,
            sds: sds.iter().map(|s| s.unwrap_or(1.0)).collect(),
            y: yy,
            yoh,
            n_classes,
            curvature,
        }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        if self.active.is_empty() {
            return 0.0;
        }
        let n = self.n() as f64;
        let centered = {
            let mut m = self.yoh.clone();
            for k in 0..self.n_classes {
                let mean = m.column(k).sum() / n;
                m.column_mut(k).add_scalar_mut(-mean);
            }
            m
        };
        let g = self.xs.tr_mul(&centered) / n;
        g.amax() / alpha.max(1e-3)
    }

    fn init_intercepts(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(
            self.n_classes,
            (0..self.n_classes).map(|k| (self.yoh.column(k).sum() / n).max(PROB_CLIP).ln()),
        )
    }

    fn scores(&self, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
        let mut z = &self.xs * w;
        for k in 0..self.n_classes {
            z.column_mut(k).add_scalar_mut(b[k]);
        }
        z
    }

    /// Mean negative log-likelihood; fills `probs` with fitted probabilities.
    fn nll(&self, z: &DMatrix<f64>, probs: &mut DMatrix<f64>) -> f64 {
        let k = self.n_classes;
        let mut total = 0.0;
        for i in 0..self.n() {
            let m = (0..k).map(|c| z[(i, c)]).fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for c in 0..k {
                let e = (z[(i, c)] - m).exp();
                probs[(i, c)] = e;
                s += e;
            }
            for c in 0..k {
                probs[(i, c)] /= s;
            }
            total += m + s.ln() - z[(i, self.y[i] as usize)];
        }
        total / self.n() as f64
    }

    fn penalty(w: &DMatrix<f64>, l1: f64, l2: f64) -> f64 {
        l1 * w.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * l2 * w.norm_squared()
    }

    /// FISTA with function-value restart, warm-started from (`w`, `b`).
    fn solve(&self, lambda: f64, alpha: f64, cfg: &MultinomialConfig, w: &mut DMatrix<f64>, b: &mut DVector<f64>) {
        let n = self.n() as f64;
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let step = 1.0 / (0.5 * self.curvature + l2);
        let mut probs = DMatrix::zeros(self.n(), self.n_classes);

        let mut z = self.scores(w, b);
        let mut f = self.nll(&z, &mut probs) + Self::penalty(w, l1, l2);
        let mut w_prev = w.clone();
        let mut b_prev = b.clone();
        let mut z_prev = z.clone();
        let mut t = 1.0f64;

        for _ in 0..cfg.max_iter {
            let mut accepted = false;
            for attempt in 0..2 {
                let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
                let mom = if attempt == 0 { (t - 1.0) / t_next } else { 0.0 };
                let wy = &*w + (&*w - &w_prev) * mom;
                let by = &*b + (&*b - &b_prev) * mom;
                let zy = &z + (&z - &z_prev) * mom;
                self.nll(&zy, &mut probs);
                let resid = &probs - &self.yoh;
                let gw = self.xs.tr_mul(&resid) / n + &wy * l2;
                let gb = DVector::from_iterator(
                    self.n_classes,
                    (0..self.n_classes).map(|k| resid.column(k).sum() / n),
                );
                let mut w_new = &wy - gw * step;
                w_new.apply(|v| *v = soft_threshold(*v, l1 * step));
                let b_new = &by - gb * step;
                let z_new = self.scores(&w_new, &b_new);
                let f_new = self.nll(&z_new, &mut probs) + Self::penalty(&w_new, l1, l2);
                if f_new <= f || attempt == 1 {
                    w_prev = std::mem::replace(w, w_new);
                    b_prev = std::mem::replace(b, b_new);
                    z_prev = std::mem::replace(&mut z, z_new);
                    let change = (f - f_new).abs();
                    f = f_new;
                    t = if attempt == 0 { t_next } else { 1.0 };
                    accepted = change < cfg.tol;
                    break;
                }
                // objective went up: drop momentum and retry from the current point
                t = 1.0;
            }
            if accepted {
                break;
            }
        }
    }

    fn to_fit(&self, q: usize, w: &DMatrix<f64>, b: &DVector<f64>, alpha: f64, lambda: f64) -> MultinomialFit {
        let k = self.n_classes;
        let mut coef = DMatrix::zeros(k, q);
        let mut intercepts: Vec<f64> = b.iter().copied().collect();
        for (a, &j) in self.active.iter().enumerate() {
            for c in 0..k {
                let beta = w[(a, c)] / self.sds[j];
                coef[(c, j)] = beta;
                intercepts[c] -= beta * self.means[j];
            }
        }
        MultinomialFit {
            class_labels: (0..k as u32).collect(),
            intercepts,
            coef,
            alpha,
            lambda,
        }
    }

    fn held_out_deviance(&self, x: &DMatrix<f64>, y: &[u32], rows: &[usize], w: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        let fit = self.to_fit(x.ncols(), w, b, 0.0, 0.0);
        let mut row = vec![0.0; x.ncols()];
        rows.iter()
            .map(|&i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = x[(i, j)];
                }
                let p = fit.probabilities(&row)[y[i] as usize];
                -p.max(PROB_CLIP).ln()
            })
            .sum()
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[u32], n_classes: usize, cfg: &MultinomialConfig) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, labels {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() || n_classes == 0 {
        return Err(Error::TooFewRows("multinomial fit needs data and classes".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        let c = c as usize;
        if c >= n_classes {
            return Err(Error::Dimension(format!("label {c} outside {n_classes} classes")));
        }
        counts[c] += 1;
    }
    if let Some((c, &count)) = counts
        .iter()
        .enumerate()
        .find(|(_, &k)| k < cfg.min_level_count)
    {
        return Err(Error::ClassTooRare {
            class: c.to_string(),
            count,
            min: cfg.min_level_count,
        });
    }
    Ok(())
}

pub fn multinomial_lambda_max(x: &DMatrix<f64>, y: &[u32], n_classes: usize, alpha: f64) -> f64 {
    let rows: Vec<usize> = (0..y.len()).collect();
    Problem::new(x, y, &rows, n_classes).lambda_max(alpha)
}

/// Penalized multinomial logit at a fixed penalty.
pub fn fit_multinomial_enet(
    x: &DMatrix<f64>,
    y: &[u32],
    n_classes: usize,
    alpha: f64,
    lambda: f64,
    cfg: &MultinomialConfig,
) -> Result<MultinomialFit> {
    check_inputs(x, y, n_classes, cfg)?;
    if !(0.0..=1.0).contains(&alpha) || !(lambda >= 0.0) {
        return Err(Error::Config(format!("bad penalty alpha={alpha} lambda={lambda}")));
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    let p = Problem::new(x, y, &rows, n_classes);
    let mut w = DMatrix::zeros(p.active.len(), n_classes);
    let mut b = p.init_intercepts();
    p.solve(lambda, alpha, cfg, &mut w, &mut b);
    Ok(p.to_fit(x.ncols(), &w, &b, alpha, lambda))
}

/// Penalized multinomial logit with lambda chosen by cross-validated deviance.
pub fn fit_multinomial_enet_cv<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &[u32],
    n_classes: usize,
    penalty: &PenaltyConfig,
    cfg: &MultinomialConfig,
    rng: &mut R,
) -> Result<MultinomialFit> {
    check_inputs(x, y, n_classes, cfg)?;
    penalty.validate()?;
    let n = y.len();
    let rows: Vec<usize> = (0..n).collect();
    let full = Problem::new(x, y, &rows, n_classes);
    let lambdas = penalty.grid(full.lambda_max(penalty.alpha));

    let chosen = if full.active.is_empty() {
        0
    } else if lambdas.len() > 1 && n >= 2 * penalty.n_folds {
        let labels = fold_labels(n, penalty.n_folds, rng);
        let mut dev = vec![0.0; lambdas.len()];
        for f in 0..penalty.n_folds {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
            let held: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
            let p = Problem::new(x, y, &train, n_classes);
            let mut w = DMatrix::zeros(p.active.len(), n_classes);
            let mut b = p.init_intercepts();
            for (k, &lam) in lambdas.iter().enumerate() {
                p.solve(lam, penalty.alpha, cfg, &mut w, &mut b);
                dev[k] += p.held_out_deviance(x, y, &held, &w, &b);
            }
        }
        dev.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, &d)| if d < best.1 { (k, d) } else { best })
            .0
    } else {
        lambdas.len() - 1
    };

    let mut w = DMatrix::zeros(full.active.len(), n_classes);
    let mut b = full.init_intercepts();
    if !full.active.is_empty() {
        for &lam in &lambdas[..=chosen] {
            full.solve(lam, penalty.alpha, cfg, &mut w, &mut b);
        }
    }
    Ok(full.to_fit(x.ncols(), &w, &b, penalty.alpha, lambdas[chosen]))
}
