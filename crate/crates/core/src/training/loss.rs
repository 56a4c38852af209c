//! Pinball (quantile) loss and the annealed ELBO objective.

use super::train::TrainConfig;
use crate::math::tape::{Tape, TapeId};
use crate::math::Matrix;
use crate::{Error, Result};

/// Asymmetric pinball loss for one (target, estimate, level) triple:
/// `u·(α − 1{u<0})` with `u = y − q`. Always non-negative.
pub fn pinball(y: f64, q: f64, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let u = y - q;
    Ok(if u < 0.0 { u * (alpha - 1.0) } else { u * alpha })
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("pinball level must be in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Mean pinball loss over all `H·K` cells of a quantile matrix against an
/// `H`-vector of targets.
pub fn multi_quantile_loss(q: &Matrix, y: &[f64], levels: &[f64]) -> Result<f64> {
    check_loss_shapes(q.shape(), y.len(), levels)?;
    let mut total = 0.0;
    for h in 0..q.rows() {
        for (k, alpha) in levels.iter().enumerate() {
            total += pinball(y[h], q.get(h, k), *alpha)?;
        }
    }
    Ok(total / (q.rows() * q.cols()) as f64)
}

fn check_loss_shapes(q_shape: (usize, usize), y_len: usize, levels: &[f64]) -> Result<()> {
    let (h, k) = q_shape;
    if y_len != h || levels.len() != k {
        return Err(Error::Shape(format!(
            "quantile matrix {h}×{k} incompatible with {y_len} targets and {} levels",
            levels.len()
        )));
    }
    for &alpha in levels {
        check_level(alpha)?;
    }
    Ok(())
}

/// Differentiable mean pinball loss: `α·(y−q)⁺ + (1−α)·(q−y)⁺` averaged
/// over all cells, built on the tape against constant targets.
pub fn multi_quantile_loss_on_tape(
    tape: &mut Tape,
    q: TapeId,
    y: &[f64],
    levels: &[f64],
) -> Result<TapeId> {
    check_loss_shapes(tape.value(q).shape(), y.len(), levels)?;
    let k = levels.len();
    let y_mat = tape.constant(Matrix::from_fn(y.len(), k, |h, _| y[h]));
    let u = tape.sub(y_mat, q);
    let over = tape.relu(u);
    let neg_u = tape.scale(u, -1.0);
    let under = tape.relu(neg_u);
    let alpha_row = tape.constant(Matrix::from_fn(1, k, |_, j| levels[j]));
    let one_minus_row = tape.constant(Matrix::from_fn(1, k, |_, j| 1.0 - levels[j]));
    let over_term = tape.mul_row(over, alpha_row);
    let under_term = tape.mul_row(under, one_minus_row);
    let cells = tape.add(over_term, under_term);
    Ok(tape.mean_all(cells))
}

/// KL annealing weight: linear ramp 0 → 1 over `anneal_epochs`, then 1.
pub fn kl_weight(epoch: usize, anneal_epochs: usize) -> f64 {
    if anneal_epochs == 0 {
        1.0
    } else {
        (epoch as f64 / anneal_epochs as f64).min(1.0)
    }
}

/// Per-sample negative-ELBO surrogate: `data_loss + β(epoch)·kl/N_train`.
pub fn elbo_objective(
    data_loss: f64,
    kl_total: f64,
    epoch: usize,
    cfg: &TrainConfig,
    n_train: usize,
) -> f64 {
    data_loss + kl_weight(epoch, cfg.elbo_anneal_epochs) * kl_total / n_train as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, stream};
    use rand_distr::Distribution;

    #[test]
    fn pinball_hand_examples() {
        assert!((pinball(100.0, 90.0, 0.9).unwrap() - 9.0).abs() < 1e-12);
        assert!((pinball(90.0, 100.0, 0.9).unwrap() - 1.0).abs() < 1e-12);
        for alpha in [0.05, 0.5, 0.95] {
            assert_eq!(pinball(42.0, 42.0, alpha).unwrap(), 0.0);
        }
    }

    #[test]
    fn pinball_rejects_bad_levels() {
        for alpha in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(pinball(1.0, 2.0, alpha), Err(Error::Config(_))));
        }
    }

    #[test]
    fn multi_quantile_hand_examples() {
        // Perfect forecast.
        let q = Matrix::from_fn(4, 3, |h, _| h as f64);
        let y: Vec<f64> = (0..4).map(|h| h as f64).collect();
        assert_eq!(multi_quantile_loss(&q, &y, &[0.1, 0.5, 0.9]).unwrap(), 0.0);

        // H=1, K=2, levels {0.5, 0.9}, y=10, q=(8, 12) → (1.0 + 0.2)/2.
        let q = Matrix::from_vec(1, 2, vec![8.0, 12.0]);
        let loss = multi_quantile_loss(&q, &[10.0], &[0.5, 0.9]).unwrap();
        assert!((loss - 0.6).abs() < 1e-12, "{loss}");

        // Doubling residuals doubles the loss.
        let q2 = Matrix::from_vec(1, 2, vec![6.0, 14.0]);
        let loss2 = multi_quantile_loss(&q2, &[10.0], &[0.5, 0.9]).unwrap();
        assert!((loss2 - 1.2).abs() < 1e-12, "{loss2}");
    }

    #[test]
    fn multi_quantile_rejects_shape_mismatch() {
        let q = Matrix::zeros(2, 3);
        assert!(matches!(
            multi_quantile_loss(&q, &[1.0], &[0.1, 0.5, 0.9]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            multi_quantile_loss(&q, &[1.0, 2.0], &[0.1, 0.5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tape_loss_matches_plain_and_its_gradients_check_out() {
        let mut rng = derive(11, stream::TRAIN_NOISE, 0);
        let normal = rand_distr::StandardNormal;
        let q_vals = Matrix::from_fn(5, 3, |_, _| normal.sample(&mut rng));
        let y: Vec<f64> = (0..5).map(|_| normal.sample(&mut rng)).collect();
        let levels = [0.1, 0.5, 0.9];

        let mut tape = Tape::new();
        let q = tape.leaf(q_vals.clone());
        let loss = multi_quantile_loss_on_tape(&mut tape, q, &y, &levels).unwrap();
        let plain = multi_quantile_loss(&q_vals, &y, &levels).unwrap();
        assert!((tape.value(loss).item() - plain).abs() < 1e-12);

        // Central differences on a few cells.
        let grads = tape.backward(loss);
        let g = grads.get(q).clone();
        let h = 1e-6;
        for (r, c) in [(0, 0), (2, 1), (4, 2)] {
            let mut plus = q_vals.clone();
            plus.set(r, c, plus.get(r, c) + h);
            let mut minus = q_vals.clone();
            minus.set(r, c, minus.get(r, c) - h);
            let fd = (multi_quantile_loss(&plus, &y, &levels).unwrap()
                - multi_quantile_loss(&minus, &y, &levels).unwrap())
                / (2.0 * h);
            assert!((g.get(r, c) - fd).abs() < 1e-8, "cell ({r},{c})");
        }
    }

    #[test]
    fn elbo_annealing_schedule() {
        let cfg = TrainConfig { elbo_anneal_epochs: 10, ..TrainConfig::paper() };
        assert_eq!(elbo_objective(2.0, 100.0, 0, &cfg, 50), 2.0);
        assert_eq!(elbo_objective(2.0, 100.0, 5, &cfg, 50), 2.0 + 0.5 * 2.0);
        assert_eq!(elbo_objective(2.0, 100.0, 10, &cfg, 50), 4.0);
        assert_eq!(elbo_objective(2.0, 100.0, 37, &cfg, 50), 4.0);
        // β is non-decreasing and reaches exactly 1.
        let mut prev = -1.0;
        for e in 0..20 {
            let b = kl_weight(e, 10);
            assert!(b >= prev);
            prev = b;
        }
        assert_eq!(kl_weight(10, 10), 1.0);
        assert_eq!(kl_weight(19, 10), 1.0);
    }

    #[test]
    fn pinball_minimizer_recovers_gaussian_quantile() {
        // Minimizing mean pinball over draws recovers the α-quantile: for
        // 100,000 N(0,1) samples and α = 0.9 the minimizer must sit within
        // ±0.05 of Φ⁻¹(0.9) = 1.2816.
        let mut rng = derive(0, stream::TRAIN_NOISE, 999);
        let normal = rand_distr::StandardNormal;
        let samples: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let objective = |q: f64| -> f64 {
            samples.iter().map(|&y| pinball(y, q, 0.9).unwrap()).sum::<f64>()
                / samples.len() as f64
        };
        // Golden-section search on the convex empirical objective.
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (-5.0, 5.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (objective(c), objective(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = objective(d);
            }
        }
        let minimizer = 0.5 * (a + b);
        assert!(
            (minimizer - 1.2816).abs() < 0.05,
            "empirical 0.9-quantile minimizer {minimizer}"
        );
    }
}
