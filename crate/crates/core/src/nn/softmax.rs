use crate::error::{Error, Result};

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(v);
    v.iter().map(|x| x - z).collect()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    log_softmax(v).into_iter().map(f64::exp).collect()
}

/// Mean cross-entropy over `K` frames and its gradient with respect to
/// the logits: `loss = -(1/K) Σ ln p_target`, `grad_k = (p_k - onehot) / K`.
pub fn softmax_xent(logits: &[Vec<f64>], targets: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != targets.len() {
        return Err(Error::data(format!(
            "{} frames but {} targets",
            logits.len(),
            targets.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::data("empty sequence"));
    }
    let k = logits.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (t, (y, &target)) in logits.iter().zip(targets).enumerate() {
        if target >= y.len() {
            return Err(Error::data(format!(
                "target {target} at frame {t} outside vocabulary of {}",
                y.len()
            )));
        }
        let lp = log_softmax(y);
        loss -= lp[target];
        let mut g: Vec<f64> = lp.iter().map(|l| l.exp() / k).collect();
        g[target] -= 1.0 / k;
        grads.push(g);
    }
    Ok((loss / k, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_v() {
        let (loss, _) = softmax_xent(&[vec![0.3; 7], vec![-1.0; 7]], &[2, 6]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let (_, g) = softmax_xent(&[vec![1.0, -2.0, 0.5], vec![3.0, 0.0, 0.1]], &[0, 2]).unwrap();
        for row in g {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn target_out_of_range() {
        assert!(matches!(softmax_xent(&[vec![0.0; 3]], &[3]), Err(Error::Data(_))));
    }

    #[test]
    fn lse_handles_large_values() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
    }
}
