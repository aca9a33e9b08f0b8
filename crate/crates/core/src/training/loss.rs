use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

fn check(pred: &Array2<f64>, target: &Array2<f64>) -> Result<()> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite value in loss input".into()));
    }
    Ok(())
}

/// Mean of squared differences over every batch entry and output.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    Ok(mse_loss_and_grad(pred, target, None)?.0)
}

/// Loss and its gradient with respect to `pred`. `weights` scales each
/// output column; `None` means all ones.
pub fn mse_loss_and_grad(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    weights: Option<&[f64]>,
) -> Result<(f64, Array2<f64>)> {
    check(pred, target)?;
    let (b, k) = pred.dim();
    if b * k == 0 {
        return Err(Error::Shape("empty loss input".into()));
    }
    let mut diff = pred - target;
    let mut sq = diff.mapv(|d| d * d);
    if let Some(w) = weights {
        if w.len() != k {
            return Err(Error::Shape(format!("{} loss weights for {k} outputs", w.len())));
        }
        for (mut col, &wj) in sq.axis_iter_mut(Axis(1)).zip(w) {
            col *= wj;
        }
        for (mut col, &wj) in diff.axis_iter_mut(Axis(1)).zip(w) {
            col *= wj;
        }
    }
    let count = (b * k) as f64;
    let loss = sq.sum() / count;
    Ok((loss, diff * (2.0 / count)))
}
