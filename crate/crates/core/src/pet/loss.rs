//! Loss functions over full-vocabulary logit rows.

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::label::Label;

/// `log(1 − p)` is clamped at `log(1e-12)` so the wrong-label terms stay finite.
pub const WRONG_LABEL_FLOOR: f64 = 1e-12;

/// Logit rows for the queried positions, each of vocabulary length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitView {
    pub rows: Vec<Vec<f64>>,
}

impl LogitView {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let view = LogitView { rows };
        view.validate()?;
        Ok(view)
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.rows.first().map(Vec::len).unwrap_or(0);
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(ForgeError::validation(format!("logit row {i} has {} entries, expected {width}", row.len())));
            }
            check_row(row)?;
        }
        Ok(())
    }
}

fn check_row(row: &[f64]) -> Result<()> {
    if row.len() < 3 {
        return Err(ForgeError::validation(format!("vocabulary of size {} is smaller than 3", row.len())));
    }
    if let Some(bad) = row.iter().position(|x| !x.is_finite()) {
        return Err(ForgeError::numerical(format!("non-finite logit at vocabulary id {bad}")));
    }
    Ok(())
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(row.iter().copied());
    row.iter().map(|z| (z - lse).exp()).collect()
}

/// `log p[id]` and `log(1 − p[id])` under the full softmax, computed
/// without forming `1 − p` directly.
fn log_p_and_complement(row: &[f64], id: usize) -> (f64, f64) {
    let lse = log_sum_exp(row.iter().copied());
    let others = log_sum_exp(row.iter().enumerate().filter(|(j, _)| *j != id).map(|(_, z)| *z));
    (row[id] - lse, others - lse)
}

/// Gradient of `−log p[id]` w.r.t. the row, accumulated into `grad` with `scale`.
fn add_nll_grad(probs: &[f64], id: usize, scale: f64, grad: &mut [f64]) {
    for (j, p) in probs.iter().enumerate() {
        grad[j] += scale * p;
    }
    grad[id] -= scale;
}

/// Gradient of `−log(1 − p[id])`: `p/(1−p) · (onehot(id) − p)`; zero when clamped.
fn add_unlikelihood_grad(row: &[f64], probs: &[f64], id: usize, scale: f64, grad: &mut [f64]) {
    let (_, log_comp) = log_p_and_complement(row, id);
    if log_comp <= WRONG_LABEL_FLOOR.ln() {
        return;
    }
    let ratio = probs[id] / log_comp.exp();
    for (j, p) in probs.iter().enumerate() {
        grad[j] -= scale * ratio * p;
    }
    grad[id] += scale * ratio;
}

fn unlikelihood(row: &[f64], id: usize) -> f64 {
    let (_, log_comp) = log_p_and_complement(row, id);
    -log_comp.max(WRONG_LABEL_FLOOR.ln())
}

fn check_ids(ids: &[usize], width: usize) -> Result<()> {
    for (k, id) in ids.iter().enumerate() {
        if *id >= width {
            return Err(ForgeError::validation(format!("vocabulary id {id} out of range {width}")));
        }
        if ids[..k].contains(id) {
            return Err(ForgeError::validation(format!("verbalizer id {id} repeated")));
        }
    }
    Ok(())
}

/// `−log p[v_gold] − Σ_{v wrong} log(1 − p[v])` with `p` the full-vocabulary softmax.
///
/// `verbalizer_ids` are in E, N, C order.
pub fn decoupled_label_loss(row: &[f64], verbalizer_ids: [usize; 3], gold: Label) -> Result<f64> {
    decoupled_label_loss_with_grad(row, verbalizer_ids, gold, None)
}

pub(crate) fn decoupled_label_loss_with_grad(
    row: &[f64],
    verbalizer_ids: [usize; 3],
    gold: Label,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    check_row(row)?;
    check_ids(&verbalizer_ids, row.len())?;
    let gold_id = verbalizer_ids[gold.index()];
    let (log_gold, _) = log_p_and_complement(row, gold_id);
    let mut loss = -log_gold;
    for label in Label::ALL.iter().filter(|l| **l != gold) {
        loss += unlikelihood(row, verbalizer_ids[label.index()]);
    }
    if let Some(grad) = grad {
        let probs = softmax(row);
        add_nll_grad(&probs, gold_id, 1.0, grad);
        for label in Label::ALL.iter().filter(|l| **l != gold) {
            add_unlikelihood_grad(row, &probs, verbalizer_ids[label.index()], 1.0, grad);
        }
    }
    if !loss.is_finite() {
        return Err(ForgeError::numerical("decoupled label loss is not finite"));
    }
    Ok(loss)
}

/// Mean over masked positions of `−log p[orig]` when the conditioning label is
/// correct, else `−log(1 − p[orig])`.
pub fn label_conditioned_mlm_loss(view: &LogitView, original_ids: &[usize], condition_correct: bool) -> Result<f64> {
    if view.rows.is_empty() || original_ids.is_empty() {
        return Err(ForgeError::validation("label-conditioned MLM loss needs at least one masked position"));
    }
    if view.rows.len() != original_ids.len() {
        return Err(ForgeError::validation(format!(
            "{} logit rows for {} masked positions",
            view.rows.len(),
            original_ids.len()
        )));
    }
    let mut total = 0.0;
    for (row, id) in view.rows.iter().zip(original_ids) {
        check_row(row)?;
        check_ids(&[*id], row.len())?;
        total += mlm_position_loss(row, *id, condition_correct, None);
    }
    let loss = total / original_ids.len() as f64;
    if !loss.is_finite() {
        return Err(ForgeError::numerical("label-conditioned MLM loss is not finite"));
    }
    Ok(loss)
}

/// Per-position MLM term; adds `scale ·` its gradient to `grad` when given.
pub(crate) fn mlm_position_loss(row: &[f64], id: usize, condition_correct: bool, grad: Option<(&mut [f64], f64)>) -> f64 {
    let loss = if condition_correct {
        -log_p_and_complement(row, id).0
    } else {
        unlikelihood(row, id)
    };
    if let Some((grad, scale)) = grad {
        let probs = softmax(row);
        if condition_correct {
            add_nll_grad(&probs, id, scale, grad);
        } else {
            add_unlikelihood_grad(row, &probs, id, scale, grad);
        }
    }
    loss
}

/// Argmax over the three verbalizer logits; ties resolve E > N > C.
pub fn predict_from_row(row: &[f64], verbalizer_ids: [usize; 3]) -> Label {
    let mut best = Label::Entailment;
    for label in Label::ALL {
        if row[verbalizer_ids[label.index()]] > row[verbalizer_ids[best.index()]] {
            best = label;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDS: [usize; 3] = [0, 1, 2];

    #[test]
    fn uniform_closed_form() {
        let loss = decoupled_label_loss(&[0.0; 4], IDS, Label::Entailment).unwrap();
        assert!((loss - (4f64.ln() + 2.0 * (4.0f64 / 3.0).ln())).abs() < 1e-12);
        assert!((loss - 1.9616).abs() < 1e-4);
    }

    #[test]
    fn confident_gold_goes_to_zero() {
        let loss = decoupled_label_loss(&[60.0, 0.0, 0.0, 0.0], IDS, Label::Entailment).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn brute_force_scalar() {
        // softmax computed independently for logits [2, 1, 0, -1, -2], gold id 1
        let loss = decoupled_label_loss(&[2.0, 1.0, 0.0, -1.0, -2.0], IDS, Label::Neutral).unwrap();
        assert!((loss - 2.55370445015962).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn non_finite_is_numerical_error() {
        let r = decoupled_label_loss(&[f64::NAN, 0.0, 0.0, 0.0], IDS, Label::Entailment);
        assert!(matches!(r, Err(ForgeError::Numerical { .. })));
    }

    #[test]
    fn repeated_verbalizer_rejected() {
        assert!(decoupled_label_loss(&[0.0; 4], [0, 0, 2], Label::Entailment).is_err());
    }

    #[test]
    fn mlm_cases() {
        let view = LogitView::new(vec![vec![0.0; 4]]).unwrap();
        let wrong = label_conditioned_mlm_loss(&view, &[1], false).unwrap();
        assert!((wrong + (0.75f64).ln()).abs() < 1e-12);

        let certain = LogitView::new(vec![vec![0.0, 80.0, 0.0, 0.0]]).unwrap();
        assert!(label_conditioned_mlm_loss(&certain, &[1], true).unwrap() < 1e-30);

        let mixed = LogitView::new(vec![vec![1.0, 0.5, -0.5, 2.0], vec![0.2, 0.1, 3.0, -1.0]]).unwrap();
        let c = label_conditioned_mlm_loss(&mixed, &[3, 0], true).unwrap();
        let w = label_conditioned_mlm_loss(&mixed, &[3, 0], false).unwrap();
        assert!((c - 1.7202787431601978).abs() < 1e-12, "{c}");
        assert!((w - 0.4828263310115879).abs() < 1e-12, "{w}");
    }

    #[test]
    fn mlm_needs_positions() {
        let view = LogitView { rows: vec![] };
        assert!(matches!(label_conditioned_mlm_loss(&view, &[], true), Err(ForgeError::Validation(_))));
    }

    #[test]
    fn wrong_label_clamp_keeps_loss_finite() {
        let view = LogitView::new(vec![vec![0.0, 500.0, 0.0, 0.0]]).unwrap();
        let loss = label_conditioned_mlm_loss(&view, &[1], false).unwrap();
        assert!((loss + WRONG_LABEL_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn predictions_and_ties() {
        assert_eq!(predict_from_row(&[0.0, 1.0, 2.0, 9.0], IDS), Label::Contradiction);
        assert_eq!(predict_from_row(&[5.0, 5.0, 5.0, 0.0], IDS), Label::Entailment);
        assert_eq!(predict_from_row(&[0.0, 5.0, 5.0, 0.0], IDS), Label::Neutral);
    }
}
