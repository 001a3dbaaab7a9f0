use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::model::{Affine, AidModel, ForwardCache, ForwardOutput};
use crate::error::{AidError, Result};
use crate::numeric::{log_softmax_in_place, softmax_in_place};

const NORMALIZATION_TOL: f64 = 1e-6;

/// KL divergence from `p` to the uniform distribution over its support size.
///
/// Equals `ln C - H(p)`; zero entries contribute nothing.
pub fn kl_to_uniform(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(AidError::Empty("probability vector"));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(AidError::NonFinite("probability vector"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(AidError::NotNormalized { sum });
    }
    let c = p.len() as f64;
    let kl: f64 = p.iter().filter(|&&pi| pi > 0.0).map(|&pi| pi * (pi * c).ln()).sum();
    Ok(kl.max(0.0))
}

/// Components of the training objective for one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `accent_ce + lambda * kl_term`.
    pub total: f64,
    pub accent_ce: f64,
    /// Mean KL of the speaker posterior to uniform, before scaling by lambda.
    pub kl_term: f64,
    /// Speaker cross-entropy; reported, not part of `total`.
    pub speaker_ce: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.accent_ce.is_finite() && self.kl_term.is_finite() && self.speaker_ce.is_finite()
    }

    /// Element-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            total: sum(|l| l.total),
            accent_ce: sum(|l| l.accent_ce),
            kl_term: sum(|l| l.kl_term),
            speaker_ce: sum(|l| l.speaker_ce),
        }
    }
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(AidError::DimensionMismatch {
            expected: rows,
            got: labels.len(),
        });
    }
    if let Some(&id) = labels.iter().find(|&&id| id >= classes) {
        return Err(AidError::LabelOutOfRange { id, classes });
    }
    Ok(())
}

fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let mut lp = row.to_vec();
        log_softmax_in_place(&mut lp);
        total -= lp[y];
    }
    total / labels.len() as f64
}

fn mean_kl_to_uniform(logits: &Array2<f64>) -> f64 {
    let c = logits.ncols() as f64;
    let mut total = 0.0;
    for row in logits.rows() {
        let mut lp = row.to_vec();
        log_softmax_in_place(&mut lp);
        // sum p (log p + log C)
        total += lp.iter().map(|&l| l.exp() * (l + c.ln())).sum::<f64>();
    }
    (total / logits.nrows() as f64).max(0.0)
}

/// Objective on one batch. `speaker_labels` only feeds the diagnostic speaker CE.
pub fn loss(
    output: &ForwardOutput,
    accent_labels: &[usize],
    speaker_labels: Option<&[usize]>,
    lambda: f64,
) -> Result<LossBreakdown> {
    let rows = output.accent_logits.nrows();
    check_labels(accent_labels, rows, output.accent_logits.ncols())?;
    let accent_ce = mean_cross_entropy(&output.accent_logits, accent_labels);
    let kl_term = mean_kl_to_uniform(&output.speaker_logits);
    let speaker_ce = match speaker_labels {
        Some(s) => {
            check_labels(s, rows, output.speaker_logits.ncols())?;
            mean_cross_entropy(&output.speaker_logits, s)
        }
        None => 0.0,
    };
    Ok(LossBreakdown {
        total: accent_ce + lambda * kl_term,
        accent_ce,
        kl_term,
        speaker_ce,
    })
}

/// Gradient of a trunk layer's affine map and batch-norm affine.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub affine: Affine,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Gradient of the total loss with respect to trunk and accent head.
#[derive(Debug, Clone, PartialEq)]
pub struct MainGrads {
    pub layers: Vec<LayerGrad>,
    pub accent_head: Affine,
}

impl MainGrads {
    /// Same order as [`AidModel::main_params_mut`].
    pub fn slices(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, g) in self.layers.iter().enumerate() {
            out.push((
                format!("trunk{i}.weight"),
                g.affine.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("trunk{i}.bias"),
                g.affine.bias.as_slice().expect("standard layout"),
            ));
            out.push((format!("trunk{i}.gamma"), g.gamma.as_slice().expect("standard layout")));
            out.push((format!("trunk{i}.beta"), g.beta.as_slice().expect("standard layout")));
        }
        out.push((
            "accent_head.weight".into(),
            self.accent_head.weight.as_slice().expect("standard layout"),
        ));
        out.push((
            "accent_head.bias".into(),
            self.accent_head.bias.as_slice().expect("standard layout"),
        ));
        out
    }
}

/// Gradient of the speaker cross-entropy with respect to the speaker head.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerHeadGrads {
    pub head: Affine,
}

impl SpeakerHeadGrads {
    /// Same order as [`AidModel::speaker_params_mut`].
    pub fn slices(&self) -> Vec<(String, &[f64])> {
        vec![
            (
                "speaker_head.weight".into(),
                self.head.weight.as_slice().expect("standard layout"),
            ),
            (
                "speaker_head.bias".into(),
                self.head.bias.as_slice().expect("standard layout"),
            ),
        ]
    }
}

fn affine_grad(input: &Array2<f64>, upstream: &Array2<f64>) -> Affine {
    Affine {
        weight: input.t().dot(upstream),
        bias: upstream.sum_axis(Axis(0)),
    }
}

/// Two detached gradient flows from one train-mode forward pass.
///
/// * main: d(accent_ce + lambda * KL)/d(trunk, accent head). The KL gradient
///   reaches the trunk through the speaker head, whose weights are constants here.
/// * speaker head: d(speaker_ce)/d(speaker head) with the trunk output held fixed.
pub fn backward(
    model: &AidModel,
    cache: &ForwardCache,
    accent_labels: &[usize],
    speaker_labels: &[usize],
    lambda: f64,
) -> Result<(MainGrads, SpeakerHeadGrads)> {
    if cache.version != model.version() {
        return Err(AidError::StaleForward {
            cached: cache.version,
            current: model.version(),
        });
    }
    let out = &cache.output;
    let b = out.accent_logits.nrows();
    check_labels(accent_labels, b, out.accent_logits.ncols())?;
    check_labels(speaker_labels, b, out.speaker_logits.ncols())?;
    let bf = b as f64;

    // d accent_ce / d accent logits = (softmax - onehot) / B
    let mut d_accent = out.accent_logits.clone();
    for (mut row, &y) in d_accent.rows_mut().into_iter().zip(accent_labels) {
        let r = row.as_slice_mut().expect("standard layout");
        softmax_in_place(r);
        r[y] -= 1.0;
        r.iter_mut().for_each(|v| *v /= bf);
    }

    // d KL / d speaker logits = p (log p + H(p)) / B, scaled by lambda
    let mut d_kl = out.speaker_logits.clone();
    let mut d_speaker = out.speaker_logits.clone();
    for ((mut kl_row, mut ce_row), &y) in d_kl
        .rows_mut()
        .into_iter()
        .zip(d_speaker.rows_mut())
        .zip(speaker_labels)
    {
        let r = kl_row.as_slice_mut().expect("standard layout");
        log_softmax_in_place(r);
        let neg_entropy: f64 = r.iter().map(|&l| l.exp() * l).sum();
        for l in r.iter_mut() {
            *l = lambda * l.exp() * (*l - neg_entropy) / bf;
        }
        let c = ce_row.as_slice_mut().expect("standard layout");
        softmax_in_place(c);
        c[y] -= 1.0;
        c.iter_mut().for_each(|v| *v /= bf);
    }

    let z = &out.trunk_embedding;
    let accent_head = affine_grad(z, &d_accent);
    let speaker = SpeakerHeadGrads {
        head: affine_grad(z, &d_speaker),
    };

    let mut upstream = d_accent.dot(&model.accent_head.weight.t()) + d_kl.dot(&model.speaker_head.weight.t());
    let mut layers = Vec::with_capacity(model.layers.len());
    for ((layer, bn), lc) in model.layers.iter().zip(&model.norms).zip(&cache.layers).rev() {
        // ReLU
        let d_norm = ndarray::Zip::from(&upstream)
            .and(&lc.normalized)
            .map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 });
        let gamma = (&d_norm * &lc.xhat).sum_axis(Axis(0));
        let beta = d_norm.sum_axis(Axis(0));
        // Batch norm with batch statistics.
        let d_xhat = &d_norm * &bn.gamma;
        let sum_d = d_xhat.sum_axis(Axis(0));
        let sum_dx = (&d_xhat * &lc.xhat).sum_axis(Axis(0));
        let d_h = (&d_xhat * bf - &sum_d - &lc.xhat * &sum_dx) * &lc.inv_std / bf;
        let affine = affine_grad(&lc.input, &d_h);
        upstream = d_h.dot(&layer.weight.t());
        layers.push(LayerGrad { affine, gamma, beta });
    }
    layers.reverse();
    Ok((MainGrads { layers, accent_head }, speaker))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_to_uniform(&[0.25; 4]).unwrap(), 0.0);
        assert!((kl_to_uniform(&[1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let mut one_hot = vec![0.0; 13];
        one_hot[4] = 1.0;
        assert!((kl_to_uniform(&one_hot).unwrap() - 2.564_949_357_461_536_7).abs() < 1e-12);
        assert!(matches!(
            kl_to_uniform(&[0.5, 0.6]),
            Err(AidError::NotNormalized { .. })
        ));
    }

    fn outputs(accent: Array2<f64>, speaker: Array2<f64>) -> ForwardOutput {
        ForwardOutput {
            trunk_embedding: Array2::zeros((accent.nrows(), 1)),
            accent_logits: accent,
            speaker_logits: speaker,
        }
    }

    #[test]
    fn perfect_accent_and_uniform_speaker_vanish() {
        let out = outputs(
            array![[60.0, 0.0], [0.0, 60.0]],
            array![[1.0, 1.0, 1.0], [-2.0, -2.0, -2.0]],
        );
        let l = loss(&out, &[0, 1], Some(&[0, 2]), 0.1).unwrap();
        assert!(l.total < 1e-20);
        assert_eq!(l.kl_term, 0.0);
    }

    #[test]
    fn lambda_zero_is_accent_ce() {
        let out = outputs(array![[0.3, -0.2], [1.0, 0.5]], array![[4.0, 0.0], [0.0, 1.0]]);
        let l = loss(&out, &[1, 0], None, 0.0).unwrap();
        assert_eq!(l.total, l.accent_ce);
        assert!(l.kl_term > 0.0);
    }

    #[test]
    fn label_out_of_range() {
        let out = outputs(array![[0.3, -0.2]], array![[4.0, 0.0]]);
        assert!(matches!(
            loss(&out, &[2], None, 0.1),
            Err(AidError::LabelOutOfRange { .. })
        ));
    }
}
