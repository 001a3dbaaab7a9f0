use std::cmp::Ordering;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::VcConfig;
use crate::corpus::Corpus;
use crate::error::{AidError, Result};
use crate::types::FrameSequence;

/// Frame matching metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// `1 - cos(a, b)`; a zero-norm frame is at distance 1 from everything.
    #[default]
    Cosine,
    /// Squared euclidean distance.
    Euclidean,
}

impl Distance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Distance::Cosine => "cosine",
            Distance::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cosine" => Some(Distance::Cosine),
            "euclidean" => Some(Distance::Euclidean),
            _ => None,
        }
    }
}

/// Sequential L2 norm; shared by the matcher and its cached pool norms.
pub fn frame_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distance between two frames given their precomputed norms.
///
/// Cosine uses `1 - dot / (|a| |b|)` with the dot product summed left to
/// right; euclidean ignores the norms.
pub fn frame_distance(distance: Distance, a: &[f64], a_norm: f64, b: &[f64], b_norm: f64) -> f64 {
    match distance {
        Distance::Cosine => {
            if a_norm == 0.0 || b_norm == 0.0 {
                return 1.0;
            }
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            1.0 - dot / (a_norm * b_norm)
        }
        Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

/// A target speaker's frame pool.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingSet {
    pub speaker: String,
    pool: Array2<f64>,
    norms: Vec<f64>,
}

impl MatchingSet {
    pub fn new(speaker: impl Into<String>, pool: Array2<f64>) -> Result<Self> {
        if pool.nrows() == 0 || pool.ncols() == 0 {
            return Err(AidError::Empty("matching pool"));
        }
        if pool.iter().any(|v| !v.is_finite()) {
            return Err(AidError::NonFinite("matching pool"));
        }
        let pool = pool.as_standard_layout().into_owned();
        let norms = pool
            .rows()
            .into_iter()
            .map(|r| frame_norm(r.as_slice().expect("standard layout")))
            .collect();
        Ok(MatchingSet {
            speaker: speaker.into(),
            pool,
            norms,
        })
    }

    pub fn pool(&self) -> &Array2<f64> {
        &self.pool
    }

    pub fn len(&self) -> usize {
        self.pool.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.pool.ncols()
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.pool.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }
}

/// Concatenate all of `speaker`'s frames in (utterance id, frame index) order.
pub fn build_matching_set(corpus: &Corpus, speaker: &str) -> Result<MatchingSet> {
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    let mut seen = false;
    let mut dim = 0;
    for u in corpus.by_speaker(speaker) {
        seen = true;
        if let Some(f) = &u.frames {
            rows.extend_from_slice(f.as_slice());
            n += f.len();
            dim = f.dim();
        }
    }
    if !seen {
        return Err(AidError::UnknownSpeaker(speaker.to_owned()));
    }
    if n == 0 {
        return Err(AidError::NoFrames(speaker.to_owned()));
    }
    let pool = Array2::from_shape_vec((n, dim), rows).expect("rows share one dimension");
    MatchingSet::new(speaker, pool)
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Replace each source frame by the mean of its `k` nearest pool rows.
///
/// Neighbors are ranked by (distance, pool row index), so ties go to the
/// lowest index, and summed in that rank order before dividing by `k`.
pub fn knn_convert(source: &FrameSequence, target: &MatchingSet, cfg: &VcConfig) -> Result<FrameSequence> {
    let k = cfg.k;
    if k == 0 {
        return Err(AidError::Config("k must be at least 1".into()));
    }
    if source.dim() != target.dim() {
        return Err(AidError::DimensionMismatch {
            expected: target.dim(),
            got: source.dim(),
        });
    }
    if target.len() < k {
        return Err(AidError::PoolTooSmall { pool: target.len(), k });
    }
    let d = source.dim();
    let mut out = Array2::zeros((source.len(), d));
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(target.len());
    for (t, mut out_row) in out.rows_mut().into_iter().enumerate() {
        let q = source.row(t);
        let qn = frame_norm(q);
        scored.clear();
        scored.extend(
            (0..target.len()).map(|i| (frame_distance(cfg.distance, q, qn, target.row(i), target.norms[i]), i)),
        );
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_distance_then_index);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_distance_then_index);
        for &(_, i) in &scored {
            for (o, v) in out_row.iter_mut().zip(target.row(i)) {
                *o += v;
            }
        }
        out_row.mapv_inplace(|v| v / k as f64);
    }
    FrameSequence::new(out)
}
