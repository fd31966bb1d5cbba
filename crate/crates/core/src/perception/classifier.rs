//! Nearest-centroid sound category classifier.
//!
//! A clip is embedded as the square root of its frame-averaged mel power,
//! normalized to unit sum, so Euclidean distance between embeddings is the
//! Hellinger distance between spectral shapes and is insensitive to level.
//! Confidences are a softmax over negative centroid distances.
//!
//! Mixtures are analysed separately by a non-negative least-squares fit of
//! the embedding onto the centroids, which ranks every component present
//! rather than only the nearest one.

use super::spectral::{mel_with, stft, MelFilterbank, FRAME, HOP, MEL_BANDS};
use super::PerceptionError;
use crate::acoustics::{Waveform, SAMPLE_RATE};
use crate::soundbank::{SoundBank, Split};
use crate::world::Category;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub category: Category,
    pub confidence: f64,
    /// Every category with its probability, most likely first.
    pub ranking: Vec<(Category, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryClassifier {
    pub bands: usize,
    pub frame: usize,
    pub hop: usize,
    pub labels: Vec<Category>,
    pub centroids: Vec<Vec<f64>>,
    /// Width (in mel bands) of the Gaussian blur applied across bands.
    pub smoothing: f64,
    /// Exponent applied to the unit-sum band powers.
    pub exponent: f64,
    /// Softmax temperature in embedding-distance units.
    pub temperature: f64,
    #[serde(skip)]
    filterbank: Option<MelFilterbank>,
}

impl Default for CategoryClassifier {
    fn default() -> Self {
        Self {
            bands: MEL_BANDS,
            frame: FRAME,
            hop: HOP,
            labels: Vec::new(),
            centroids: Vec::new(),
            smoothing: 2.0,
            exponent: 0.5,
            temperature: 1.0,
            filterbank: None,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Gaussian blur across bands with standard deviation `sigma` (in bands).
fn smooth(v: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return v.to_vec();
    }
    let reach = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    (0..v.len() as isize)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, w) in (-reach..=reach).zip(&kernel) {
                let k = i + j;
                if k >= 0 && (k as usize) < v.len() {
                    acc += w * v[k as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}

impl CategoryClassifier {
    /// Fits one centroid per sounding category from the bank's train clips.
    pub fn fit(bank: &SoundBank) -> Self {
        Self::default().fitted(bank)
    }

    /// Fits centroids using this model's embedding settings.
    pub fn fitted(self, bank: &SoundBank) -> Self {
        let mut model = self;
        model.labels.clear();
        model.centroids.clear();
        model.filterbank = None;
        model.ensure_filterbank();
        for cat in Category::SOUNDING {
            let embeddings: Vec<Vec<f64>> = bank
                .clips_of(cat, Split::Train)
                .filter_map(|c| model.embed(&c.waveform))
                .collect();
            if embeddings.is_empty() {
                continue;
            }
            let mut centroid = vec![0.0; model.bands];
            for e in &embeddings {
                for (c, v) in centroid.iter_mut().zip(e) {
                    *c += v / embeddings.len() as f64;
                }
            }
            model.labels.push(cat);
            model.centroids.push(centroid);
        }
        let mut pair = Vec::new();
        for i in 0..model.centroids.len() {
            for j in i + 1..model.centroids.len() {
                pair.push(distance(&model.centroids[i], &model.centroids[j]));
            }
        }
        pair.sort_by(f64::total_cmp);
        if let Some(min) = pair.first() {
            model.temperature = min / 10.0;
        }
        model
    }

    pub fn is_fitted(&self) -> bool {
        !self.labels.is_empty()
    }

    fn ensure_filterbank(&mut self) {
        if self.filterbank.is_none() {
            self.filterbank = Some(MelFilterbank::new(self.bands, self.frame, SAMPLE_RATE).expect("valid mel config"));
        }
    }

    /// Spectral-shape embedding; `None` for silent or too-short input.
    pub fn embed(&self, w: &Waveform) -> Option<Vec<f64>> {
        let spec = stft(w, self.frame, self.hop).ok()?;
        let mel = match &self.filterbank {
            Some(fb) => mel_with(fb, &spec),
            None => mel_with(&MelFilterbank::new(self.bands, self.frame, SAMPLE_RATE).ok()?, &spec),
        };
        let mean = smooth(&mel.mean(), self.smoothing);
        let total: f64 = mean.iter().sum();
        if !(total > 1e-20) {
            return None;
        }
        Some(mean.iter().map(|e| (e / total).powf(self.exponent)).collect())
    }

    /// `Ok(None)` when the input is silent.
    pub fn classify(&self, w: &Waveform) -> Result<Option<Classification>, PerceptionError> {
        self.classify_excluding(w, None)
    }

    /// Like [`CategoryClassifier::classify`] but with `exclude` removed from
    /// the candidate set.
    pub fn classify_excluding(
        &self,
        w: &Waveform,
        exclude: Option<Category>,
    ) -> Result<Option<Classification>, PerceptionError> {
        if !self.is_fitted() {
            return Err(PerceptionError::Unfitted);
        }
        let Some(e) = self.embed(w) else { return Ok(None) };
        let dists: Vec<(Category, f64)> = self
            .labels
            .iter()
            .zip(&self.centroids)
            .filter(|(c, _)| Some(**c) != exclude)
            .map(|(c, m)| (*c, distance(&e, m)))
            .collect();
        let Some(best) = dists.iter().map(|d| d.1).min_by(f64::total_cmp) else {
            return Ok(None);
        };
        let weights: Vec<f64> = dists.iter().map(|(_, d)| (-(d - best) / self.temperature).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut ranking: Vec<(Category, f64)> = dists.iter().zip(&weights).map(|((c, _), w)| (*c, w / z)).collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(Some(Classification {
            category: ranking[0].0,
            confidence: ranking[0].1,
            ranking,
        }))
    }

    /// Non-negative weights `w` minimizing `|embed(w) - sum w_c centroid_c|`,
    /// normalized to sum to one and sorted largest first. `Ok(None)` when silent.
    pub fn decompose(&self, w: &Waveform) -> Result<Option<Vec<(Category, f64)>>, PerceptionError> {
        if !self.is_fitted() {
            return Err(PerceptionError::Unfitted);
        }
        let Some(e) = self.embed(w) else { return Ok(None) };
        let weights = nnls(&self.centroids, &e);
        let total: f64 = weights.iter().sum();
        let mut out: Vec<(Category, f64)> = self
            .labels
            .iter()
            .zip(&weights)
            .map(|(c, w)| (*c, if total > 0.0 { w / total } else { 0.0 }))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(Some(out))
    }

    pub fn save(&self, path: &Path) -> Result<(), PerceptionError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        let mut m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.ensure_filterbank();
        Ok(m)
    }
}

/// Solves the normal equations restricted to `idx` by Gaussian elimination.
fn least_squares(cols: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let n = idx.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut a: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = idx.iter().map(|&j| dot(&cols[i], &cols[j])).collect();
            row.push(dot(&cols[i], y));
            row
        })
        .collect();
    for p in 0..n {
        let piv = (p..n).max_by(|&x, &z| a[x][p].abs().total_cmp(&a[z][p].abs()))?;
        a.swap(p, piv);
        if a[p][p].abs() < 1e-14 {
            return None;
        }
        for r in 0..n {
            if r != p {
                let f = a[r][p] / a[p][p];
                for c in p..=n {
                    a[r][c] -= f * a[p][c];
                }
            }
        }
    }
    Some((0..n).map(|r| a[r][n] / a[r][r]).collect())
}

/// Exact non-negative least squares by enumerating supports; the category
/// count is small enough that this beats an iterative solver on clarity.
fn nnls(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = cols.len();
    assert!(k <= 16, "support enumeration is exponential in the column count");
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let Some(w) = least_squares(cols, y, &idx) else { continue };
        if w.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut full = vec![0.0; k];
        for (&i, v) in idx.iter().zip(&w) {
            full[i] = *v;
        }
        let residual: f64 = (0..y.len())
            .map(|t| {
                let m: f64 = (0..k).map(|i| full[i] * cols[i][t]).sum();
                (y[t] - m).powi(2)
            })
            .sum();
        if residual < best.0 {
            best = (residual, full);
        }
    }
    best.1
}
