//! Separation of gold positions across layers: mean distance between
//! consecutive positions' representatives, measured in a 2-d PCA projection
//! (or in the ambient space for comparison).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::pca::{pca_fit, pca_project};
use super::AnalysisError;
use crate::tensor_store::EmbeddingArchive;
use crate::Scalar;

/// Mean Euclidean distance between consecutive rows (divisor m − 1).
pub fn adjacent_distance<T: Scalar>(points: ArrayView2<T>) -> Result<T, AnalysisError> {
    let m = points.nrows();
    if m < 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "need at least 2 points, got {m}"
        )));
    }
    let total = points
        .rows()
        .into_iter()
        .zip(points.rows().into_iter().skip(1))
        .map(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum::<T>()
                .sqrt()
        })
        .sum::<T>();
    Ok(total / T::of_usize(m - 1))
}

/// Which embedding stands for a gold position at each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Representative {
    /// The r-th prompt (manifest order) of each position, for r in
    /// `0..repetitions`; distances are averaged over r.
    #[default]
    SinglePromptPerPosition,
    /// Class centroid over all prompts of the position.
    ClassMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSpace {
    /// Distances in the 2-d PCA projection fitted per layer.
    #[default]
    Projected,
    Ambient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub representative: Representative,
    pub space: DistanceSpace,
    pub repetitions: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            representative: Representative::SinglePromptPerPosition,
            space: DistanceSpace::Projected,
            repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve<T: Scalar> {
    pub per_layer: Vec<T>,
    pub options: DistanceOptions,
}

impl<T: Scalar> DistanceCurve<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,avg_distance\n");
        for (l, d) in self.per_layer.iter().enumerate() {
            s.push_str(&format!("{l},{d}\n"));
        }
        s
    }
}

/// Distance of one set of per-class representatives (rows in class order).
fn representative_distance<T: Scalar>(
    reps: &Array2<T>,
    space: DistanceSpace,
) -> Result<T, AnalysisError> {
    match space {
        DistanceSpace::Ambient => adjacent_distance(reps.view()),
        DistanceSpace::Projected => {
            let k = 2.min(reps.nrows() - 1).min(reps.ncols());
            let pca = pca_fit(reps.view(), k)?;
            adjacent_distance(pca_project(&pca, reps.view())?.view())
        }
    }
}

pub fn distance_curve<T: Scalar>(
    archive: &EmbeddingArchive,
    options: &DistanceOptions,
) -> Result<DistanceCurve<T>, AnalysisError> {
    let n_classes = archive.n_classes();
    if n_classes < 2 {
        return Err(AnalysisError::Coverage(format!(
            "schedule has {n_classes} position(s); distances need at least 2"
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (p, &c) in archive.manifest.gold_classes.iter().enumerate() {
        members[c as usize].push(p);
    }
    let needed = match options.representative {
        Representative::SinglePromptPerPosition => options.repetitions.max(1),
        Representative::ClassMean => 1,
    };
    if let Some((c, m)) = members.iter().enumerate().find(|(_, m)| m.len() < needed) {
        return Err(AnalysisError::Coverage(format!(
            "position {} has {} prompt(s), need {needed}",
            archive.manifest.schedule.positions[c],
            m.len()
        )));
    }
    let d = archive.hidden_dim();
    let mut per_layer = Vec::with_capacity(archive.n_layers());
    for layer in 0..archive.n_layers() {
        let value = match options.representative {
            Representative::ClassMean => {
                let mut reps = Array2::<T>::zeros((n_classes, d));
                for (c, ms) in members.iter().enumerate() {
                    for &p in ms {
                        for (dst, &v) in reps.row_mut(c).iter_mut().zip(archive.embedding(p, layer)) {
                            *dst = *dst + T::of_f32(v);
                        }
                    }
                    let n = T::of_usize(ms.len());
                    reps.row_mut(c).mapv_inplace(|v| v / n);
                }
                representative_distance(&reps, options.space)?
            }
            Representative::SinglePromptPerPosition => {
                let mut acc = T::zero();
                for r in 0..needed {
                    let prompts: Vec<usize> = members.iter().map(|m| m[r]).collect();
                    let reps = Array2::from_shape_fn((n_classes, d), |(c, j)| {
                        T::of_f32(archive.embedding(prompts[c], layer)[j])
                    });
                    acc = acc + representative_distance(&reps, options.space)?;
                }
                acc / T::of_usize(needed)
            }
        };
        per_layer.push(value);
    }
    Ok(DistanceCurve {
        per_layer,
        options: options.clone(),
    })
}
