//! Clustering heads: label-as-representation, K-means and the self-organizing map.

mod kmeans;
mod som;

pub use kmeans::{kmeans, kmeans_best_of, kmeans_from, random_init, sse, KMeansFit};
pub use som::{grid_sq_dist, neighborhood, som_fit, winner, winner_by_cosine, SomGrid, SomSpec, SomTrace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{argmax, norm, Matrix};

/// Hard cluster labels in `[0, k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl HardAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid("labels", format!("label {bad} >= k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidOrigin {
    KMeans,
    Som,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub matrix: Matrix,
    pub origin: CentroidOrigin,
}

impl Centroids {
    pub fn k(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn unit_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn unit_normalize_rows(z: &Matrix) -> Result<Matrix> {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let u = unit_normalize(z.row(i)).map_err(|_| Error::invalid("input row", format!("row {i} is a zero vector")))?;
        out.row_mut(i).copy_from_slice(&u);
    }
    Ok(out)
}

/// Argmax of every row, lowest index on ties.
pub fn label_as_representation(projected: &Matrix) -> HardAssignment {
    HardAssignment {
        labels: projected.iter_rows().map(argmax).collect(),
        k: projected.cols(),
    }
}

/// A fitted clustering head.
#[derive(Clone, Debug)]
pub enum HeadFit {
    KMeans(KMeansFit),
    Som(SomGrid),
    /// Argmax labels over a projected space; centres come from a K-means or
    /// SOM fit on that same space, if one was run.
    LabelAsRep {
        labels: HardAssignment,
        centres: Option<Box<HeadFit>>,
    },
}

impl HeadFit {
    pub fn labels(&self, z: &Matrix) -> Result<HardAssignment> {
        match self {
            HeadFit::KMeans(fit) => Ok(fit.assign(z)),
            HeadFit::Som(grid) => grid.assign(z),
            HeadFit::LabelAsRep { .. } => Ok(label_as_representation(z)),
        }
    }
}

pub fn centroids_of(head: &HeadFit) -> Result<Centroids> {
    match head {
        HeadFit::KMeans(fit) => Ok(Centroids {
            matrix: fit.centroids.clone(),
            origin: CentroidOrigin::KMeans,
        }),
        HeadFit::Som(grid) => Ok(Centroids {
            matrix: grid.weights.clone(),
            origin: CentroidOrigin::Som,
        }),
        HeadFit::LabelAsRep { centres: Some(inner), .. } => centroids_of(inner),
        HeadFit::LabelAsRep { centres: None, .. } => Err(Error::invalid(
            "head",
            "label-as-representation head has no fitted centres",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(unit_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(unit_normalize(&[0.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(unit_normalize(&[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_has_unit_norm(v in prop::collection::vec(-100.0f64..100.0, 1..20)) {
            prop_assume!(norm(&v) > 1e-9);
            let u = unit_normalize(&v).unwrap();
            prop_assert!((norm(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_as_representation_examples() {
        let z = Matrix::from_rows(&[[0.1, 0.9, 0.0], [0.5, 0.5, 0.0]]).unwrap();
        assert_eq!(label_as_representation(&z).labels, vec![1, 0]);
        assert_eq!(label_as_representation(&Matrix::identity(4)).labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn centroids_of_kmeans_recovers_points() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [5.0, 1.0], [-3.0, 2.0]]).unwrap();
        let (c, a) = kmeans(&z, 3, 50, 1).unwrap();
        let fit = KMeansFit::from_parts(c.matrix, a, z.clone());
        let cent = centroids_of(&HeadFit::KMeans(fit)).unwrap();
        let mut rows: Vec<Vec<f64>> = cent.matrix.iter_rows().map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f64>> = z.iter_rows().map(<[f64]>::to_vec).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, want);
    }

    #[test]
    fn kmeans_r_over_identity_gives_singletons() {
        let z = Matrix::identity(4);
        let labels = label_as_representation(&z);
        let inner = kmeans_best_of(&z, 4, 50, 3, 9, None).unwrap();
        let head = HeadFit::LabelAsRep {
            labels,
            centres: Some(Box::new(HeadFit::KMeans(inner))),
        };
        let c = centroids_of(&head).unwrap();
        assert_eq!(c.k(), 4);
        for row in c.matrix.iter_rows() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 3);
        }
    }

    #[test]
    fn label_as_rep_without_centres_is_unfitted() {
        let head = HeadFit::LabelAsRep {
            labels: label_as_representation(&Matrix::identity(2)),
            centres: None,
        };
        assert!(centroids_of(&head).is_err());
    }
}
