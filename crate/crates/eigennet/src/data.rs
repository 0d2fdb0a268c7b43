//! Labeled dataset container shared by every model and the harness.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A binary-labeled design matrix. Rows are observations, columns features;
/// labels are exactly -1.0 or +1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl Dataset {
    /// Validates and wraps a feature matrix and label vector.
    ///
    /// Requires at least one row and one column, a label per row, every
    /// feature finite, and every label exactly -1 or +1.
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Validation(format!(
                "feature matrix must be non-empty, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if labels.len() != features.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        if let Some((idx, bad)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (n, _) = features.shape();
            return Err(Error::Validation(format!(
                "non-finite feature {} at row {}, column {}",
                bad,
                idx % n,
                idx / n
            )));
        }
        if let Some(i) = (0..labels.len()).find(|&i| labels[i] != 1.0 && labels[i] != -1.0) {
            return Err(Error::Validation(format!(
                "label at row {} is {}, expected -1 or +1",
                i, labels[i]
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    /// Counts of (+1, -1) labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1.0).count();
        (pos, self.labels.len() - pos)
    }

    /// Column means of the feature matrix.
    pub fn feature_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.features.column_iter().map(|c| c.sum() / n))
    }

    /// A copy with `shift` subtracted from every row.
    pub fn shifted_by(&self, shift: &DVector<f64>) -> Result<Self> {
        if shift.len() != self.p() {
            return Err(Error::Dimension(format!(
                "shift has length {}, features have {} columns",
                shift.len(),
                self.p()
            )));
        }
        let mut features = self.features.clone();
        for mut row in features.row_iter_mut() {
            row -= shift.transpose();
        }
        Ok(Self {
            features,
            labels: self.labels.clone(),
        })
    }

    /// The subset of rows at `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Validation("row selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Validation(format!(
                "row index {} out of bounds for {} rows",
                bad,
                self.n()
            )));
        }
        let features = DMatrix::from_fn(indices.len(), self.p(), |i, j| {
            self.features[(indices[i], j)]
        });
        let labels = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.labels[i]));
        Self::new(features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn toy() -> Dataset {
        Dataset::new(
            dmatrix![1.0, 2.0; 3.0, 4.0; 5.0, 6.0],
            dvector![1.0, -1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn accepts_valid_data() {
        let d = toy();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.class_counts(), (2, 1));
    }

    #[test]
    fn rejects_bad_labels() {
        let err = Dataset::new(dmatrix![1.0; 2.0], dvector![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "got {err}");
    }

    #[test]
    fn rejects_non_finite_features() {
        let err = Dataset::new(dmatrix![1.0, f64::NAN; 2.0, 3.0], dvector![1.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let err = Dataset::new(dmatrix![1.0; 2.0], dvector![1.0]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn rejects_empty() {
        let err = Dataset::new(DMatrix::zeros(0, 3), DVector::zeros(0)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn feature_means_and_shift() {
        let d = toy();
        let m = d.feature_means();
        assert_eq!(m, dvector![3.0, 4.0]);
        let c = d.shifted_by(&m).unwrap();
        assert_eq!(c.features()[(0, 0)], -2.0);
        assert_eq!(c.feature_means(), dvector![0.0, 0.0]);
    }

    #[test]
    fn select_rows_keeps_order() {
        let d = toy();
        let s = d.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.features()[(0, 1)], 6.0);
        assert_eq!(s.labels()[1], 1.0);
        assert!(d.select_rows(&[3]).is_err());
    }
}
