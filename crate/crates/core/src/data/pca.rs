//! Principal component projection via the dense covariance eigensystem.

use nalgebra::{DMatrix, SymmetricEigen};

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pca {
    pub projected: PointCloud,
    /// Covariance eigenvalues of the kept components, descending.
    pub variances: Vec<f64>,
    pub total_variance: f64,
    /// Component directions, one row per component.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl Pca {
    pub fn explained_variance_ratio(&self) -> f64 {
        if self.total_variance == 0.0 {
            1.0
        } else {
            self.variances.iter().sum::<f64>() / self.total_variance
        }
    }
}

/// Center the columns and project onto the top `target_dim` covariance
/// eigenvectors, each signed so its largest-magnitude coordinate is positive.
pub fn pca_reduce(cloud: &PointCloud, target_dim: usize) -> Result<Pca> {
    let (n, d) = (cloud.len(), cloud.dim());
    if target_dim == 0 || target_dim > n.min(d) {
        return Err(Error::InvalidParameter(format!(
            "target dimension {target_dim} outside 1..={}",
            n.min(d)
        )));
    }
    let x = DMatrix::from_row_slice(n, d, cloud.features.data());
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    let mut xc = x;
    for j in 0..d {
        xc.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (xc.transpose() * &xc) / denom;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut basis = DMatrix::zeros(d, target_dim);
    let mut components = Vec::with_capacity(target_dim);
    let mut variances = Vec::with_capacity(target_dim);
    for (c, &k) in order.iter().take(target_dim).enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let lead = v.iter().cloned().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if lead < 0.0 {
            v.neg_mut();
        }
        basis.set_column(c, &v);
        components.push(v.iter().cloned().collect());
        variances.push(eig.eigenvalues[k].max(0.0));
    }
    let proj = xc * basis;
    let mut data = Vec::with_capacity(n * target_dim);
    for i in 0..n {
        data.extend(proj.row(i).iter());
    }
    Ok(Pca {
        projected: PointCloud::new(target_dim, data, cloud.labels.clone())?,
        variances,
        total_variance,
        components,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_data_has_one_component() {
        let data: Vec<f64> = (0..10).flat_map(|t| {
            let t = t as f64;
            [t, 2.0 * t + 1.0, -t]
        })
        .collect();
        let cloud = PointCloud::new(3, data, None).unwrap();
        let pca = pca_reduce(&cloud, 1).unwrap();
        assert!((pca.explained_variance_ratio() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_target() {
        let cloud = PointCloud::new(2, vec![0.0, 1.0, 2.0, 3.0], None).unwrap();
        assert!(pca_reduce(&cloud, 0).is_err());
        assert!(pca_reduce(&cloud, 3).is_err());
    }
}
