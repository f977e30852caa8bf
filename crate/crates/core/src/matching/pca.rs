use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Descriptor, MatchingError};

/// Principal subspace: `basis` rows are unit eigenvectors of the
/// population covariance (divisor n), ordered by decreasing eigenvalue,
/// each signed so its largest-magnitude component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

fn sign_fix(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Descending eigenpairs of a symmetric matrix, ties by index.
fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order.into_iter().map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).collect()
}

/// Fits on `descriptors` (one row each). When there are fewer samples than
/// dimensions the eigenproblem is solved on the n-by-n Gram matrix; basis
/// directions past its rank are completed by Gram-Schmidt on unit vectors.
pub fn pca_fit(descriptors: &[Descriptor], k: usize) -> Result<PcaModel, MatchingError> {
    let n = descriptors.len();
    if n < 2 {
        return Err(MatchingError::Pca(format!("{n} training descriptors; at least 2 required")));
    }
    let dim = descriptors[0].dim();
    if let Some(d) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(MatchingError::DimMismatch(dim, d.dim()));
    }
    if k == 0 || k > dim.min(n) {
        return Err(MatchingError::Pca(format!("k={k} too large for {n} samples of dimension {dim}")));
    }
    let mut mean = vec![0.0; dim];
    for d in descriptors {
        mean.iter_mut().zip(&d.values).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, dim, |i, j| descriptors[i].values[j] - mean[j]);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    if n >= dim {
        let cov = x.transpose() * &x / n as f64;
        for (lambda, v) in sorted_eigen(cov).into_iter().take(k) {
            basis.push(v.iter().copied().collect());
            eigenvalues.push(lambda.max(0.0));
        }
    } else {
        let gram = &x * x.transpose() / n as f64;
        let pairs = sorted_eigen(gram);
        let top = pairs.first().map(|p| p.0).unwrap_or(0.0).max(0.0);
        for (lambda, u) in pairs.into_iter().take(k) {
            if lambda <= top * 1e-12 || lambda <= 0.0 {
                break;
            }
            let v = x.transpose() * u / (n as f64 * lambda).sqrt();
            basis.push(v.iter().copied().collect());
            eigenvalues.push(lambda);
        }
        let mut e = 0;
        while basis.len() < k && e < dim {
            let mut v = vec![0.0; dim];
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|a| *a /= norm);
                basis.push(v);
                eigenvalues.push(0.0);
            }
            e += 1;
        }
    }
    basis.iter_mut().for_each(|b| sign_fix(b));
    Ok(PcaModel { mean, basis, eigenvalues })
}

pub fn pca_apply(model: &PcaModel, d: &Descriptor) -> Result<Descriptor, MatchingError> {
    if d.dim() != model.input_dim() {
        return Err(MatchingError::DimMismatch(model.input_dim(), d.dim()));
    }
    let centered: Vec<f64> = d.values.iter().zip(&model.mean).map(|(v, m)| v - m).collect();
    let values = model.basis.iter().map(|b| b.iter().zip(&centered).map(|(a, c)| a * c).sum()).collect();
    Ok(Descriptor::new(values, format!("{}-pca{}", d.layer_tag, model.k())))
}

/// Maps a projected descriptor back to the input space.
pub fn pca_reconstruct(model: &PcaModel, projected: &[f64]) -> Vec<f64> {
    let mut out = model.mean.clone();
    for (b, &c) in model.basis.iter().zip(projected) {
        out.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descs(rows: &[&[f64]]) -> Vec<Descriptor> {
        rows.iter().map(|r| Descriptor::new(r.to_vec(), "t")).collect()
    }

    #[test]
    fn line_data_first_component() {
        let d = descs(&[&[-2.0, -2.0], &[-1.0, -1.0], &[1.0, 1.0], &[2.0, 2.0]]);
        let m = pca_fit(&d, 1).unwrap();
        let s = 0.5f64.sqrt();
        assert!((m.basis[0][0] - s).abs() < 1e-12 && (m.basis[0][1] - s).abs() < 1e-12);
        assert!((m.eigenvalues[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_preserves_distances() {
        let d = descs(&[&[1.0, 0.0, 2.0], &[0.0, 3.0, 1.0], &[2.0, 2.0, 0.0], &[1.0, 1.0, 1.0], &[4.0, 0.5, 2.0]]);
        let m = pca_fit(&d, 3).unwrap();
        let p: Vec<_> = d.iter().map(|x| pca_apply(&m, x).unwrap()).collect();
        for i in 0..d.len() {
            for j in 0..d.len() {
                assert!((d[i].distance(&d[j]) - p[i].distance(&p[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        // 3 samples in 5 dimensions: rank 2 after centering
        let d = descs(&[&[1.0, 0.0, 2.0, 0.5, 0.0], &[0.0, 3.0, 1.0, 0.0, 1.0], &[2.0, 2.0, 0.0, 1.0, 1.0]]);
        let m = pca_fit(&d, 2).unwrap();
        // projected pairwise distances equal the originals (data lies in a 2-plane)
        let p: Vec<_> = d.iter().map(|x| pca_apply(&m, x).unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                assert!((d[i].distance(&d[j]) - p[i].distance(&p[j])).abs() < 1e-9);
            }
        }
        let m3 = pca_fit(&d, 3).unwrap();
        assert_eq!(m3.eigenvalues[2], 0.0);
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = m3.basis[a].iter().zip(&m3.basis[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn k_bounds() {
        let d = descs(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(pca_fit(&d, 3), Err(MatchingError::Pca(_))));
        assert!(matches!(pca_fit(&d, 0), Err(MatchingError::Pca(_))));
        assert!(pca_fit(&[], 1).is_err());
    }
}
