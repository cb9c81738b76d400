//! Fitted column transforms. Parameters are always estimated on an explicit
//! subset of rows (the training fold) and then applied to every row.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Column, FeatureTable};

fn fit_matrix(table: &FeatureTable, fit_rows: &[&str]) -> Result<Vec<Vec<f64>>> {
    if fit_rows.is_empty() {
        return Err(Error::validation("fit_rows", "empty fitting subset"));
    }
    table.matrix(fit_rows.iter().copied())
}

/// Per-column z-scoring. Uses the population (divide-by-n) standard deviation;
/// a zero-spread column maps to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(table: &FeatureTable, fit_rows: &[&str]) -> Result<Self> {
        let x = fit_matrix(table, fit_rows)?;
        let n = x.len() as f64;
        let d = table.width();
        let mut means = vec![0.0; d];
        for row in &x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut sds = vec![0.0; d];
        for row in &x {
            for j in 0..d {
                let c = row[j] - means[j];
                sds[j] += c * c;
            }
        }
        sds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Standardizer { means, sds })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let sd = self.sds[j];
                if sd <= 1e-12 * self.means[j].abs().max(1.0) {
                    0.0
                } else {
                    (v - self.means[j]) / sd
                }
            })
            .collect()
    }

    pub fn transform(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.width() != self.means.len() {
            return Err(Error::validation("table", "width differs from fitted width"));
        }
        let rows = table
            .rows()
            .iter()
            .map(|(id, r)| (id.clone(), self.transform_row(r)))
            .collect();
        FeatureTable::new(table.columns().to_vec(), rows, table.meta().clone())
    }
}

pub fn standardize(table: &FeatureTable, stats_from: &[&str]) -> Result<FeatureTable> {
    Standardizer::fit(table, stats_from)?.transform(table)
}

/// Principal-component projection.
///
/// Components are ordered by decreasing variance; each is signed so that its
/// largest-magnitude loading is positive (first such index on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k x d`, rows are unit-length components.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    /// Fits up to `k` components. If the fitted rows have rank below `k`,
    /// only `rank` components are kept and a warning is logged.
    pub fn fit(table: &FeatureTable, fit_rows: &[&str], k: usize) -> Result<Self> {
        let d = table.width();
        if k > d {
            return Err(Error::validation(
                "k",
                format!("{k} components requested from {d} columns"),
            ));
        }
        let rows = fit_matrix(table, fit_rows)?;
        let n = rows.len();
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let xc = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let denom = (n.max(2) - 1) as f64;

        // eigenpairs of the covariance, via the smaller of the two Gram forms
        let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = if n >= d {
            let cov = (xc.transpose() * &xc) / denom;
            let eig = SymmetricEigen::new(cov);
            let vals = eig.eigenvalues.iter().copied().collect();
            let vecs = (0..d)
                .map(|c| eig.eigenvectors.column(c).iter().copied().collect())
                .collect();
            (vals, vecs)
        } else {
            let gram = (&xc * xc.transpose()) / denom;
            let eig = SymmetricEigen::new(gram);
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let vecs = (0..n)
                .map(|c| {
                    let u = eig.eigenvectors.column(c);
                    let v = xc.transpose() * u;
                    let norm = v.norm();
                    if norm > 0.0 {
                        v.iter().map(|x| x / norm).collect()
                    } else {
                        vec![0.0; d]
                    }
                })
                .collect();
            (vals, vecs)
        };

        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let top = values.iter().copied().fold(0.0f64, f64::max);
        let tol = top * 1e-10;
        let rank = if top > 0.0 {
            order.iter().filter(|&&i| values[i] > tol).count()
        } else {
            0
        };
        let keep = k.min(rank);
        if keep < k {
            log::warn!("pca: fitted rows have rank {rank}; returning {keep} of {k} requested components");
        }

        let mut components = Vec::with_capacity(keep);
        let mut explained_variance = Vec::with_capacity(keep);
        for &i in order.iter().take(keep) {
            let mut v = vectors[i].clone();
            let lead = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (j, x)| {
                    if x.abs() > best.1 {
                        (j, x.abs())
                    } else {
                        best
                    }
                })
                .0;
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            explained_variance.push(values[i].max(0.0));
        }
        Ok(Pca {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Maps projected coordinates back to the original space.
    pub fn reconstruct_row(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (s, c) in scores.iter().zip(&self.components) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += s * w;
            }
        }
        out
    }

    pub fn transform(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.width() != self.mean.len() {
            return Err(Error::validation("table", "width differs from fitted width"));
        }
        let columns = (1..=self.components.len())
            .map(|i| Column::new(format!("pc{i}"), "pca"))
            .collect();
        let rows: BTreeMap<String, Vec<f64>> = table
            .rows()
            .iter()
            .map(|(id, r)| (id.clone(), self.project_row(r)))
            .collect();
        Ok(FeatureTable::new(columns, rows, table.meta().clone())?
            .with_meta("reduction", "pca")
            .with_meta("reduction.components", self.components.len().to_string()))
    }
}

pub fn reduce_dimensions(table: &FeatureTable, k: usize, fit_rows: &[&str]) -> Result<FeatureTable> {
    Pca::fit(table, fit_rows, k)?.transform(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_from(rows: Vec<Vec<f64>>) -> FeatureTable {
        let d = rows[0].len();
        FeatureTable::from_rows(
            (0..d).map(|j| Column::new(format!("f{j}"), "t")).collect(),
            rows.into_iter()
                .enumerate()
                .map(|(i, r)| (format!("p{i:04}"), r)),
        )
        .unwrap()
    }

    fn random_table(n: usize, d: usize, seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        table_from(
            (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect(),
        )
    }

    fn ids(t: &FeatureTable) -> Vec<&str> {
        t.ids().collect()
    }

    fn total_variance(rows: &[Vec<f64>]) -> f64 {
        let n = rows.len() as f64;
        let d = rows[0].len();
        (0..d)
            .map(|j| {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn standardize_examples() {
        let t = table_from(vec![vec![0.0, 7.0], vec![10.0, 7.0]]);
        let z = standardize(&t, &ids(&t)).unwrap();
        assert_eq!(z.row("p0000").unwrap(), &[-1.0, 0.0]);
        assert_eq!(z.row("p0001").unwrap(), &[1.0, 0.0]);

        let r = random_table(50, 3, 1);
        let once = standardize(&r, &ids(&r)).unwrap();
        let twice = standardize(&once, &ids(&once)).unwrap();
        for (a, b) in once.rows().values().zip(twice.rows().values()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(standardize(&r, &[]).is_err());
    }

    #[test]
    fn standardizer_ignores_rows_outside_fit_subset() {
        let t = random_table(40, 4, 2);
        let all = ids(&t);
        let (train, test) = all.split_at(30);
        let fitted = Standardizer::fit(&t, train).unwrap();
        // perturb held-out rows
        let mut rows = t.rows().clone();
        for id in test {
            rows.get_mut(*id).unwrap().iter_mut().for_each(|v| *v += 100.0);
        }
        let t2 = FeatureTable::new(t.columns().to_vec(), rows, BTreeMap::new()).unwrap();
        assert_eq!(Standardizer::fit(&t2, train).unwrap(), fitted);
        assert_eq!(Pca::fit(&t2, train, 3).unwrap(), Pca::fit(&t, train, 3).unwrap());
    }

    #[test]
    fn full_rank_pca_preserves_variance() {
        for (n, d) in [(60, 5), (8, 5)] {
            let t = random_table(n, d, 3);
            let k = d.min(n - 1);
            let p = reduce_dimensions(&t, k, &ids(&t)).unwrap();
            let before: Vec<Vec<f64>> = t.rows().values().cloned().collect();
            let after: Vec<Vec<f64>> = p.rows().values().cloned().collect();
            assert!((total_variance(&before) - total_variance(&after)).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_keep_distances() {
        let pts: Vec<Vec<f64>> = [-2.0, -0.5, 0.0, 1.0, 4.0]
            .iter()
            .map(|t| vec![1.0 + 3.0 * t, -2.0 + 4.0 * t])
            .collect();
        let t = table_from(pts.clone());
        let p = reduce_dimensions(&t, 1, &ids(&t)).unwrap();
        let proj: Vec<f64> = p.rows().values().map(|r| r[0]).collect();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let orig = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                assert!((orig - (proj[i] - proj[j]).abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficient_returns_rank_columns() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let t = table_from(pts);
        let p = reduce_dimensions(&t, 3, &ids(&t)).unwrap();
        assert_eq!(p.width(), 1);
        assert!(reduce_dimensions(&t, 4, &ids(&t)).is_err());
    }

    #[test]
    fn sixteen_components_from_wide_table() {
        let t = random_table(120, 845, 4);
        let all = ids(&t);
        let p = reduce_dimensions(&t, 16, &all[..96]).unwrap();
        assert_eq!(p.width(), 16);
        assert_eq!(p.len(), 120);
        assert_eq!(p.meta()["reduction"], "pca");
    }

    #[test]
    fn sign_convention_and_order() {
        let t = random_table(30, 4, 5);
        let pca = Pca::fit(&t, &ids(&t), 4).unwrap();
        for c in &pca.components {
            let lead = c.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(lead > 0.0);
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstruction_error_non_increasing_in_k() {
        let t = random_table(40, 6, 6);
        let all = ids(&t);
        let mut prev = f64::INFINITY;
        for k in 0..=6 {
            let pca = Pca::fit(&t, &all, k).unwrap();
            let err: f64 = t
                .rows()
                .values()
                .map(|r| {
                    let rec = pca.reconstruct_row(&pca.project_row(r));
                    r.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum();
            assert!(err <= prev + 1e-9, "k={k}: {err} > {prev}");
            prev = err;
        }
        assert!(prev < 1e-9);
    }
}
