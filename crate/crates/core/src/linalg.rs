//! Spectral PCA of a hyperspectral cube and the inverse transforms used to
//! rebuild a fused image from (partly sharpened) spatial loadings.
//!
//! The cube is unfolded into an `mn × q` matrix `X` (one column per band) and
//! factored as `X = G·Uᵀ` with `U` orthonormal and `G = V·D` the spatial
//! loadings. The factorization is uncentered. `U` comes from a cyclic Jacobi
//! eigendecomposition of the `q × q` Gram matrix `XᵀX`, which is cheap for the
//! band counts of interest (≈100).

use crate::cube::{slice_bands, stack, ImageCube};
use crate::error::{Error, Result};
use crate::gemm::{gemm, View};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SINGULAR_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `q × q`, row-major; column `k` is the `k`-th spectral singular vector.
    u: Vec<f64>,
    /// Singular values, descending.
    d: Vec<f64>,
    /// `m × n × q` spatial loadings `G = X·U`.
    loadings: ImageCube,
}

impl PcaModel {
    pub fn bands(&self) -> usize {
        self.d.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.d
    }

    /// Row-major `q × q` matrix of spectral singular vectors (as columns).
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `U[band, component]`.
    pub fn u_at(&self, band: usize, component: usize) -> f64 {
        self.u[band * self.bands() + component]
    }

    pub fn loadings(&self) -> &ImageCube {
        &self.loadings
    }

    /// The first `r` loadings as an `m × n × r` image.
    pub fn leading_loadings(&self, r: usize) -> Result<ImageCube> {
        slice_bands(&self.loadings, 0, r)
    }

    pub fn trailing_loadings(&self, r: usize) -> Result<ImageCube> {
        let q = self.bands();
        if r > q {
            return Err(Error::OutOfRange(format!("r = {r} exceeds q = {q}")));
        }
        slice_bands(&self.loadings, r, q - r)
    }
}

/// Gram matrix `XᵀX` of the band-unfolded cube, `q × q` row-major.
pub fn gram_matrix(cube: &ImageCube) -> Vec<f64> {
    let (q, n) = (cube.bands(), cube.pixels());
    let mut g = vec![0.0; q * q];
    let xt = View::row_major(q, n);
    gemm(
        1.0,
        cube.as_slice(),
        xt,
        cube.as_slice(),
        xt.t(),
        0.0,
        &mut g,
        View::row_major(q, q),
    );
    // exact symmetry
    for i in 0..q {
        for j in 0..i {
            let v = 0.5 * (g[i * q + j] + g[j * q + i]);
            g[i * q + j] = v;
            g[j * q + i] = v;
        }
    }
    g
}

/// Cyclic Jacobi eigendecomposition of a symmetric `n × n` matrix.
///
/// Returns `(eigenvalues, eigenvectors)` unsorted; eigenvector `k` is column
/// `k` of the row-major output.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOL * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- Jᵀ A J, rotating rows/columns p and q
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, v)
}

/// Uncentered spectral PCA: `X = G·Uᵀ` with singular values in descending order.
pub fn pca_decompose(hs: &ImageCube) -> Result<PcaModel> {
    let q = hs.bands();
    if q == 0 {
        return Err(Error::InvalidArgument(
            "cannot decompose a 0-band cube".into(),
        ));
    }
    if hs.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hyperspectral cube"));
    }
    if hs.pixels() < q {
        eprintln!(
            "warning: PCA on {} pixels with {q} bands; the spectral basis is rank deficient",
            hs.pixels()
        );
    }

    let (eig, vecs) = jacobi_eigen(&gram_matrix(hs), q);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| eig[j].total_cmp(&eig[i]).then(i.cmp(&j)));

    let mut d: Vec<f64> = order.iter().map(|&k| eig[k].max(0.0).sqrt()).collect();
    let top = d[0];
    for s in d.iter_mut() {
        if *s < SINGULAR_CLAMP * top {
            *s = 0.0;
        }
    }

    let mut u = vec![0.0; q * q];
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for row in 1..q {
            if vecs[row * q + k].abs() > vecs[pivot * q + k].abs() {
                pivot = row;
            }
        }
        let sign = if vecs[pivot * q + k] < 0.0 { -1.0 } else { 1.0 };
        for row in 0..q {
            u[row * q + col] = sign * vecs[row * q + k];
        }
    }

    // Gᵀ (q × mn) = Uᵀ (q × q) · Xᵀ (q × mn); band-sequential storage is Gᵀ row-major
    let n = hs.pixels();
    let mut g = vec![0.0; q * n];
    gemm(
        1.0,
        &u,
        View::row_major(q, q).t(),
        hs.as_slice(),
        View::row_major(q, n),
        0.0,
        &mut g,
        View::row_major(q, n),
    );
    let loadings = ImageCube::from_raw(hs.rows(), hs.cols(), q, g);
    Ok(PcaModel { u, d, loadings })
}

/// Multiplies `r` loadings by the first `r` columns of `Uᵀ`, giving a `q`-band cube.
fn project_back(loadings: &ImageCube, model: &PcaModel) -> ImageCube {
    let (q, r, n) = (model.bands(), loadings.bands(), loadings.pixels());
    let mut out = vec![0.0; q * n];
    // Xᵀ (q × mn) = U_r (q × r) · G_rᵀ (r × mn)
    let ur = View {
        rows: q,
        cols: r,
        row_stride: q,
        col_stride: 1,
    };
    gemm(
        1.0,
        model.u(),
        ur,
        loadings.as_slice(),
        View::row_major(r, n),
        0.0,
        &mut out,
        View::row_major(q, n),
    );
    ImageCube::from_raw(loadings.rows(), loadings.cols(), q, out)
}

/// `[Ĝʳ G̃^{q−r}]·Uᵀ`: sharpened leading loadings plus the remaining loadings.
pub fn reconstruct_full(
    loadings_hr_r: &ImageCube,
    loadings_rest: &ImageCube,
    model: &PcaModel,
) -> Result<ImageCube> {
    let q = model.bands();
    if loadings_hr_r.bands() + loadings_rest.bands() != q {
        return Err(Error::DimensionMismatch(format!(
            "{} + {} loadings for a {q}-band model",
            loadings_hr_r.bands(),
            loadings_rest.bands()
        )));
    }
    let all = stack(loadings_hr_r, loadings_rest)?;
    Ok(project_back(&all, model))
}

/// `Ĝʳ·(Uʳ)ᵀ`: rank-`r` spectral reconstruction.
pub fn reconstruct_reduced(
    loadings_hr_r: &ImageCube,
    model: &PcaModel,
    r: usize,
) -> Result<ImageCube> {
    if r > model.bands() || r == 0 {
        return Err(Error::OutOfRange(format!(
            "r = {r} with q = {}",
            model.bands()
        )));
    }
    if loadings_hr_r.bands() != r {
        return Err(Error::DimensionMismatch(format!(
            "{} loadings given for r = {r}",
            loadings_hr_r.bands()
        )));
    }
    Ok(project_back(loadings_hr_r, model))
}
