use csasr::nn::Matrix;
use csasr::xling::{EmbeddingSpace, TranslationDictionary};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(rows, cols, |_, _| n.sample(rng))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gaussian(rng, d, d).qr().q()
}

pub fn to_matrix(m: &DMatrix<f64>) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

pub fn to_dm(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn space(prefix: &str, m: &DMatrix<f64>) -> EmbeddingSpace {
    let words = (0..m.nrows()).map(|i| format!("{prefix}{i}")).collect();
    EmbeddingSpace::new(words, to_matrix(m)).unwrap()
}

pub fn orthogonality_error(w: &Matrix) -> f64 {
    let w = to_dm(w);
    (w.transpose() * &w - DMatrix::identity(w.ncols(), w.ncols())).abs().max()
}

/// Source space, a rotated noisy copy, and the rotation.
pub fn rotated_pair(seed: u64, words: usize, dim: usize, sigma: f64) -> (EmbeddingSpace, EmbeddingSpace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = space("m", &gaussian(&mut rng, words, dim)).normalize().unwrap();
    let q = random_orthogonal(&mut rng, dim);
    let noise = gaussian(&mut rng, words, dim) * sigma;
    let n = to_dm(m.matrix()) * q + noise;
    (m, space("n", &n).unit_normalize().unwrap())
}

pub fn identity_dict(k: usize) -> TranslationDictionary {
    TranslationDictionary::new((0..k).map(|i| (i, i)).collect()).unwrap()
}

pub fn accuracy(d: &TranslationDictionary) -> f64 {
    d.pairs().iter().filter(|(i, j)| i == j).count() as f64 / d.len() as f64
}
