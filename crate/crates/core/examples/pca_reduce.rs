//! Reduces correlated features with PCA and reports explained variance.

use lemp::ndmath::{Matrix, Pca};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> lemp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    // three latent factors spread over twelve observed columns
    let (n, d, k) = (200, 12, 3);
    let mix = Matrix::uniform(k, d, -1.0, 1.0, &mut rng);
    let mut latent = Matrix::zeros(n, k);
    for (i, v) in latent.as_mut_slice().iter_mut().enumerate() {
        *v = normal.sample(&mut rng) * [4.0, 2.0, 1.0][i % k];
    }
    let mut x = latent.matmul(&mix)?;
    for v in x.as_mut_slice() {
        *v += 0.05 * normal.sample(&mut rng);
    }

    let pca = Pca::fit(&x, 5)?;
    let total: f64 = pca.explained_variance.iter().sum();
    for (i, ev) in pca.explained_variance.iter().enumerate() {
        println!("component {i}: variance {ev:.4} ({:.1}% of the top five)", 100.0 * ev / total);
    }
    let z = pca.transform(&x)?;
    println!("reduced {:?} -> {:?}", x.shape(), z.shape());
    Ok(())
}
