//! Divergence estimates between two Gaussian samples, next to the closed
//! form for the same pair.
//!
//! `cargo run --release --example divergence`

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use shiftscope::data::Dataset;
use shiftscope::density::{fit_kde, js_divergence, kl_divergence, mmd, renyi_divergence, Gaussian};

fn sample(mean: f64, n: usize, seed: u64) -> Dataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![d.sample(&mut rng)]).collect();
    Dataset::from_rows(format!("N({mean}, 1)"), &rows, None).unwrap()
}

fn main() -> shiftscope::Result<()> {
    let (a, b) = (sample(0.0, 2000, 1), sample(1.0, 2000, 2));
    let (p, q) = (fit_kde(&a, None)?, fit_kde(&b, None)?);
    let (gp, gq) = (Gaussian::new(0.0, 1.0), Gaussian::new(1.0, 1.0));

    println!("{:<14} {:>10} {:>10}", "measure", "kde", "exact");
    println!("{:<14} {:>10.4} {:>10.4}", "kl (nats)", kl_divergence(&p, &q)?.value, kl_divergence(&gp, &gq)?.value);
    println!("{:<14} {:>10.4} {:>10.4}", "js (bits)", js_divergence(&p, &q)?.value, js_divergence(&gp, &gq)?.value);
    // Order 2 weighs the tails by p/q, so the KDE value depends heavily on
    // where the kernel sum of q runs out.
    println!(
        "{:<14} {:>10.4} {:>10.4}",
        "renyi2 (bits)",
        renyi_divergence(&p, &q, 2.0)?.value,
        renyi_divergence(&gp, &gq, 2.0)?.value
    );
    let m = mmd(&a, &b, None)?;
    println!("mmd^2 biased {:.5}, unbiased {:.5}, gamma {:.3}", m.biased, m.unbiased.unwrap_or(f64::NAN), m.gamma);
    Ok(())
}
