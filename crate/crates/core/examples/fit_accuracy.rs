//! Fit the accuracy model to noiseless data from known parameters, then to
//! a noisy copy.

use smqc::fit::{accuracy_model, fit_accuracy_model, AccuracyPoint, FitOptions};

fn main() -> smqc::Result<()> {
    let (beta, k, ap) = (-0.95, 0.08, 2.24);
    let mut data = Vec::new();
    for n0 in [10.0, 30.0, 60.0, 90.0, 120.0, 150.0] {
        for t in [0.0, 0.3, 0.6, 0.9] {
            data.push(AccuracyPoint {
                n0,
                t,
                accuracy: accuracy_model(beta, k, 1.0, ap, n0, t),
            });
        }
    }
    let exact = fit_accuracy_model(&data, &FitOptions::default())?;
    println!(
        "noiseless: beta {:.4}, k_dis {:.4}, alpha_p {:.4}, R^2 {:.6}",
        exact.beta, exact.k_dis, exact.alpha_p, exact.residual_r2
    );

    for (i, p) in data.iter_mut().enumerate() {
        p.accuracy += 0.01 * ((i * 7 % 5) as f64 - 2.0) / 2.0;
    }
    let noisy = fit_accuracy_model(&data, &FitOptions { free_c: true, ..FitOptions::default() })?;
    println!(
        "noisy, free c: beta {:.4}, k_dis {:.4}, alpha_p {:.4}, c {:.4}, R^2 {:.4}",
        noisy.beta, noisy.k_dis, noisy.alpha_p, noisy.c, noisy.residual_r2
    );
    Ok(())
}
