//! Per-step premium profile for Gaussian arms: the normalized profile
//! follows sqrt(i) - sqrt(i-1) regardless of K, and the 10% decay time
//! lands at step 26.

use selbias::{decay_time, premium_profile, EnsembleConfig, Family, IncrementModel, PsiSource};

fn main() {
    let n = 60;
    for k in [2usize, 10] {
        let model = IncrementModel::iid(Family::Gaussian, k, 1.0).unwrap();
        let config = EnsembleConfig::new(model, n, 100_000, 11);
        let report = premium_profile(&config, &[0.1]).unwrap();
        let norm = report.normalized.as_ref().unwrap();

        println!("K = {k}");
        println!("{:>4} {:>10} {:>10} {:>10}", "i", "psi_hat", "se", "analytic");
        for i in [1usize, 2, 5, 10, 26, 50] {
            let analytic = (i as f64).sqrt() - (i as f64 - 1.0).sqrt();
            println!(
                "{i:>4} {:>10.5} {:>10.5} {:>10.5}",
                norm.psi[i - 1],
                norm.psi_se[i - 1],
                analytic
            );
        }
        if let Some((_, Some(tau))) = report.decay_times.first() {
            println!("empirical decay time tau_0.1 = {tau}");
        }
        println!();
    }

    let analytic = decay_time(PsiSource::AnalyticGaussian, 0.1).unwrap();
    println!("analytic tau_0.1 = {:?}", analytic);
}
