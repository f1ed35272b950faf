//! Winner's curse under unequal means: drift/residual split of the selected
//! maximum and the per-observation optimism of the reported winner.

use selbias::{
    per_observation_premium_curve, winners_curse, EnsembleConfig, Family, IncrementModel,
    MeanVector,
};

fn main() {
    // equal means: pure selection, optimism = g(K)/sqrt(n)
    let model = IncrementModel::iid(Family::Gaussian, 10, 1.0).unwrap();
    let config = EnsembleConfig::new(model, 400, 50_000, 29);
    let equal = MeanVector::new(vec![0.0; 10]).unwrap();
    let report = winners_curse(&config, &equal).unwrap();
    println!("equal means, K=10, n=400:");
    println!("  optimism = {:.5} +- {:.5}  (g(10)/20 = 0.07694)",
        report.optimism, report.optimism_se);

    // a clear favorite: selection washes out as n grows
    let model = IncrementModel::iid(Family::Gaussian, 2, 1.0).unwrap();
    let means = MeanVector::new(vec![0.3, 0.0]).unwrap();
    let config = EnsembleConfig::new(model.clone(), 200, 50_000, 31);
    let report = winners_curse(&config, &means).unwrap();
    println!("\ngap 0.3, K=2, n=200:");
    println!("  drift term      = {:.4}", report.drift_term);
    println!("  residual max    = {:.4} +- {:.4}", report.residual_max, report.residual_max_se);
    println!("  selected freq   = {:?}", report.selected_frequency);

    let curve = per_observation_premium_curve(&model, &means, &[50, 200, 800], 50_000, 37).unwrap();
    println!("\nper-observation premium, gap 0.3:");
    for p in curve {
        println!("  n = {:>4}: {:.5} +- {:.5}", p.horizon, p.value, p.std_error);
    }
}
