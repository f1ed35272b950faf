//! Early-step concentration: the first alpha-fraction of observations
//! carries a sqrt(alpha)-fraction of the total selection bias.

use selbias::{bias_concentration, EnsembleConfig, Family, IncrementModel};

fn main() {
    let model = IncrementModel::iid(Family::UniformCentered, 10, 1.0).unwrap();
    let config = EnsembleConfig::new(model, 2000, 50_000, 5);
    let alphas = [0.01, 0.04, 0.25, 1.0];
    let ratios = bias_concentration(&config, &alphas).unwrap();

    println!("{:>6} {:>10} {:>10} {:>12}", "alpha", "ratio", "se", "sqrt(alpha)");
    for r in ratios {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>12.4}",
            r.alpha,
            r.ratio,
            r.std_error,
            r.alpha.sqrt()
        );
    }
}
