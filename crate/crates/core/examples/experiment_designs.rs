//! Joint experimentation laws and the conjecture each one induces.

use rand::SeedableRng;
use switchback_cv::design::{empirical_joint, ExperimentDesign};
use switchback_cv::SimRng;

fn main() -> switchback_cv::Result<()> {
    let designs = [
        ("independent q = 0.5", ExperimentDesign::independent(vec![0.5, 0.5])?),
        ("mixture rho = 0.3", ExperimentDesign::mixture(2, 0.3, 0.5)?),
        ("mixture rho = 0.8", ExperimentDesign::mixture(2, 0.8, 0.5)?),
        (
            "table, anti-correlated",
            ExperimentDesign::from_bitstrings([("00", 0.1), ("01", 0.4), ("10", 0.4), ("11", 0.1)])?,
        ),
    ];
    let mut rng = SimRng::seed_from_u64(7);
    for (name, design) in &designs {
        let exact = design.conjecture_matrix(None)?;
        let samples: Vec<Vec<bool>> = (0..20_000).map(|_| design.sample_period(&mut rng)).collect();
        let empirical = empirical_joint(&samples)?.conjecture(None)?;
        println!(
            "{name:<24} table {:?}  A*[0][1] = {:+.4}  sampled {:+.4}",
            design.bitstring_table().values().collect::<Vec<_>>(),
            exact.get(0, 1),
            empirical.matrix.get(0, 1)
        );
    }
    Ok(())
}
