//! P(X = n) as an eavesdropper records more challenge/response pairs, for
//! both challenge-sampling scenarios, plus the first k crossing a target.
//!
//! cargo run --example recording_curves -- 8 3 0.70

use partial_password::attack_model::{recording_series, ThresholdMetric};
use partial_password::{threshold_k, ExactProbability, SamplingScenario, SchemeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(8), |s| s.parse())?;
    let m: usize = args.get(1).map_or(Ok(3), |s| s.parse())?;
    let target = ExactProbability::parse(args.get(2).map_or("0.70", String::as_str))?;
    let params = SchemeParams::new(n, m)?;

    let a = recording_series(SamplingScenario::WithoutReplacement, params, 25);
    let b = recording_series(SamplingScenario::WithReplacement, params, 25);
    println!("k,full_A,full_B");
    for (da, db) in a.iter().zip(&b) {
        println!(
            "{},{:.6},{:.6}",
            da.k,
            da.full_reconstruction().to_f64(),
            db.full_reconstruction().to_f64()
        );
    }

    for s in SamplingScenario::ALL {
        let k = threshold_k(s, params, &target, ThresholdMetric::FullReconstruction)?;
        eprintln!(
            "scenario {}: P(X = {n}) >= {} first at k = {k}",
            s.label(),
            target.to_f64()
        );
    }
    Ok(())
}
