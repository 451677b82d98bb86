//! Three views of the same distribution: the recursion, brute-force
//! enumeration over every challenge sequence, and seeded simulation.

use partial_password::protocol_sim::{simulate_recording_with, MultisetSampling, SimulationOptions};
use partial_password::{enumerate_exact, recording_distribution, SamplingScenario, SchemeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SchemeParams::new(5, 2)?;
    let (k, trials, seed) = (3, 200_000, 42);
    for scenario in SamplingScenario::ALL {
        let exact = recording_distribution(scenario, params, k);
        let brute = enumerate_exact(scenario, params, k)?;
        assert_eq!(exact.probs, brute.probs);

        println!("scenario {} (n=5, m=2, k={k})", scenario.label());
        println!("  i  exact        simulated   iid-positions");
        let sampled = |sampling| {
            let opts = SimulationOptions { sampling, parallel: true };
            simulate_recording_with(scenario, params, k, trials, seed, opts)
        };
        let uniform = sampled(MultisetSampling::UniformMultiset)?;
        let iid = sampled(MultisetSampling::IidPositions)?;
        for i in 0..=params.n() {
            println!(
                "  {i}  {:<11}  {:.5}     {:.5}",
                exact.prob(i).to_string(),
                uniform.prob(i).to_f64(),
                iid.prob(i).to_f64()
            );
        }
        let tv = |d: &partial_password::KnowledgeDistribution| {
            exact.total_variation(&d.probs.iter().map(|p| p.to_f64()).collect::<Vec<_>>())
        };
        println!("  TVD uniform {:.5}, iid {:.5}", tv(&uniform), tv(&iid));
    }
    Ok(())
}
