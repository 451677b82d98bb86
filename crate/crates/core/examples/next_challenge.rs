//! Expected probability that a replay attacker can answer the next
//! challenge after k recordings, against the exact conditional form.

use partial_password::attack_model::expected_success_series;
use partial_password::{
    next_challenge_prob, recording_distribution, SamplingScenario, SchemeParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SchemeParams::new(10, 3)?;
    println!("k,E_A,E_B");
    let a = expected_success_series(SamplingScenario::WithoutReplacement, params, 15);
    let b = expected_success_series(SamplingScenario::WithReplacement, params, 15);
    for (k, (ea, eb)) in a.iter().zip(&b).enumerate() {
        println!("{k},{:.6},{:.6}", ea.to_f64(), eb.to_f64());
    }

    // E_k is the mixture of per-i success probabilities under p_k.
    let k = 8;
    let dist = recording_distribution(SamplingScenario::WithoutReplacement, params, k);
    for i in params.m()..=params.n() {
        let q = next_challenge_prob(SamplingScenario::WithoutReplacement, params, i)?;
        eprintln!(
            "k={k} i={i}: P(X=i)={:.4}  P(answer | i)={}",
            dist.prob(i).to_f64(),
            q
        );
    }
    Ok(())
}
