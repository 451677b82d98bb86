//! An eavesdropper watches k honest logins, then tries to log in by
//! replaying recorded characters. Compares the observed success rate with
//! the model's expected next-challenge probability.

use partial_password::protocol_sim::{respond, AttackerKnowledge, RetryPolicy, Server};
use partial_password::{expected_success, Alphabet, Password, SamplingScenario, SchemeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let password = Password::new("s3cretpw12", &Alphabet::alphanumeric())?;
    let params = SchemeParams::new(password.len(), 3)?;
    let sessions = 4_000;

    for scenario in SamplingScenario::ALL {
        for k in [2, 5, 8, 12] {
            let mut wins = 0;
            for session in 0..sessions {
                let mut server =
                    Server::new(password.clone(), scenario, 3, RetryPolicy::FreshChallenge, session)?;
                let mut eve = AttackerKnowledge::new();
                for _ in 0..k {
                    let c = server.challenge();
                    let r = respond(&password, &c);
                    server.submit(&r)?;
                    eve.record(c, r);
                }
                let c = server.challenge();
                if let Some(guess) = eve.answer(&c) {
                    wins += usize::from(server.submit(&guess)?.is_accept());
                }
            }
            println!(
                "scenario {} k={k:>2}: replay success {:.3}, model {:.3}",
                scenario.label(),
                wins as f64 / sessions as f64,
                expected_success(scenario, params, k).to_f64()
            );
        }
    }
    Ok(())
}
