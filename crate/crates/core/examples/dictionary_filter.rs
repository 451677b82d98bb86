//! Narrow a wordlist with what a shoulder-surfer leaked: the password's
//! character set, a couple of positions, and its length.
//!
//! cargo run --example dictionary_filter -- /path/to/wordlist.txt dragon

use partial_password::dict_attack::{experiment_suite, load_dictionary_file, Dictionary};
use partial_password::protocol_sim::SimRng;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dict = match args.first() {
        Some(path) => load_dictionary_file(path.as_ref())?,
        None => Dictionary::from_words([
            "dragon", "dragons", "gonard", "nogard", "dragon1", "radong", "dargon", "drag0n",
            "organd", "grandon", "ragdon", "ardong", "abcdef", "dnogar",
        ]),
    };
    let password = args.get(1).map_or("dragon", String::as_str);
    let mut rng = SimRng::seed_from_u64(2024);
    let suite = experiment_suite(password, &dict, 2, 0, &mut rng)?;

    println!(
        "{} candidates; known positions (1-based) {:?}",
        dict.len(),
        suite.positions.iter().map(|p| p + 1).collect::<Vec<_>>()
    );
    for r in suite.reports() {
        println!(
            "experiment {}: {:>6} survive ({:.4} of the list)",
            r.experiment,
            r.survivor_count(),
            r.reduction_ratio()
        );
    }
    if suite.c.survivor_count() <= 20 {
        println!("C survivors: {:?}", suite.c.survivors);
    }
    Ok(())
}
