//! Enroll one password under each storage backend, verify honest and
//! altered responses, and compare what each backend costs to store.

use partial_password::credential_store::{
    storage_cost, CredentialStore, DigestAlgorithm, KeyService, StorageBackend,
};
use partial_password::protocol_sim::SimRng;
use partial_password::{Alphabet, Challenge, Password, Response, SamplingScenario, SchemeParams};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SimRng::seed_from_u64(1);
    let alphabet = Alphabet::printable_ascii();
    let password = Password::new("password", &alphabet)?;
    let params = SchemeParams::new(8, 3)?;
    let keys = KeyService::generate(&mut rng);
    let store = CredentialStore::new()
        .with_digest(DigestAlgorithm::Sha256)
        .with_key_service(&keys);

    let challenge = Challenge::new(SamplingScenario::WithoutReplacement, params, vec![1, 4, 7])?;
    let honest = Response::new("awd".chars());
    let altered = Response::new("awx".chars());

    for backend in [
        StorageBackend::Plaintext,
        StorageBackend::HashPerCombination,
        StorageBackend::EncryptedWithKeyService,
    ] {
        let record = store.enroll(&password, params, backend, &mut rng)?;
        let cost = storage_cost(params, backend, 256, &alphabet);
        println!(
            "{:<28} honest={} altered={} payload={} bits overhead={} bits record={} bytes",
            backend.name(),
            store.verify(&record, &challenge, &honest)?,
            store.verify(&record, &challenge, &altered)?,
            cost.payload_bits,
            cost.overhead_bits,
            record.to_document().len()
        );
    }
    println!("key service decryptions: {}", keys.plaintext_decryptions());

    println!("\nhash-per-combination digest bits as n grows (m=3, SHA-256):");
    for n in [8, 12, 16, 20, 32] {
        let p = SchemeParams::new(n, 3)?;
        let c = storage_cost(p, StorageBackend::HashPerCombination, 256, &alphabet);
        println!("  n={n:>2}: {}", c.payload_bits);
    }
    Ok(())
}
