//! Generate a synthetic station with gaps and print its coverage.

use aeroadapt::domain::Field;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};

fn main() -> aeroadapt::Result<()> {
    let cfg = SyntheticConfig {
        n_hours: 24 * 28,
        missing_rate: 0.15,
        seed: 11,
        ..SyntheticConfig::default()
    };
    let (masked, truth) = generate_synthetic(&cfg)?;
    println!(
        "{} hours from {} to {}",
        masked.len(),
        masked.start().unwrap(),
        masked.end().unwrap()
    );
    for field in Field::ALL {
        println!("{:>15}  coverage {:.3}", field.name(), masked.coverage(field));
    }
    let mut head = Vec::new();
    truth.slice(0, 3).to_csv(&mut head)?;
    print!("{}", String::from_utf8_lossy(&head));
    Ok(())
}
