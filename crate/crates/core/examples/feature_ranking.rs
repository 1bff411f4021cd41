//! Rank candidate inputs three ways and select a schema.

use aeroadapt::domain::{fit_normalizer, Field};
use aeroadapt::features::{
    correlation_matrix, rank_features, select_features, CompletedDataset, RankingData, RankingMethod,
};
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};

fn main() -> aeroadapt::Result<()> {
    let cfg = SyntheticConfig {
        n_hours: 24 * 30,
        seed: 2,
        ..SyntheticConfig::default()
    };
    let (_, truth) = generate_synthetic(&cfg)?;
    let data = CompletedDataset {
        station_id: truth.station_id.clone(),
        timestamps: truth.observations.iter().map(|o| o.timestamp).collect(),
        columns: Field::ALL
            .iter()
            .map(|f| (*f, truth.column(*f).into_iter().map(Option::unwrap).collect()))
            .collect(),
    };
    let norm = fit_normalizer(data.columns.iter().map(|(f, v)| (f.name(), v.clone())))?;
    let ranking = RankingData::from_dataset(&data, &Field::ALL, &norm, 4)?;

    for method in [
        RankingMethod::ForestImportance,
        RankingMethod::BackwardElimination,
        RankingMethod::ForwardConstruction,
    ] {
        let ranked = rank_features(&ranking, method, 1)?;
        let names: Vec<&str> = ranked.iter().map(|r| r.name.as_str()).collect();
        println!("{method:?}: {}", names.join(" > "));
    }

    let columns: Vec<(String, Vec<f64>)> = data.columns.iter().map(|(f, v)| (f.name().to_string(), v.clone())).collect();
    let (corr, _) = correlation_matrix(&columns)?;
    let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
    let ranked = rank_features(&ranking, RankingMethod::ForestImportance, 1)?;
    let schema = select_features(&ranked, &names, &corr, 0.95, 6)?;
    println!("selected inputs: {}", schema.features.join(", "));
    Ok(())
}
