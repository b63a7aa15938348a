//! Writes the synthetic auto-claim stand-in used by tests and examples.
//!
//! The file has the column layout of the public auto-claim table but every
//! value is simulated. Claim amounts follow a tweedie model in which
//! MVR_PTS, REVOLKED = Yes and AREA = Urban raise the expected amount.
//!
//! Usage: cargo run -p selinf --example autoclaim_standin [out.csv]

use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selinf::simbench::sample_tweedie;

const ROWS: usize = 200;
const POWER: f64 = 1.5;
const PHI: f64 = 60.0;

fn pick<'a>(rng: &mut ChaCha8Rng, levels: &[&'a str]) -> &'a str {
    levels.choose(rng).copied().expect("non-empty")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/autoclaim_standin.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(20_250_101);
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record([
        "POLICYNO", "PLCYDATE", "CLM_FREQ5", "CLM_AMT5", "CLM_AMT", "KIDSDRIV", "TRAVTIME", "CAR_USE",
        "BLUEBOOK", "RETAINED", "NPOLICY", "CAR_TYPE", "RED_CAR", "REVOLKED", "MVR_PTS", "CLM_FLAG", "AGE",
        "HOMEKIDS", "YOJ", "INCOME", "GENDER", "MARRIED", "PARENT1", "JOBCLASS", "MAX_EDUC", "HOME_VAL",
        "SAMEHOME", "AREA",
    ])?;
    let car_types = ["Pickup", "Sedan", "Sports Car", "SUV", "Van"];
    let jobs = [
        "Blue Collar", "Clerical", "Doctor", "Home Maker", "Lawyer", "Manager", "Professional", "Student",
    ];
    let educ = ["Bachelors", "High School", "Masters", "PhD"];
    for i in 0..ROWS {
        // the first row carries every reference level
        let first = i == 0;
        let car_use = if first || rng.random_bool(0.63) { "Private" } else { "Commercial" };
        let car_type = if first || rng.random_bool(0.1) { "Panel Truck" } else { pick(&mut rng, &car_types) };
        let red = if first || rng.random_bool(0.7) { "no" } else { "yes" };
        let revoked = if first || rng.random_bool(0.85) { "No" } else { "Yes" };
        let gender = if first || rng.random_bool(0.5) { "F" } else { "M" };
        let married = if first || rng.random_bool(0.4) { "No" } else { "Yes" };
        let parent = if first || rng.random_bool(0.86) { "No" } else { "Yes" };
        let job = if first || rng.random_bool(0.06) { "Unknown" } else { pick(&mut rng, &jobs) };
        let edu = if first || rng.random_bool(0.15) { "<High School" } else { pick(&mut rng, &educ) };
        let area = if first || rng.random_bool(0.2) { "Rural" } else { "Urban" };
        let mvr = (rng.random::<f64>().powi(2) * 10.0).floor();
        let kids = if rng.random_bool(0.85) { 0.0 } else { rng.random_range(1..4) as f64 };
        let homekids = kids + if rng.random_bool(0.6) { 0.0 } else { rng.random_range(1..3) as f64 };
        let travtime = rng.random_range(5..75) as f64;
        let bluebook = (rng.random_range(1_500..40_000) / 10 * 10) as f64;
        let income = (rng.random_range(0..150_000) / 100 * 100) as f64;
        let home_val = if rng.random_bool(0.3) { 0.0 } else { (rng.random_range(50_000..400_000) / 100 * 100) as f64 };

        let eta = 5.0 + 0.18 * mvr + 1.5 * f64::from(u8::from(revoked == "Yes")) + 1.1 * f64::from(u8::from(area == "Urban"))
            + 0.1 * kids
            - 0.2 * f64::from(u8::from(married == "Yes"));
        let amt5 = sample_tweedie(eta.exp(), PHI, POWER, &mut rng)?.round();
        let freq5 = if amt5 > 0.0 { rng.random_range(1..5) } else { 0 };
        let amt = if amt5 > 0.0 && rng.random_bool(0.3) { (amt5 * rng.random_range(0.1..0.6)).round() } else { 0.0 };

        let gap = |rng: &mut ChaCha8Rng, v: String| if rng.random_bool(0.04) { "?".to_string() } else { v };
        let age = rng.random_range(18..75).to_string();
        let age = gap(&mut rng, age);
        let yoj = rng.random_range(0..20).to_string();
        let yoj = gap(&mut rng, yoj);
        let income = gap(&mut rng, income.to_string());
        let home_val = gap(&mut rng, home_val.to_string());
        let job = if i == 57 { "" } else { job };
        w.write_record([
            format!("{:09}", 100_000_000 + i * 7_919),
            format!("{:02}/{:02}/{}", rng.random_range(1..13), rng.random_range(1..29), rng.random_range(1990..2000)),
            freq5.to_string(),
            amt5.to_string(),
            amt.to_string(),
            kids.to_string(),
            travtime.to_string(),
            car_use.into(),
            bluebook.to_string(),
            rng.random_range(1..15).to_string(),
            rng.random_range(1..5).to_string(),
            car_type.into(),
            red.into(),
            revoked.into(),
            mvr.to_string(),
            if amt > 0.0 { "Yes" } else { "No" }.into(),
            age,
            homekids.to_string(),
            yoj,
            income,
            gender.into(),
            married.into(),
            parent.into(),
            job.into(),
            edu.into(),
            home_val,
            rng.random_range(0..20).to_string(),
            area.into(),
        ])?;
    }
    w.flush()?;
    println!("wrote {}", out.display());
    Ok(())
}
