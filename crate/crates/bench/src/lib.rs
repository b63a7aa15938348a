//! Fixed datasets for the benchmarks, drawn from the simulation scenarios.

use nalgebra::DMatrix;
use selinf::simbench::{generate_design, generate_response, SimScenario};
use selinf::FamilySpec;

/// Design (without the ones column) and response of repetition 0.
pub fn fixture(scenario: &SimScenario) -> (DMatrix<f64>, Vec<f64>) {
    let seed = scenario.repetition_seed(0);
    let x = generate_design(scenario, seed).expect("valid scenario");
    let y = generate_response(&x, scenario, seed).expect("valid scenario").y;
    (x.remove_column(0), y)
}

/// The reference scenario shape at a smaller `n`.
pub fn scenario(family: FamilySpec, n: usize) -> SimScenario {
    SimScenario {
        n,
        ..SimScenario::reference(family, 17)
    }
}

pub fn poisson(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    fixture(&scenario(FamilySpec::poisson(), n))
}

pub fn negbin(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    fixture(&scenario(FamilySpec::negbin(4.5).expect("valid size"), n))
}
