//! Fixtures shared by the benchmarks.

use sppc_core::{synthesize, Complex64, HorizonData, Matrix, PlantModel, SynthesisParams, SynthesisResult};

/// Unstable fourth-order plant with a complex pole pair, in companion form.
pub fn reference_plant() -> PlantModel {
    let poles = [
        Complex64::new(-1.4396, 0.0),
        Complex64::new(1.0808, 0.6664),
        Complex64::new(1.0808, -0.6664),
        Complex64::new(0.0220, 0.0),
    ];
    PlantModel::from_poles(&poles).expect("valid poles")
}

/// Third-order plant with real poles `0.9, 1.2, -1.1`.
pub fn small_plant() -> PlantModel {
    let poles = [
        Complex64::new(0.9, 0.0),
        Complex64::new(1.2, 0.0),
        Complex64::new(-1.1, 0.0),
    ];
    PlantModel::from_poles(&poles).expect("valid poles")
}

pub fn synthesized(plant: &PlantModel, horizon: usize) -> (SynthesisResult, HorizonData) {
    let params = SynthesisParams {
        horizon,
        ..SynthesisParams::default()
    };
    synthesize(plant, &Matrix::identity(plant.dim()), &params).expect("synthesis")
}
