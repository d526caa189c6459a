//! Two-phase Potts segmentation: a double-well relaxation (Model I) and a
//! threshold-dynamics relaxation with entropy penalty (Model II).

mod force;
mod model1;
mod model2;
mod segment;

pub use force::{region_force, update_means, RegionForce, RegionMeans, DEFAULT_UPDATE_EVERY};
pub use model1::{energy_model1, model1_step, Model1Energy, ModelIConfig};
pub use model2::{
    approx_perimeter, energy_model2, model2_step, Model2Energy, ModelIIConfig, PerimeterPrefactor,
};
pub use segment::{
    initial_field, model2_chan_vese_weight, segment, segment_observed, EnergyRow, EnergyTrace,
    ModelConfig, SegmentOutput, INIT_GAMMA,
};

use serde::{Deserialize, Serialize};

use crate::field::ScalarField;

/// Starting iterate `u^0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    /// Input image rescaled to `[γ, 1-γ]`.
    #[default]
    NormalizedInput,
    Constant {
        value: f64,
    },
    /// A given field in `[0,1]`, mapped affinely into `[γ, 1-γ]`.
    Field {
        field: ScalarField,
    },
}
