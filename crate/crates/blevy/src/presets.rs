//! Named model configurations covering the main regimes: pure counting,
//! deterministic and random displacements, diffusive and jumpy motion, and
//! an offspring law with positive extinction probability.

use crate::levy::{JumpLaw, LevySpec};
use crate::model::{Coupling, DisplacementLaw, ModelConfig, OffspringLaw};

/// Names of all bundled presets, in listing order.
pub const PRESET_NAMES: [&str; 6] = [
    "generation",
    "cancer-poisson",
    "phylo-walk",
    "brownian-only",
    "null",
    "twopoint",
];

fn base() -> ModelConfig {
    ModelConfig {
        lambda: 1.0,
        offspring: OffspringLaw::Deterministic { k: 2 },
        displacement: DisplacementLaw::Zero,
        coupling: Coupling::Iid,
        motion: LevySpec::zero(),
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<ModelConfig> {
    let config = match name {
        // Unit displacement per branch: a particle's position is its
        // generation number, so every moment has a clean closed form.
        "generation" => ModelConfig {
            displacement: DisplacementLaw::Deterministic { d: 1.0 },
            ..base()
        },
        // Poisson-distributed mutation counts gained at each division.
        "cancer-poisson" => ModelConfig {
            displacement: DisplacementLaw::Poisson { mean: 1.0 },
            ..base()
        },
        // Traits diffuse and jump along lineages; no displacement at birth.
        "phylo-walk" => ModelConfig {
            motion: LevySpec {
                drift: 0.0,
                diffusion_var: 0.5,
                jump_rate: 1.0,
                jump: JumpLaw::Gaussian {
                    mean: 0.0,
                    var: 1.0,
                },
            },
            ..base()
        },
        // Standard Brownian motion only: the smallest model on which the
        // two second-moment variants disagree.
        "brownian-only" => ModelConfig {
            motion: LevySpec {
                diffusion_var: 1.0,
                ..LevySpec::zero()
            },
            ..base()
        },
        // Pure binary branching with no spatial structure at all.
        "null" => base(),
        // Offspring 0 or 2: supercritical but extinction happens a quarter
        // of the time, for survival-conditioned experiments.
        "twopoint" => ModelConfig {
            offspring: OffspringLaw::TwoPoint { p0: 0.2, k: 2 },
            displacement: DisplacementLaw::Deterministic { d: 1.0 },
            ..base()
        },
        _ => return None,
    };
    Some(config)
}

/// One-line description of a preset, for listings.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "generation" => "binary split, unit displacement; position = generation number",
        "cancer-poisson" => "binary split, Poisson(1) mutation count per division",
        "phylo-walk" => "binary split, jump-diffusion trait motion along lineages",
        "brownian-only" => "binary split, unit Brownian motion, no displacement",
        "null" => "binary split, no spatial structure",
        "twopoint" => "0-or-2 offspring with extinction probability 1/4, unit displacement",
        _ => return None,
    })
}
