//! Named reference scenarios, expressed as ready-to-run configs.

use crate::config::{ProfileSpec, RunConfig, Tolerances};
use crate::grid::OmegaShape;
use crate::profiles::exterior::ExteriorTermSpec;
use serde_json::json;

pub const NAMES: [&str; 3] = ["bump_1d", "two_bump_1d", "ball_2d"];

pub fn named(name: &str) -> Option<RunConfig> {
    let cfg = match name {
        "bump_1d" => RunConfig {
            dim: 1,
            s: 0.25,
            half_width: 4.0,
            spacing: 1.0 / 64.0,
            omega: OmegaShape::Interval {
                bounds: [-1.0, 1.0],
            },
            exterior_data: vec![ExteriorTermSpec {
                profile: "smooth_bump".into(),
                params: json!({"center": [2.0], "radius": 0.75}),
            }],
            weight: ProfileSpec::named("gaussian"),
            supremand: ProfileSpec::named("identity"),
            p_schedule: default_schedule(),
            tolerances: Tolerances::default(),
            seed: 17,
            output_dir: None,
        },
        "two_bump_1d" => RunConfig {
            dim: 1,
            s: 0.25,
            half_width: 4.0,
            spacing: 1.0 / 64.0,
            omega: OmegaShape::Interval {
                bounds: [-1.0, 1.0],
            },
            exterior_data: vec![
                ExteriorTermSpec {
                    profile: "smooth_bump".into(),
                    params: json!({"center": [2.0], "radius": 0.75, "amplitude": 1.0}),
                },
                ExteriorTermSpec {
                    profile: "smooth_bump".into(),
                    params: json!({"center": [-2.0], "radius": 0.75, "amplitude": -1.0}),
                },
            ],
            weight: ProfileSpec::named("gaussian"),
            supremand: ProfileSpec::named("identity"),
            p_schedule: default_schedule(),
            tolerances: Tolerances::default(),
            seed: 17,
            output_dir: None,
        },
        "ball_2d" => RunConfig {
            dim: 2,
            s: 0.5,
            half_width: 1.0,
            spacing: 1.0 / 32.0,
            omega: OmegaShape::Ball {
                center: vec![0.0, 0.0],
                radius: 0.4,
            },
            exterior_data: vec![ExteriorTermSpec {
                profile: "smooth_bump".into(),
                params: json!({"center": [0.7, 0.0], "radius": 0.25}),
            }],
            weight: ProfileSpec::named("gaussian"),
            supremand: ProfileSpec::named("identity"),
            p_schedule: default_schedule(),
            tolerances: Tolerances::default(),
            seed: 17,
            output_dir: None,
        },
        _ => return None,
    };
    Some(cfg)
}

fn default_schedule() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
}
