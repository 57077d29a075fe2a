//! Named benchmark scenarios.

use std::f64::consts::PI;

use super::{Background, BlinkSpec, ClusterGroup, CountDist, Scenario, ScenarioSpec, Shape};
use crate::error::{Error, Result};

pub const PRESET_NAMES: &[&str] = &[
    "scenario5",
    "scenario6",
    "scenario8",
    "scenario9",
    "scenario5_blink",
    "scenario6_blink",
    "scenario8_blink",
    "scenario9_blink",
    "c_shape",
    "ring",
    "npc",
    "nanocluster",
];

const SIGMA: f64 = 25.0;

fn gaussian(sigma: f64) -> Shape {
    Shape::Gaussian { sigma, sigma_max: None }
}

fn group(count: CountDist, molecules: CountDist, shape: Shape) -> ClusterGroup {
    ClusterGroup {
        count,
        molecules,
        shape,
        class_id: 1,
    }
}

fn spec(extent: f64, groups: Vec<ClusterGroup>, background: f64) -> ScenarioSpec {
    ScenarioSpec {
        extent: [extent, extent],
        cluster_groups: groups,
        background: Background::FractionOfTotal(background),
        min_cluster_separation: 0.0,
        placement_attempts: 10_000,
        seed: 0,
    }
}

fn benchmark(number: u32) -> ScenarioSpec {
    use CountDist::Fixed;
    let groups = match number {
        5 => vec![group(Fixed(100), Fixed(15), gaussian(SIGMA))],
        6 => vec![group(
            Fixed(20),
            Fixed(50),
            Shape::Ellipse {
                sigma_major: 45.0,
                aspect: 3.0,
            },
        )],
        8 => vec![
            group(Fixed(10), Fixed(5), gaussian(SIGMA)),
            group(Fixed(10), Fixed(15), gaussian(SIGMA)),
        ],
        _ => vec![
            group(Fixed(10), Fixed(15), gaussian(SIGMA)),
            group(Fixed(10), Fixed(135), gaussian(75.0)),
        ],
    };
    spec(2000.0, groups, 0.5)
}

fn blinking() -> BlinkSpec {
    BlinkSpec {
        mean_blinks: 4.5,
        localization_precision: 20.0,
        include_background: true,
    }
}

/// Scenario registered under `name`, see [`PRESET_NAMES`].
pub fn preset(name: &str) -> Result<Scenario> {
    let plain = |spec| Scenario { spec, blinking: None };
    let s = match name {
        "scenario5" => plain(benchmark(5)),
        "scenario6" => plain(benchmark(6)),
        "scenario8" => plain(benchmark(8)),
        "scenario9" => plain(benchmark(9)),
        "scenario5_blink" | "scenario6_blink" | "scenario8_blink" | "scenario9_blink" => Scenario {
            spec: benchmark(name[8..9].parse().expect("digit")),
            blinking: Some(blinking()),
        },
        "c_shape" | "ring" => {
            let ring = name == "ring";
            let (count, molecules, span, bg) = if ring {
                ((60, 70), (60, 80), 2.0 * PI, 0.07)
            } else {
                ((30, 60), (30, 60), PI, 0.06)
            };
            plain(spec(
                6400.0,
                vec![group(
                    CountDist::Uniform { min: count.0, max: count.1 },
                    CountDist::Uniform {
                        min: molecules.0,
                        max: molecules.1,
                    },
                    Shape::Arc {
                        radius: 250.0,
                        radial_sigma: 50.0,
                        arc_span: span,
                    },
                )],
                bg,
            ))
        }
        "npc" => {
            let mut s = spec(
                1250.0,
                vec![group(
                    CountDist::Uniform { min: 5, max: 9 },
                    CountDist::Uniform { min: 0, max: 80 },
                    Shape::npc(),
                )],
                0.03,
            );
            s.min_cluster_separation = 200.0;
            plain(s)
        }
        "nanocluster" => plain(spec(
            10_000.0,
            vec![group(
                CountDist::Uniform { min: 100, max: 300 },
                CountDist::Geometric { mean: 25.0 },
                Shape::Gaussian {
                    sigma: 25.0,
                    sigma_max: Some(40.0),
                },
            )],
            0.04,
        )),
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset {name:?}; known: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}
