//! Reference elevation profiles used by the examples, benchmarks and tests.
//!
//! Each generator is deterministic; `data/courses/` holds the same profiles
//! as CSV.

use std::f64::consts::PI;

use crate::course::Course;

fn build(points: Vec<(f64, f64)>) -> Course {
    Course::from_points(points).expect("scenario profiles are valid")
}

/// Level road.
pub fn flat(length: f64) -> Course {
    build(vec![(0.0, 0.0), (length, 0.0)])
}

/// 4 km: level to 1.5 km, a 5% climb to 2.5 km, level to the finish.
pub fn ramp() -> Course {
    build(vec![(0.0, 0.0), (1500.0, 0.0), (2500.0, 50.0), (4000.0, 50.0)])
}

/// 4 km: a 6% climb, a long 9.5% descent, a second 6% climb, then level.
///
/// The descent is steep enough that speed sits at 20 m/s for most of it,
/// which is where easing off to recover reserve pays.
pub fn two_hill() -> Course {
    build(vec![
        (0.0, 0.0),
        (600.0, 0.0),
        (1300.0, 42.0),
        (2700.0, -91.0),
        (3500.0, -43.0),
        (4000.0, -43.0),
    ])
}

/// Rolling profile: three superposed sine waves sampled every 50 m.
pub fn rolling(length: f64, waves: &[(f64, f64, f64)]) -> Course {
    let n = (length / 50.0).round() as usize;
    let points = (0..=n)
        .map(|k| {
            let s = length * k as f64 / n as f64;
            let z = waves
                .iter()
                .map(|&(amp, wavelength, phase)| {
                    amp * ((2.0 * PI * s / wavelength + phase).sin() - phase.sin())
                })
                .sum();
            (s, z)
        })
        .collect();
    build(points)
}

/// 11 km rolling course standing in for an unpublished race profile.
pub fn hilly_11k() -> Course {
    rolling(11_000.0, &[(15.0, 3700.0, 0.3), (6.0, 1300.0, 1.1), (2.0, 470.0, 2.0)])
}

/// 18 km rolling course for full-size timing runs.
pub fn hilly_18k() -> Course {
    rolling(18_000.0, &[(18.0, 4500.0, 0.7), (6.0, 1500.0, 0.2), (2.0, 520.0, 1.4)])
}

/// Every shipped profile with its fixture file stem.
pub fn all() -> Vec<(&'static str, Course)> {
    vec![
        ("flat_4k", flat(4000.0)),
        ("ramp_4k", ramp()),
        ("two_hill_4k", two_hill()),
        ("hilly_11k", hilly_11k()),
        ("hilly_18k", hilly_18k()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_and_grades() {
        for (name, c) in all() {
            let max_grade = c.grades().iter().map(|g| g.tan().abs()).fold(0.0, f64::max);
            assert!(max_grade <= 0.1, "{name}: {max_grade}");
            assert_eq!(c.points()[0], (0.0, 0.0), "{name}");
        }
        assert_eq!(ramp().length(), 4000.0);
        assert_eq!(hilly_11k().length(), 11_000.0);
        assert_eq!(hilly_18k().length(), 18_000.0);
        let climb = ramp().grades()[1].tan();
        assert!((climb - 0.05).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(hilly_11k().content_hash(), hilly_11k().content_hash());
    }
}
