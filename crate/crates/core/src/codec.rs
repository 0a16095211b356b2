//! Polar waypoint quantization with arithmetic residuals.
//!
//! A trajectory is a chain of steps, each given in its predecessor's frame.
//! For tokenization every step becomes `(psi, r, phi)`: `r` is the length of
//! the step, `psi` its direction and `phi` the new heading, both angles
//! measured in the frame of the trajectory's base pose. Angles are kept in
//! the base frame so that heading quantization does not compound along the
//! chain.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_positive, Pose2};

pub const PSI_BINS: u32 = 30;
pub const R_BINS: u32 = 32;
pub const PHI_BINS: u32 = 12;
pub const R_MAX: f64 = 0.2;
const R_SLACK: f64 = 1e-9;

pub const PSI_WIDTH: f64 = TAU / PSI_BINS as f64;
pub const R_WIDTH: f64 = R_MAX / R_BINS as f64;
pub const PHI_WIDTH: f64 = TAU / PHI_BINS as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("step {index}: distance {r} outside [0, {R_MAX}]")]
    OutOfRange { index: usize, r: f64 },
    #[error("bin index out of range: {0}")]
    BadBin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarStep {
    pub psi: f64,
    pub r: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizedStep {
    pub psi_bin: u32,
    pub r_bin: u32,
    pub phi_bin: u32,
    pub psi_res: f64,
    pub r_res: f64,
    pub phi_res: f64,
}

impl TokenizedStep {
    /// Copy with the fine residuals removed.
    pub fn coarse(&self) -> Self {
        Self {
            psi_res: 0.0,
            r_res: 0.0,
            phi_res: 0.0,
            ..*self
        }
    }

    pub fn check_bins(&self) -> Result<(), CodecError> {
        if self.psi_bin >= PSI_BINS || self.r_bin >= R_BINS || self.phi_bin >= PHI_BINS {
            return Err(CodecError::BadBin(format!("{self:?}")));
        }
        Ok(())
    }
}

fn quantize(value: f64, width: f64, bins: u32) -> (u32, f64) {
    let idx = ((value / width).floor().max(0.0) as u32).min(bins - 1);
    (idx, value - bin_center(idx, width))
}

fn bin_center(idx: u32, width: f64) -> f64 {
    (idx as f64 + 0.5) * width
}

pub fn encode_step(step: &PolarStep) -> Result<TokenizedStep, CodecError> {
    if !(step.r >= 0.0 && step.r <= R_MAX + R_SLACK) {
        return Err(CodecError::OutOfRange { index: 0, r: step.r });
    }
    let (psi_bin, psi_res) = quantize(wrap_positive(step.psi), PSI_WIDTH, PSI_BINS);
    let (r_bin, r_res) = quantize(step.r, R_WIDTH, R_BINS);
    let (phi_bin, phi_res) = quantize(wrap_positive(step.phi), PHI_WIDTH, PHI_BINS);
    Ok(TokenizedStep {
        psi_bin,
        r_bin,
        phi_bin,
        psi_res,
        r_res,
        phi_res,
    })
}

pub fn decode_step(tok: &TokenizedStep, use_residual: bool) -> PolarStep {
    let k = if use_residual { 1.0 } else { 0.0 };
    PolarStep {
        psi: bin_center(tok.psi_bin, PSI_WIDTH) + k * tok.psi_res,
        r: bin_center(tok.r_bin, R_WIDTH) + k * tok.r_res,
        phi: bin_center(tok.phi_bin, PHI_WIDTH) + k * tok.phi_res,
    }
}

/// Polar form of a predecessor-chained trajectory.
pub fn to_polar(steps: &[Pose2]) -> Vec<PolarStep> {
    let mut heading = 0.0;
    steps
        .iter()
        .map(|s| {
            let r = s.x.hypot(s.y);
            let psi = if r > 0.0 {
                wrap_positive(heading + s.y.atan2(s.x))
            } else {
                0.0
            };
            heading += s.heading;
            PolarStep {
                psi,
                r,
                phi: wrap_positive(heading),
            }
        })
        .collect()
}

pub fn encode_trajectory(steps: &[Pose2]) -> Result<Vec<TokenizedStep>, CodecError> {
    to_polar(steps)
        .iter()
        .enumerate()
        .map(|(i, p)| encode_step(p).map_err(|_| CodecError::OutOfRange { index: i, r: p.r }))
        .collect()
}

/// World-frame waypoints obtained by chaining decoded steps from `base`.
pub fn decode_trajectory(base: &Pose2, tokens: &[TokenizedStep], use_residual: bool) -> Vec<Pose2> {
    let (s, c) = base.heading.sin_cos();
    let mut x = base.x;
    let mut y = base.y;
    tokens
        .iter()
        .map(|t| {
            let p = decode_step(t, use_residual);
            let (sp, cp) = p.psi.sin_cos();
            let (lx, ly) = (p.r * cp, p.r * sp);
            x += c * lx - s * ly;
            y += s * lx + c * ly;
            Pose2::new(x, y, base.heading + p.phi)
        })
        .collect()
}

/// Worst-case final position error of a decoded trajectory without residuals.
pub fn coarse_position_bound(steps: &[PolarStep]) -> f64 {
    steps
        .iter()
        .map(|s| R_WIDTH / 2.0 + s.r * PSI_WIDTH / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::chain_to_world;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn r_example() {
        let t = encode_step(&PolarStep { psi: 0.0, r: 0.1, phi: 0.0 }).unwrap();
        assert_eq!(t.r_bin, 16);
        assert!((t.r_res + 0.003125).abs() < 1e-15);
        assert_eq!(t.psi_bin, 0);
        assert!((t.psi_res + PI / 30.0).abs() < 1e-15);
        let d = decode_step(&t, false);
        assert!((d.r - 0.103125).abs() < 1e-15);
    }

    #[test]
    fn rejects_long_steps() {
        assert!(encode_step(&PolarStep { psi: 0.0, r: 0.2 + 1e-6, phi: 0.0 }).is_err());
        assert!(encode_step(&PolarStep { psi: 0.0, r: -0.01, phi: 0.0 }).is_err());
        let t = encode_step(&PolarStep { psi: 0.0, r: 0.2, phi: 0.0 }).unwrap();
        assert_eq!(t.r_bin, 31);
        let steps = vec![Pose2::new(0.1, 0.0, 0.0), Pose2::new(0.3, 0.0, 0.0)];
        assert_eq!(
            encode_trajectory(&steps),
            Err(CodecError::OutOfRange { index: 1, r: 0.3 })
        );
    }

    #[test]
    fn sweep_residual_bounds() {
        let n = 100_000;
        for i in 0..n {
            let u = i as f64 / n as f64;
            let t = encode_step(&PolarStep { psi: u * TAU, r: u * R_MAX, phi: u * TAU }).unwrap();
            assert!(t.psi_res.abs() <= PSI_WIDTH / 2.0 + 1e-12);
            assert!(t.r_res.abs() <= R_WIDTH / 2.0 + 1e-12);
            assert!(t.phi_res.abs() <= PHI_WIDTH / 2.0 + 1e-12);
        }
    }

    #[test]
    fn straight_and_zero_trajectories() {
        let steps = vec![Pose2::new(0.1, 0.0, 0.0); 12];
        let toks = encode_trajectory(&steps).unwrap();
        assert!(toks.iter().all(|t| *t == toks[0]));
        assert_eq!((toks[0].psi_bin, toks[0].r_bin, toks[0].phi_bin), (0, 16, 0));
        let base = Pose2::new(2.0, -1.0, 0.7);
        let zero = encode_trajectory(&vec![Pose2::identity(); 12]).unwrap();
        assert!(zero.iter().all(|t| t.r_bin == 0));
        for p in decode_trajectory(&base, &zero, true) {
            assert!(p.distance_to(&base) < 1e-15 && (p.heading - base.heading).abs() < 1e-15);
        }
    }

    fn chained() -> impl Strategy<Value = Vec<Pose2>> {
        prop::collection::vec((0.0..0.2f64, -PI..PI, -0.5..0.5f64), 12).prop_map(|v| {
            v.into_iter()
                .map(|(r, a, h)| Pose2::new(r * a.cos(), r * a.sin(), h))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn step_roundtrip(psi in 0.0..TAU, r in 0.0..=R_MAX, phi in 0.0..TAU) {
            let s = PolarStep { psi, r, phi };
            let d = decode_step(&encode_step(&s).unwrap(), true);
            prop_assert!((d.psi - psi).abs() <= 1e-12);
            prop_assert!((d.r - r).abs() <= 1e-12);
            prop_assert!((d.phi - phi).abs() <= 1e-12);
        }

        #[test]
        fn trajectory_roundtrip(steps in chained(), bx in -5.0..5.0f64, by in -5.0..5.0f64, bh in -PI..PI) {
            let base = Pose2::new(bx, by, bh);
            let world = chain_to_world(&base, &steps);
            let toks = encode_trajectory(&steps).unwrap();
            let fine = decode_trajectory(&base, &toks, true);
            for (a, b) in fine.iter().zip(&world) {
                prop_assert!(a.distance_to(b) < 1e-9);
                prop_assert!(crate::geometry::wrap_angle(a.heading - b.heading).abs() < 1e-9);
            }
            let coarse = decode_trajectory(&base, &toks, false);
            let bound = coarse_position_bound(&to_polar(&steps));
            prop_assert!(coarse.last().unwrap().distance_to(world.last().unwrap()) <= bound + 1e-12);
        }
    }
}
