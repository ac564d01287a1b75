//! Closed-form physics of a two-level emitter driven by phase-locked pulse
//! pairs: the relative-phase waveform, the excited-state population, the
//! coherence visibility and the white-noise dephasing-time models.
//!
//! Pulses are impulsive: only their areas and the delay between them enter.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default modulation frequency of the relative phase, Hz.
pub const DEFAULT_MOD_FREQUENCY: f64 = 1_000.0;
/// Default delay between the two pulses of a pair, s.
pub const DEFAULT_INTER_PULSE_DELAY: f64 = 100e-12;
/// Default dephasing time of a single molecule, s.
pub const DEFAULT_MOLECULE_T2: f64 = 1e-9;
/// Default dephasing time of a quantum dot, s.
pub const DEFAULT_QD_T2: f64 = 1e-12;

/// A pair of excitation pulses whose relative phase is swept as a linear
/// sawtooth from -π to π at `mod_frequency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePairDrive {
    pub theta1: f64,
    pub theta2: f64,
    pub inter_pulse_delay: f64,
    pub mod_frequency: f64,
}

impl PulsePairDrive {
    pub fn new(theta1: f64, theta2: f64, inter_pulse_delay: f64, mod_frequency: f64) -> Result<Self> {
        check_pulse_area("theta1", theta1)?;
        check_pulse_area("theta2", theta2)?;
        if !(inter_pulse_delay >= 0.0 && inter_pulse_delay.is_finite()) {
            return Err(Error::domain("inter_pulse_delay", inter_pulse_delay, ">= 0"));
        }
        if !(mod_frequency > 0.0 && mod_frequency.is_finite()) {
            return Err(Error::domain("mod_frequency", mod_frequency, "> 0"));
        }
        Ok(Self {
            theta1,
            theta2,
            inter_pulse_delay,
            mod_frequency,
        })
    }

    /// Equal pulse areas, the configuration used for photon simulation.
    pub fn equal_pulses(theta: f64, inter_pulse_delay: f64, mod_frequency: f64) -> Result<Self> {
        Self::new(theta, theta, inter_pulse_delay, mod_frequency)
    }

    /// Angular modulation frequency ω = 2π·f_mod.
    pub fn omega_mod(&self) -> f64 {
        TAU * self.mod_frequency
    }

    pub fn relative_phase(&self, t: f64) -> f64 {
        relative_phase(t, self)
    }

    /// Visibility of an emitter with dephasing time `t2` under this drive.
    pub fn coherence(&self, t2: f64) -> Result<CoherenceParams> {
        CoherenceParams::from_drive(self, t2)
    }
}

impl Default for PulsePairDrive {
    fn default() -> Self {
        Self {
            theta1: PI / 2.0,
            theta2: PI / 2.0,
            inter_pulse_delay: DEFAULT_INTER_PULSE_DELAY,
            mod_frequency: DEFAULT_MOD_FREQUENCY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub dephasing_time: f64,
    pub visibility: f64,
}

impl CoherenceParams {
    pub fn from_drive(drive: &PulsePairDrive, dephasing_time: f64) -> Result<Self> {
        Ok(Self {
            dephasing_time,
            visibility: visibility(drive.inter_pulse_delay, dephasing_time)?,
        })
    }
}

/// How the emitter's transition dipole couples to environmental field noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleGeometry {
    /// Rigid dipole along one axis (organic dye molecule).
    SingleAxis,
    /// Independent dipole components along x, y and z (quantum dot).
    IsotropicThreeAxis,
}

/// White-noise environment with per-axis spectral density `noise_density` (s⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingEnvironment {
    pub geometry: DipoleGeometry,
    pub noise_density: f64,
}

impl DephasingEnvironment {
    pub fn new(geometry: DipoleGeometry, noise_density: f64) -> Result<Self> {
        if !(noise_density > 0.0 && noise_density.is_finite()) {
            return Err(Error::domain("noise_density", noise_density, "> 0"));
        }
        Ok(Self {
            geometry,
            noise_density,
        })
    }

    /// Total dephasing rate 1/T2*: one noisy axis, or three independent ones.
    pub fn dephasing_rate(&self) -> f64 {
        match self.geometry {
            DipoleGeometry::SingleAxis => self.noise_density,
            DipoleGeometry::IsotropicThreeAxis => 3.0 * self.noise_density,
        }
    }
}

/// Sawtooth relative phase Δφ(t) = -π + 2π·frac(t·f_mod), in [-π, π).
pub fn relative_phase(t: f64, drive: &PulsePairDrive) -> f64 {
    let cycles = t * drive.mod_frequency;
    let frac = cycles - cycles.floor();
    -PI + TAU * frac
}

/// Excited-state population after two pulses of unequal area with no dephasing.
pub fn excited_population_general(theta1: f64, theta2: f64, delta_phi: f64) -> Result<f64> {
    check_pulse_area("theta1", theta1)?;
    check_pulse_area("theta2", theta2)?;
    let p = 0.5 * (1.0 - theta1.cos() * theta2.cos() + theta1.sin() * theta2.sin() * delta_phi.cos());
    Ok(p.clamp(0.0, 1.0))
}

/// Excited-state population for equal pulse areas θ and coherence visibility V:
/// ½·sin²θ·(1 + V·cosΔφ).
pub fn excited_population(theta: f64, delta_phi: f64, visibility: f64) -> Result<f64> {
    check_pulse_area("theta", theta)?;
    check_visibility(visibility)?;
    Ok(population_unchecked(theta, delta_phi, visibility))
}

#[inline]
pub(crate) fn population_unchecked(theta: f64, delta_phi: f64, visibility: f64) -> f64 {
    let s = theta.sin();
    0.5 * s * s * (1.0 + visibility * delta_phi.cos())
}

/// V = exp(-Δt/T2*).
pub fn visibility(delta_t: f64, dephasing_time: f64) -> Result<f64> {
    if !(dephasing_time > 0.0) {
        return Err(Error::domain("dephasing_time", dephasing_time, "> 0"));
    }
    if !(delta_t >= 0.0 && delta_t.is_finite()) {
        return Err(Error::domain("delta_t", delta_t, ">= 0"));
    }
    Ok((-delta_t / dephasing_time).exp())
}

/// T2* of an emitter in a white-noise environment.
pub fn dephasing_time(env: &DephasingEnvironment) -> f64 {
    1.0 / env.dephasing_rate()
}

pub(crate) fn check_pulse_area(name: &'static str, theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::domain(name, theta, "[0, π]"))
    }
}

pub(crate) fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain("visibility", v, "[0, 1]"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn drive_1khz() -> PulsePairDrive {
        PulsePairDrive::default()
    }

    #[test]
    fn sawtooth_phase_examples() {
        let d = drive_1khz();
        assert_abs_diff_eq!(relative_phase(0.0, &d), -PI);
        assert_abs_diff_eq!(relative_phase(0.0005, &d), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_phase(0.001, &d), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_phase(0.00025, &d), -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn general_population_examples() {
        let h = PI / 2.0;
        assert_abs_diff_eq!(excited_population_general(h, h, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(excited_population_general(h, h, PI).unwrap(), 0.0, epsilon = 1e-15);
        for dphi in [0.0, 0.3, 1.7, PI] {
            assert_abs_diff_eq!(excited_population_general(PI, 0.0, dphi).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert!(excited_population_general(3.5, 0.0, 0.0).is_err());
        assert!(excited_population_general(0.0, -0.1, 0.0).is_err());
    }

    #[test]
    fn dephased_population_examples() {
        let h = PI / 2.0;
        assert_abs_diff_eq!(excited_population(h, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        for dphi in [-3.0, 0.0, 1.0, 2.5] {
            assert_abs_diff_eq!(excited_population(h, dphi, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(excited_population(h, h, 0.8).unwrap(), 0.5, epsilon = 1e-15);
        assert!(excited_population(h, 0.0, 1.2).is_err());
        assert!(excited_population(h, 0.0, -0.01).is_err());
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(visibility(0.0, 1e-9).unwrap(), 1.0);
        assert_abs_diff_eq!(visibility(1e-9, 1e-9).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(visibility(100e-12, 1e-9).unwrap(), 0.904_837_418_035_959_6, epsilon = 1e-12);
        assert!(visibility(1e-10, 0.0).is_err());
        assert!(visibility(1e-10, -1.0).is_err());
    }

    #[test]
    fn dephasing_time_examples() {
        let sm = DephasingEnvironment::new(DipoleGeometry::SingleAxis, 1e9).unwrap();
        assert_abs_diff_eq!(dephasing_time(&sm), 1e-9, epsilon = 1e-24);
        let qd = DephasingEnvironment::new(DipoleGeometry::IsotropicThreeAxis, 3.33e11).unwrap();
        assert_abs_diff_eq!(dephasing_time(&qd), 1e-12, epsilon = 2e-15);
        assert!(DephasingEnvironment::new(DipoleGeometry::SingleAxis, 0.0).is_err());
    }

    #[test]
    fn default_regimes() {
        let d = drive_1khz();
        let molecule = d.coherence(DEFAULT_MOLECULE_T2).unwrap();
        let qd = d.coherence(DEFAULT_QD_T2).unwrap();
        assert!(molecule.visibility > 0.9);
        assert!(qd.visibility < 1e-40);
    }

    proptest! {
        #[test]
        fn pair_sum_is_conserved(theta in 0.0..=PI, dphi in -10.0f64..10.0, v in 0.0..=1.0f64) {
            let a = excited_population(theta, dphi, v).unwrap();
            let b = excited_population(theta, dphi + PI, v).unwrap();
            let s = theta.sin();
            prop_assert!((a + b - s * s).abs() < 1e-12);
        }

        #[test]
        fn populations_are_probabilities(t1 in 0.0..=PI, t2 in 0.0..=PI, dphi in -10.0f64..10.0, v in 0.0..=1.0f64) {
            let g = excited_population_general(t1, t2, dphi).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            let p = excited_population(t1, dphi, v).unwrap();
            let s = t1.sin();
            prop_assert!(p >= 0.0 && p <= s * s + 1e-15);
        }

        #[test]
        fn equal_pulses_reduce_to_full_visibility(theta in 0.0..=PI, dphi in -10.0f64..10.0) {
            let g = excited_population_general(theta, theta, dphi).unwrap();
            let p = excited_population(theta, dphi, 1.0).unwrap();
            prop_assert!((g - p).abs() < 1e-12);
        }

        #[test]
        fn visibility_is_monotone(dt in 0.0f64..1e-9, extra in 1e-12f64..1e-9, t2 in 1e-11f64..1e-8, grow in 1.0001f64..10.0) {
            let v = visibility(dt, t2).unwrap();
            let later = visibility(dt + extra, t2).unwrap();
            let longer = visibility(dt + extra, t2 * grow).unwrap();
            prop_assert!(later < v);
            prop_assert!(longer > later);
        }

        #[test]
        fn isotropic_dephasing_is_three_times_faster(s in 1e3f64..1e14) {
            let single = dephasing_time(&DephasingEnvironment::new(DipoleGeometry::SingleAxis, s).unwrap());
            let iso = dephasing_time(&DephasingEnvironment::new(DipoleGeometry::IsotropicThreeAxis, s).unwrap());
            prop_assert!((iso * 3.0 - single).abs() <= 1e-15 * single);
        }

        #[test]
        fn sawtooth_stays_in_range(t in 0.0f64..10.0, f in 1.0f64..1e5) {
            let d = PulsePairDrive::new(PI / 2.0, PI / 2.0, 0.0, f).unwrap();
            let p = relative_phase(t, &d);
            prop_assert!((-PI..PI).contains(&p));
        }
    }
}
