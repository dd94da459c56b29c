//! Rider physiology: anaerobic energy expenditure/recovery and the fatigue- and
//! cadence-dependent maximal power surface.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kvfile::KvFile;

/// Keys of the rider parameter file, in file order.
pub const RIDER_KEYS: [&str; 8] = [
    "cp",
    "awc",
    "rec_a",
    "rec_b",
    "alpha",
    "alpha_omega",
    "omega_max_f",
    "mass_rider",
];

/// Raw field values, unchecked. Turn into [`RiderParams`] with [`RiderParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderValues {
    /// Critical power, W.
    pub cp: f64,
    /// Anaerobic work capacity, J.
    pub awc: f64,
    /// Slope of the adjusted recovery power line (dimensionless).
    pub rec_a: f64,
    /// Intercept of the adjusted recovery power line, W.
    pub rec_b: f64,
    /// Peak-power gain per joule of remaining anaerobic energy, 1/s.
    pub alpha: f64,
    /// Maximal-cadence gain per joule, rpm/J.
    pub alpha_omega: f64,
    /// Maximal cadence with anaerobic energy fully depleted, rpm.
    pub omega_max_f: f64,
    /// Rider body mass, kg.
    pub mass_rider: f64,
}

/// Validated per-rider physiological constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiderParams {
    v: RiderValues,
}

impl RiderParams {
    pub fn new(v: RiderValues) -> Result<Self> {
        let finite = [
            v.cp,
            v.awc,
            v.rec_a,
            v.rec_b,
            v.alpha,
            v.alpha_omega,
            v.omega_max_f,
            v.mass_rider,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("rider", "non-finite parameter"));
        }
        if v.cp <= 0.0 || v.awc <= 0.0 || v.mass_rider <= 0.0 {
            return Err(Error::invalid("rider", "cp, awc and mass_rider must be positive"));
        }
        if !(v.rec_a > 0.0 && v.rec_a < 1.0) {
            return Err(Error::invalid("rider", format!("rec_a={} outside (0, 1)", v.rec_a)));
        }
        // Resting recovery must be positive; above the recovery ceiling the
        // adjusted power may reach CP (two reference subjects do).
        if v.rec_b >= v.cp {
            return Err(Error::invalid(
                "rider",
                format!("rec_b={} must be below cp={}", v.rec_b, v.cp),
            ));
        }
        if v.alpha < 0.0 || v.alpha_omega < 0.0 || v.omega_max_f <= 0.0 {
            return Err(Error::invalid(
                "rider",
                "alpha, alpha_omega must be >= 0 and omega_max_f > 0",
            ));
        }
        Ok(Self { v })
    }

    pub fn values(&self) -> RiderValues {
        self.v
    }
    pub fn cp(&self) -> f64 {
        self.v.cp
    }
    pub fn awc(&self) -> f64 {
        self.v.awc
    }
    pub fn rec_a(&self) -> f64 {
        self.v.rec_a
    }
    pub fn rec_b(&self) -> f64 {
        self.v.rec_b
    }
    pub fn alpha(&self) -> f64 {
        self.v.alpha
    }
    pub fn alpha_omega(&self) -> f64 {
        self.v.alpha_omega
    }
    pub fn omega_max_f(&self) -> f64 {
        self.v.omega_max_f
    }
    pub fn mass_rider(&self) -> f64 {
        self.v.mass_rider
    }

    /// Highest power below CP at which anaerobic energy still recovers.
    pub fn recovery_ceiling(&self) -> f64 {
        ((self.v.cp - self.v.rec_b) / self.v.rec_a).min(self.v.cp)
    }

    /// Rate of change of remaining anaerobic energy, J/s.
    pub fn dw_dt(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::invalid("power", format!("u={u} must be >= 0")));
        }
        Ok(self.energy_rate(u))
    }

    /// [`dw_dt`](Self::dw_dt) without the sign check, for inner loops.
    #[inline]
    pub fn energy_rate(&self, u: f64) -> f64 {
        if u >= self.v.cp {
            -(u - self.v.cp)
        } else {
            -((self.v.rec_a * u + self.v.rec_b) - self.v.cp)
        }
    }

    /// Effective power governing recovery below CP.
    pub fn adjusted_power(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0 && u < self.v.cp) {
            return Err(Error::invalid(
                "power",
                format!("adjusted power needs 0 <= u < cp, got {u}"),
            ));
        }
        Ok(self.v.rec_a * u + self.v.rec_b)
    }

    fn check_energy(&self, w: f64) -> Result<()> {
        if w >= 0.0 && w <= self.v.awc {
            Ok(())
        } else {
            Err(Error::invalid(
                "energy",
                format!("w={w} outside [0, {}]", self.v.awc),
            ))
        }
    }

    /// Peak of the power-cadence parabola at remaining energy `w`.
    pub fn p_peak(&self, w: f64) -> Result<f64> {
        self.check_energy(w)?;
        Ok(self.peak_power(w))
    }

    /// Maximal cadence (rpm) at remaining energy `w`.
    pub fn omega_max(&self, w: f64) -> Result<f64> {
        self.check_energy(w)?;
        Ok(self.max_cadence(w))
    }

    /// Maximal power at cadence `omega` (rpm) and remaining energy `w`.
    ///
    /// Zero outside `[0, omega_max(w)]`.
    pub fn p_max_cadence(&self, omega: f64, w: f64) -> Result<f64> {
        self.check_energy(w)?;
        if !(omega >= 0.0) {
            return Err(Error::invalid("cadence", format!("omega={omega} must be >= 0")));
        }
        Ok(self.max_power_at(omega, w))
    }

    #[inline]
    pub(crate) fn peak_power(&self, w: f64) -> f64 {
        self.v.alpha * w + self.v.cp
    }

    #[inline]
    pub(crate) fn max_cadence(&self, w: f64) -> f64 {
        self.v.alpha_omega * w + self.v.omega_max_f
    }

    #[inline]
    pub(crate) fn max_power_at(&self, omega: f64, w: f64) -> f64 {
        let top = self.max_cadence(w);
        if omega >= top || omega <= 0.0 {
            return 0.0;
        }
        let peak = self.peak_power(w);
        -(4.0 * peak / (top * top)) * omega * omega + (4.0 * peak / top) * omega
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        Self::new(RiderValues {
            cp: kv.f64("cp")?,
            awc: kv.f64("awc")?,
            rec_a: kv.f64("rec_a")?,
            rec_b: kv.f64("rec_b")?,
            alpha: kv.f64("alpha")?,
            alpha_omega: kv.f64("alpha_omega")?,
            omega_max_f: kv.f64("omega_max_f")?,
            mass_rider: kv.f64("mass_rider")?,
        })
    }

    pub fn to_kv(&self) -> KvFile {
        let v = self.v;
        let mut kv = KvFile::new("rider");
        for (key, value) in RIDER_KEYS.iter().zip([
            v.cp,
            v.awc,
            v.rec_a,
            v.rec_b,
            v.alpha,
            v.alpha_omega,
            v.omega_max_f,
            v.mass_rider,
        ]) {
            kv.set(key, value);
        }
        kv
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }
}

/// Remaining anaerobic energy of a specific rider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    w: f64,
}

impl EnergyState {
    pub fn new(w: f64, rider: &RiderParams) -> Result<Self> {
        rider.check_energy(w)?;
        Ok(Self { w })
    }

    pub fn full(rider: &RiderParams) -> Self {
        Self { w: rider.awc() }
    }

    pub fn depleted() -> Self {
        Self { w: 0.0 }
    }

    pub fn joules(self) -> f64 {
        self.w
    }

    pub fn fraction(self, rider: &RiderParams) -> f64 {
        self.w / rider.awc()
    }
}

/// Subjects who completed the full laboratory protocol.
pub const REFERENCE_SUBJECTS: [u32; 6] = [6, 9, 11, 12, 14, 16];

/// Measured parameters of one reference subject.
pub fn reference_subject(id: u32) -> Result<RiderParams> {
    // (id, mass, cp, awc, a, b, alpha, alpha_omega, omega_max_f)
    const ROWS: [(u32, f64, f64, f64, f64, f64, f64, f64, f64); 6] = [
        (6, 79.0, 269.0, 12030.0, 0.11, 237.5, 0.037, 0.017, 139.0),
        (9, 63.0, 233.0, 10100.0, 0.09, 204.5, 0.036, 0.014, 158.0),
        (11, 95.0, 335.0, 15092.0, 0.08, 300.9, 0.039, 0.01, 163.0),
        (12, 70.0, 217.0, 5637.0, 0.12, 196.5, 0.046, 0.009, 142.0),
        (14, 74.0, 242.0, 7841.0, 0.08, 222.5, 0.044, 0.008, 164.0),
        (16, 51.0, 206.0, 9137.0, 0.2, 167.5, 0.025, 0.007, 154.0),
    ];
    let row = ROWS
        .iter()
        .find(|r| r.0 == id)
        .ok_or_else(|| Error::invalid("subject", format!("no reference subject {id}")))?;
    RiderParams::new(RiderValues {
        mass_rider: row.1,
        cp: row.2,
        awc: row.3,
        rec_a: row.4,
        rec_b: row.5,
        alpha: row.6,
        alpha_omega: row.7,
        omega_max_f: row.8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sub14() -> RiderParams {
        reference_subject(14).unwrap()
    }

    fn fig4_line() -> RiderParams {
        RiderParams::new(RiderValues {
            rec_a: 0.0772,
            rec_b: 222.49,
            ..sub14().values()
        })
        .unwrap()
    }

    #[test]
    fn dw_dt_branches() {
        let p = sub14();
        assert_eq!(p.dw_dt(342.0).unwrap(), -100.0);
        assert_eq!(p.dw_dt(242.0).unwrap(), 0.0);
        // -(0.08 * 89.71 + 222.5 - 242)
        assert_abs_diff_eq!(p.dw_dt(89.71).unwrap(), 12.3232, epsilon = 1e-9);
        assert!(p.dw_dt(-1.0).is_err());
        assert!(p.dw_dt(f64::NAN).is_err());
    }

    #[test]
    fn switch_discontinuity_at_cp() {
        let p = sub14();
        let below = p.energy_rate(242.0 - 1e-9);
        assert_abs_diff_eq!(below, 242.0 - (0.08 * 242.0 + 222.5), epsilon = 1e-6);
        assert_abs_diff_eq!(below, 0.14, epsilon = 1e-6);
    }

    #[test]
    fn adjusted_power_line() {
        let p = fig4_line();
        assert_abs_diff_eq!(p.adjusted_power(89.71).unwrap(), 229.4156, epsilon = 1e-3);
        assert_eq!(p.adjusted_power(0.0).unwrap(), 222.49);
        assert_abs_diff_eq!(p.adjusted_power(201.07).unwrap(), 238.0126, epsilon = 1e-3);
        assert!(p.adjusted_power(242.0).is_err());
        assert!(p.adjusted_power(-0.1).is_err());
    }

    #[test]
    fn peak_power_and_cadence() {
        let p = sub14();
        assert_eq!(p.p_peak(0.0).unwrap(), 242.0);
        assert_abs_diff_eq!(p.p_peak(7841.0).unwrap(), 587.004, epsilon = 1e-9);
        assert_abs_diff_eq!(p.p_peak(3920.5).unwrap(), 414.502, epsilon = 1e-9);
        assert!(p.p_peak(7841.5).is_err());
        assert!(p.p_peak(-1.0).is_err());

        assert_eq!(p.omega_max(0.0).unwrap(), 164.0);
        assert_abs_diff_eq!(p.omega_max(7841.0).unwrap(), 226.728, epsilon = 1e-9);
        assert_eq!(reference_subject(11).unwrap().omega_max(0.0).unwrap(), 163.0);
    }

    #[test]
    fn parabola_roots_and_vertex() {
        let p = sub14();
        for w in [0.0, 1000.0, 7841.0] {
            let top = p.omega_max(w).unwrap();
            let peak = p.p_peak(w).unwrap();
            assert_abs_diff_eq!(p.p_max_cadence(top / 2.0, w).unwrap(), peak, epsilon = 1e-9);
            assert_eq!(p.p_max_cadence(0.0, w).unwrap(), 0.0);
            assert_eq!(p.p_max_cadence(top, w).unwrap(), 0.0);
            assert_eq!(p.p_max_cadence(top * 1.5, w).unwrap(), 0.0);
        }
        assert!(p.p_max_cadence(-1.0, 0.0).is_err());
    }

    #[test]
    fn all_reference_subjects_construct() {
        for id in REFERENCE_SUBJECTS {
            let p = reference_subject(id).unwrap();
            assert!(p.energy_rate(0.0) > 0.0, "subject {id} recovers at rest");
        }
        assert!(reference_subject(7).is_err());
    }

    #[test]
    fn recovery_ceiling_below_cp_for_two_subjects() {
        // a*CP + b exceeds CP for these rows, so "recovery" turns into
        // slow depletion just below CP.
        for (id, ceiling) in [(12, (217.0 - 196.5) / 0.12), (16, (206.0 - 167.5) / 0.2)] {
            let p = reference_subject(id).unwrap();
            assert_abs_diff_eq!(p.recovery_ceiling(), ceiling, epsilon = 1e-9);
            assert!(p.energy_rate(ceiling + 1.0) < 0.0);
        }
        for id in [6, 9, 11, 14] {
            let p = reference_subject(id).unwrap();
            assert_eq!(p.recovery_ceiling(), p.cp());
        }
    }

    #[test]
    fn constructor_rejects_bad_values() {
        let ok = sub14().values();
        for bad in [
            RiderValues { cp: 0.0, ..ok },
            RiderValues { awc: -1.0, ..ok },
            RiderValues { rec_a: 1.0, ..ok },
            RiderValues { rec_a: 0.0, ..ok },
            RiderValues { rec_b: 242.0, ..ok },
            RiderValues { alpha: -0.1, ..ok },
            RiderValues { omega_max_f: 0.0, ..ok },
            RiderValues { mass_rider: f64::NAN, ..ok },
        ] {
            assert!(RiderParams::new(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn kv_round_trip() {
        let p = reference_subject(6).unwrap();
        let back = RiderParams::from_kv(&KvFile::parse("x", &p.to_kv().to_string()).unwrap())
            .unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn energy_state_bounds() {
        let p = sub14();
        assert!(EnergyState::new(-1.0, &p).is_err());
        assert!(EnergyState::new(8000.0, &p).is_err());
        assert_eq!(EnergyState::full(&p).fraction(&p), 1.0);
        assert_eq!(EnergyState::depleted().joules(), 0.0);
    }
}
