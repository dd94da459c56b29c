//! Bicycle longitudinal dynamics in the distance domain.
//!
//! Forces are expressed as specific forces (m/s², force divided by the
//! effective mass). The road model has grade, rolling and aerodynamic terms;
//! the trainer model drops drag and downhill assist and adds a constant
//! calibrated resistance.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kvfile::KvFile;
use crate::rider::RiderParams;

/// Constant resistance imposed by the laboratory trainer, N.
pub const TRAINER_RESISTANCE_N: f64 = 15.5;

/// Effective (rotational) mass is this factor times the total mass.
pub const INERTIA_FACTOR: f64 = 1.014;

/// Largest relative velocity change allowed in one integration sub-step.
const MAX_REL_DV: f64 = 0.1;
/// A step still unfinished after this many sub-steps is a stall.
const MAX_SUBSTEPS: usize = 4096;
/// Speed below which a sub-stepped transition counts as stalled, m/s.
const STALL_SPEED: f64 = 0.05;

const RPM_PER_RAD_S: f64 = 60.0 / (2.0 * PI);

/// Bicycle and environment constants that do not depend on the rider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeParams {
    pub mass_bike: f64,
    pub c_d: f64,
    pub area: f64,
    pub rho: f64,
    pub c_r: f64,
    pub g: f64,
    /// Chainring/cog ratios; wheel speed is `g_i * r_rear * omega`.
    pub gears: Vec<f64>,
    pub r_rear: f64,
}

impl Default for BikeParams {
    fn default() -> Self {
        let gears = [50.0, 39.0, 30.0]
            .iter()
            .flat_map(|ring| {
                [12.0, 13.0, 14.0, 15.0, 17.0, 19.0, 21.0]
                    .iter()
                    .map(move |cog| ring / cog)
            })
            .collect();
        Self {
            mass_bike: 8.0,
            c_d: 0.8,
            area: 0.4,
            rho: 1.2,
            c_r: 0.004,
            g: 9.81,
            gears,
            r_rear: 0.335,
        }
    }
}

impl BikeParams {
    /// Reads a bike file; absent keys keep their default values.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let d = Self::default();
        let get = |key: &str, default: f64| kv.opt_f64(key).map(|v| v.unwrap_or(default));
        let gears = if kv.contains("gears") {
            kv.f64_list("gears")?
        } else {
            d.gears.clone()
        };
        for key in kv.keys() {
            if !BIKE_KEYS.contains(&key) {
                return Err(Error::Parse {
                    source_name: kv.name().to_string(),
                    line: 0,
                    reason: format!("unknown bike key `{key}`"),
                });
            }
        }
        Ok(Self {
            mass_bike: get("mass_bike", d.mass_bike)?,
            c_d: get("c_d", d.c_d)?,
            area: get("area", d.area)?,
            rho: get("rho", d.rho)?,
            c_r: get("c_r", d.c_r)?,
            g: get("g", d.g)?,
            gears,
            r_rear: get("r_rear", d.r_rear)?,
        })
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new("bike");
        kv.set("mass_bike", self.mass_bike);
        kv.set("c_d", self.c_d);
        kv.set("area", self.area);
        kv.set("rho", self.rho);
        kv.set("c_r", self.c_r);
        kv.set("g", self.g);
        let gears: Vec<String> = self.gears.iter().map(|g| g.to_string()).collect();
        kv.set("gears", gears.join(", "));
        kv.set("r_rear", self.r_rear);
        kv
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }
}

const BIKE_KEYS: [&str; 8] = ["mass_bike", "c_d", "area", "rho", "c_r", "g", "gears", "r_rear"];

/// Bike and environment constants combined with the rider's mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BikeEnvParams {
    bike: BikeParams,
    mass_total: f64,
    mass_effective: f64,
}

impl BikeEnvParams {
    pub fn new(bike: BikeParams, mass_rider: f64) -> Result<Self> {
        let coeffs = [bike.c_d, bike.area, bike.rho, bike.c_r, bike.g];
        if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("bike", "coefficients must be finite and >= 0"));
        }
        if !(bike.mass_bike >= 0.0 && mass_rider > 0.0) {
            return Err(Error::invalid("bike", "masses must be positive"));
        }
        if !(bike.r_rear > 0.0) {
            return Err(Error::invalid("bike", "r_rear must be positive"));
        }
        if bike.gears.is_empty() || bike.gears.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("bike", "gears must be non-empty and positive"));
        }
        let mass_total = bike.mass_bike + mass_rider;
        Ok(Self {
            bike,
            mass_total,
            mass_effective: INERTIA_FACTOR * mass_total,
        })
    }

    pub fn for_rider(bike: BikeParams, rider: &RiderParams) -> Result<Self> {
        Self::new(bike, rider.mass_rider())
    }

    pub fn bike(&self) -> &BikeParams {
        &self.bike
    }
    /// Bike plus rider mass `m_b`.
    pub fn mass_total(&self) -> f64 {
        self.mass_total
    }
    /// Effective mass `m`.
    pub fn mass_effective(&self) -> f64 {
        self.mass_effective
    }
    pub fn gears(&self) -> &[f64] {
        &self.bike.gears
    }

    /// Grade plus rolling specific force `(m_b/m) g (sin θ + c_r cos θ)`.
    pub fn grade_force(&self, theta: f64) -> f64 {
        self.mass_total / self.mass_effective
            * self.bike.g
            * (theta.sin() + self.bike.c_r * theta.cos())
    }

    fn drag_coeff(&self) -> f64 {
        0.5 * self.bike.c_d * self.bike.rho * self.bike.area / self.mass_effective
    }

    /// Road acceleration, m/s².
    pub fn accel(&self, v: f64, u: f64, theta: f64) -> Result<f64> {
        check_speed(v)?;
        Ok(self.resistance(DynamicsVariant::Road, theta).accel(v, u, self.mass_effective))
    }

    /// Trainer acceleration: no drag, downhill grade force clamped at zero,
    /// constant calibrated resistance.
    pub fn accel_computrainer(&self, v: f64, u: f64, theta: f64) -> Result<f64> {
        check_speed(v)?;
        Ok(self
            .resistance(DynamicsVariant::CompuTrainer, theta)
            .accel(v, u, self.mass_effective))
    }

    /// Power holding velocity constant on the road; negative on steep descents.
    pub fn u_cruise(&self, v: f64, theta: f64) -> Result<f64> {
        check_speed(v)?;
        Ok(self
            .resistance(DynamicsVariant::Road, theta)
            .cruise_power(v, self.mass_effective))
    }

    pub fn resistance(&self, variant: DynamicsVariant, theta: f64) -> Resistance {
        match variant {
            DynamicsVariant::Road => Resistance {
                constant: self.grade_force(theta),
                quadratic: self.drag_coeff(),
            },
            DynamicsVariant::CompuTrainer => Resistance {
                constant: self.grade_force(theta).max(0.0)
                    + TRAINER_RESISTANCE_N / self.mass_effective,
                quadratic: 0.0,
            },
        }
    }

    /// Maximal power over all gears at speed `v` and remaining energy `w`.
    pub fn u_max_velocity(&self, v: f64, w: f64, rider: &RiderParams) -> Result<f64> {
        check_speed(v)?;
        if !(w >= 0.0 && w <= rider.awc()) {
            return Err(Error::invalid("energy", format!("w={w} outside [0, {}]", rider.awc())));
        }
        Ok(self.max_power(v, w, rider))
    }

    #[inline]
    pub(crate) fn max_power(&self, v: f64, w: f64, rider: &RiderParams) -> f64 {
        let base = v / self.bike.r_rear * RPM_PER_RAD_S;
        self.bike
            .gears
            .iter()
            .map(|g| rider.max_power_at(base / g, w))
            .fold(0.0, f64::max)
    }

    /// Pedalling cadence (rpm) in gear `ratio` at speed `v`.
    pub fn cadence_rpm(&self, v: f64, ratio: f64) -> f64 {
        v / (ratio * self.bike.r_rear) * RPM_PER_RAD_S
    }
}

fn check_speed(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("velocity", format!("v={v} must be positive")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsVariant {
    #[default]
    Road,
    #[serde(rename = "computrainer")]
    CompuTrainer,
}

/// Resisting specific force `constant + quadratic * v^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resistance {
    pub constant: f64,
    pub quadratic: f64,
}

impl Resistance {
    #[inline]
    pub fn at(&self, v: f64) -> f64 {
        self.constant + self.quadratic * v * v
    }

    #[inline]
    pub fn accel(&self, v: f64, u: f64, mass: f64) -> f64 {
        u / (mass * v) - self.at(v)
    }

    #[inline]
    pub fn cruise_power(&self, v: f64, mass: f64) -> f64 {
        mass * v * self.at(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KinematicState {
    /// Distance travelled, m.
    pub s: f64,
    /// Velocity, m/s.
    pub v: f64,
    /// Elapsed time, s.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyClamp {
    None,
    /// Recovery would have exceeded the capacity.
    Saturated,
    /// Expenditure would have driven the reserve negative.
    Depleted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: KinematicState,
    pub w: f64,
    pub clamp: EnergyClamp,
    pub substeps: usize,
}

/// Unclamped result of holding one power over one distance step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub v: f64,
    /// Energy after the step, not clamped to the capacity band.
    pub w: f64,
    pub dt: f64,
    pub substeps: usize,
}

/// Integrates one distance step with the input held constant.
///
/// A single explicit step is taken when it changes the velocity by at most
/// 10%. Otherwise the step is split into sub-steps, each sized so the
/// velocity changes by at most 10%; a rider who cannot finish the distance
/// within [`MAX_SUBSTEPS`] sub-steps has stalled and `None` is returned.
#[inline]
pub fn transition(
    rider: &RiderParams,
    mass: f64,
    res: &Resistance,
    v: f64,
    w: f64,
    u: f64,
    ds: f64,
) -> Option<Transition> {
    let a0 = res.accel(v, u, mass);
    let dv = ds / v * a0;
    let (v_next, dt, substeps) = if dv.abs() <= MAX_REL_DV * v {
        (v + dv, ds / v, 1)
    } else {
        // Sub-step length h keeps |h/vel * a| <= 0.1 vel.
        let mut vel = v;
        let mut time = 0.0;
        let mut left = ds;
        let mut n = 0;
        while left > 1e-12 * ds {
            if n == MAX_SUBSTEPS {
                return None;
            }
            let a = res.accel(vel, u, mass);
            let h = if a == 0.0 {
                left
            } else {
                left.min(MAX_REL_DV * vel * vel / a.abs())
            };
            let dt = h / vel;
            vel += dt * a;
            time += dt;
            left -= h;
            n += 1;
            // Sub-steps shrink with vel^2, so a rider coasting to a halt
            // would otherwise spin through the whole budget.
            if vel <= STALL_SPEED {
                return None;
            }
        }
        (vel, time, n)
    };
    if !(v_next > 0.0) {
        return None;
    }
    Some(Transition {
        v: v_next,
        w: w + dt * rider.energy_rate(u),
        dt,
        substeps,
    })
}

/// Rider, bike and dynamics variant bundled for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RideModel {
    pub rider: RiderParams,
    pub bike: BikeEnvParams,
    pub variant: DynamicsVariant,
}

impl RideModel {
    pub fn new(rider: RiderParams, bike: BikeParams, variant: DynamicsVariant) -> Result<Self> {
        let bike = BikeEnvParams::for_rider(bike, &rider)?;
        Ok(Self {
            rider,
            bike,
            variant,
        })
    }

    pub fn mass(&self) -> f64 {
        self.bike.mass_effective()
    }

    pub fn resistance(&self, theta: f64) -> Resistance {
        self.bike.resistance(self.variant, theta)
    }

    pub fn accel(&self, v: f64, u: f64, theta: f64) -> Result<f64> {
        match self.variant {
            DynamicsVariant::Road => self.bike.accel(v, u, theta),
            DynamicsVariant::CompuTrainer => self.bike.accel_computrainer(v, u, theta),
        }
    }

    /// Power that holds `v` constant under this model's dynamics.
    pub fn u_cruise(&self, v: f64, theta: f64) -> Result<f64> {
        check_speed(v)?;
        Ok(self.resistance(theta).cruise_power(v, self.mass()))
    }

    pub fn u_max_velocity(&self, v: f64, w: f64) -> Result<f64> {
        self.bike.u_max_velocity(v, w, &self.rider)
    }

    /// Advances `state` by `ds` metres holding power `u`.
    pub fn step(
        &self,
        state: KinematicState,
        w: f64,
        u: f64,
        theta: f64,
        ds: f64,
    ) -> Result<StepOutcome> {
        check_speed(state.v)?;
        if !(ds > 0.0) {
            return Err(Error::invalid("step", format!("ds={ds} must be positive")));
        }
        if !(u >= 0.0) {
            return Err(Error::invalid("power", format!("u={u} must be >= 0")));
        }
        let res = self.resistance(theta);
        let tr = transition(&self.rider, self.mass(), &res, state.v, w, u, ds).ok_or(
            Error::InfeasibleTransition {
                v_next: state.v + ds / state.v * res.accel(state.v, u, self.mass()),
            },
        )?;
        let (w_next, clamp) = if tr.w > self.rider.awc() {
            (self.rider.awc(), EnergyClamp::Saturated)
        } else if tr.w < 0.0 {
            (0.0, EnergyClamp::Depleted)
        } else {
            (tr.w, EnergyClamp::None)
        };
        Ok(StepOutcome {
            state: KinematicState {
                s: state.s + ds,
                v: tr.v,
                t: state.t + tr.dt,
            },
            w: w_next,
            clamp,
            substeps: tr.substeps,
        })
    }
}
