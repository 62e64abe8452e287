use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::integrators::{SpaceFn, SpaceTimeFn};
use crate::mesh::Point;

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// C² window on `[0, 4]`: zero below `0.5` and above `3.5`, one on
/// `[1, 3]`, smoothstep ramps in between.
pub fn window_profile(y: f64) -> f64 {
    if y <= 0.5 || y >= 3.5 {
        0.0
    } else if y < 1.0 {
        smoothstep((y - 0.5) / 0.5)
    } else if y <= 3.0 {
        1.0
    } else {
        smoothstep((3.5 - y) / 0.5)
    }
}

/// Closed vocabulary of analytic space-time functions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `amplitude sin(kx pi x) sin(ky pi y) cos(omega t + phase)`
    Sinusoid {
        amplitude: f64,
        kx: f64,
        ky: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude sin(t / omega) W(y)` with [`window_profile`] `W`.
    WindowSine { amplitude: f64, omega: f64 },
}

impl DataSpec {
    pub fn eval(&self, p: Point, t: f64) -> f64 {
        match *self {
            DataSpec::Zero => 0.0,
            DataSpec::Constant { value } => value,
            DataSpec::Sinusoid {
                amplitude,
                kx,
                ky,
                omega,
                phase,
            } => amplitude * (kx * PI * p[0]).sin() * (ky * PI * p[1]).sin() * (omega * t + phase).cos(),
            DataSpec::WindowSine { amplitude, omega } => amplitude * (t / omega).sin() * window_profile(p[1]),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DataSpec::Zero)
    }

    /// Time derivative, when it is again in the vocabulary.
    pub fn time_derivative(&self) -> Option<DataSpec> {
        match *self {
            DataSpec::Zero | DataSpec::Constant { .. } => Some(DataSpec::Zero),
            DataSpec::Sinusoid {
                amplitude,
                kx,
                ky,
                omega,
                phase,
            } => Some(DataSpec::Sinusoid {
                amplitude: amplitude * omega,
                kx,
                ky,
                omega,
                phase: phase + 0.5 * PI,
            }),
            DataSpec::WindowSine { .. } => None,
        }
    }

    pub fn space_time(self) -> Option<SpaceTimeFn> {
        if self.is_zero() {
            None
        } else {
            Some(Arc::new(move |p, t| self.eval(p, t)))
        }
    }

    pub fn at_time(self, t: f64) -> Option<SpaceFn> {
        if self.is_zero() {
            None
        } else {
            Some(Arc::new(move |p| self.eval(p, t)))
        }
    }
}

/// Standing-wave exact solution for constant `kappa`:
/// `u = amplitude sin(kx pi x) sin(ky pi y) cos(omega t + phase)` solves
/// `u_tt - kappa Laplace u = f` with `f = (kappa pi^2 (kx^2 + ky^2) - omega^2) u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manufactured {
    pub amplitude: f64,
    pub kx: f64,
    pub ky: f64,
    /// Defaults to the resonant frequency `pi sqrt(kappa (kx^2 + ky^2))`,
    /// which makes the source vanish.
    pub omega: Option<f64>,
    #[serde(default)]
    pub phase: f64,
}

impl Manufactured {
    pub fn omega(&self, kappa: f64) -> f64 {
        self.omega
            .unwrap_or_else(|| PI * (kappa * (self.kx * self.kx + self.ky * self.ky)).sqrt())
    }

    pub fn solution(&self, kappa: f64) -> DataSpec {
        DataSpec::Sinusoid {
            amplitude: self.amplitude,
            kx: self.kx,
            ky: self.ky,
            omega: self.omega(kappa),
            phase: self.phase,
        }
    }

    pub fn source(&self, kappa: f64) -> DataSpec {
        let omega = self.omega(kappa);
        let factor = kappa * PI * PI * (self.kx * self.kx + self.ky * self.ky) - omega * omega;
        if self.omega.is_none() || factor == 0.0 {
            return DataSpec::Zero;
        }
        DataSpec::Sinusoid {
            amplitude: self.amplitude * factor,
            kx: self.kx,
            ky: self.ky,
            omega,
            phase: self.phase,
        }
    }
}
