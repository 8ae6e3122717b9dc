//! Closed-form fabrication models and their logic-level consequences.
//!
//! Each classifier maps physical parameters to the [`EffectClass`] a
//! manipulation produces: an unformed via opens a net, a thinned line
//! delays a path past its slack, a strong coupling lets an aggressor lift a
//! victim above the receiving buffer's threshold.
//!
//! Units: lengths in nm, time in s (polish) or ps (delay), capacitance in F,
//! resistance in Ω, voltage in V.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectClass {
    StuckAt0,
    StuckAt1,
    TimingFault,
    StealthySignal,
    NoEffect,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), DomainError> {
    if cond {
        Ok(())
    } else {
        Err(DomainError(msg()))
    }
}

/// Oxide CMP parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmpParams {
    /// Oxide polishing rate, nm/s.
    #[serde(rename = "K")]
    pub k: f64,
    /// Deposited oxide thickness, nm.
    pub z0: f64,
    /// Initial step height, nm.
    pub z1: f64,
    /// Total polish time, s.
    pub t: f64,
    /// Initial oxide pattern density, in (0, 1].
    pub rho0: f64,
}

impl CmpParams {
    pub fn check(&self) -> Result<(), DomainError> {
        require(self.k > 0.0, || format!("K must be > 0, got {}", self.k))?;
        require(self.z0 > 0.0, || format!("z0 must be > 0, got {}", self.z0))?;
        require(self.z1 >= 0.0, || format!("z1 must be >= 0, got {}", self.z1))?;
        require(self.t >= 0.0, || format!("t must be >= 0, got {}", self.t))?;
        require(self.rho0 > 0.0 && self.rho0 <= 1.0, || {
            format!("rho0 must be in (0, 1], got {}", self.rho0)
        })
    }

    /// Polish time at which the step is removed and the two regimes meet.
    pub fn breakpoint(&self) -> f64 {
        self.rho0 * self.z1 / self.k
    }
}

/// Remaining inter-layer dielectric thickness after CMP, nm.
///
/// Before the step is planarized the raised areas polish at `K / rho0`;
/// afterwards the whole surface polishes at `K`. The breakpoint itself is
/// evaluated with the post-planarization branch.
pub fn ild_thickness(p: &CmpParams) -> Result<f64, DomainError> {
    p.check()?;
    Ok(if p.t < p.breakpoint() {
        ild_step_branch(p)
    } else {
        ild_planar_branch(p)
    })
}

pub(crate) fn ild_step_branch(p: &CmpParams) -> f64 {
    p.z0 - p.k * p.t / p.rho0
}

pub(crate) fn ild_planar_branch(p: &CmpParams) -> f64 {
    p.z0 - p.z1 - p.k * p.t + p.rho0 * p.z1
}

/// Two coupled interconnects: the aggressor drives, the victim listens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkParams {
    pub c_adj: f64,
    pub c_gnd_v: f64,
    pub c_gnd_a: f64,
    pub r_victim: f64,
    pub r_aggressor: f64,
}

impl CrosstalkParams {
    pub fn check(&self) -> Result<(), DomainError> {
        let all = [self.c_adj, self.c_gnd_v, self.c_gnd_a, self.r_victim, self.r_aggressor];
        require(all.iter().all(|v| *v >= 0.0), || {
            format!("crosstalk parameters must be >= 0, got {all:?}")
        })?;
        require(self.c_gnd_v + self.c_adj > 0.0, || {
            "c_gnd_v + c_adj must be > 0".into()
        })?;
        require(self.r_victim * (self.c_gnd_v + self.c_adj) > 0.0, || {
            "victim time constant must be > 0".into()
        })
    }

    /// The same pair with aggressor and victim roles exchanged.
    pub fn swapped(&self) -> Self {
        CrosstalkParams {
            c_adj: self.c_adj,
            c_gnd_v: self.c_gnd_a,
            c_gnd_a: self.c_gnd_v,
            r_victim: self.r_aggressor,
            r_aggressor: self.r_victim,
        }
    }
}

/// Receiving-side electrical environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalEnv {
    pub v_dd: f64,
    pub v_th: f64,
    /// Timing slack, ps.
    pub slack: f64,
}

impl SignalEnv {
    pub fn check(&self) -> Result<(), DomainError> {
        require(self.v_th > 0.0 && self.v_th < self.v_dd, || {
            format!("need 0 < v_th < v_dd, got v_th={} v_dd={}", self.v_th, self.v_dd)
        })?;
        require(self.slack >= 0.0, || format!("slack must be >= 0, got {}", self.slack))
    }
}

impl Default for SignalEnv {
    fn default() -> Self {
        SignalEnv {
            v_dd: 1.0,
            v_th: 0.5,
            slack: 50.0,
        }
    }
}

/// Ratio of aggressor to victim RC time constants.
pub fn crosstalk_ratio_k(p: &CrosstalkParams) -> Result<f64, DomainError> {
    p.check()?;
    Ok(p.r_aggressor * (p.c_gnd_a + p.c_adj) / (p.r_victim * (p.c_gnd_v + p.c_adj)))
}

/// Voltage bump induced on the victim by an aggressor swing.
pub fn crosstalk_delta_v(p: &CrosstalkParams, dv_aggressor: f64) -> Result<f64, DomainError> {
    let k = crosstalk_ratio_k(p)?;
    Ok(coupling_ratio(p) / (1.0 + k) * dv_aggressor)
}

fn coupling_ratio(p: &CrosstalkParams) -> f64 {
    p.c_adj / (p.c_gnd_v + p.c_adj)
}

pub fn classify_crosstalk(
    p: &CrosstalkParams,
    dv_aggressor: f64,
    env: &SignalEnv,
) -> Result<EffectClass, DomainError> {
    let dv = crosstalk_delta_v(p, dv_aggressor)?;
    Ok(if dv >= env.v_th {
        EffectClass::StealthySignal
    } else {
        EffectClass::NoEffect
    })
}

/// A via shorter than the dielectric it must cross never connects; the
/// floating net is reported as stuck-at-0.
pub fn classify_via(p: &CmpParams, via_height: f64) -> Result<EffectClass, DomainError> {
    require(via_height > 0.0, || format!("via height must be > 0, got {via_height}"))?;
    let z = ild_thickness(p)?;
    Ok(if z > via_height {
        EffectClass::StuckAt0
    } else {
        EffectClass::NoEffect
    })
}

/// Delay multiplier from thinning a line: R scales with 1/width at fixed C.
pub fn line_delay_factor(width_nominal: f64, width_thinned: f64) -> Result<f64, DomainError> {
    require(width_thinned > 0.0 && width_thinned <= width_nominal, || {
        format!("need 0 < thinned <= nominal, got thinned={width_thinned} nominal={width_nominal}")
    })?;
    Ok(width_nominal / width_thinned)
}

/// Extra delay strictly beyond the slack violates setup.
pub fn classify_timing(
    nominal_delay: f64,
    delay_factor: f64,
    env: &SignalEnv,
) -> Result<EffectClass, DomainError> {
    require(nominal_delay > 0.0, || format!("nominal delay must be > 0, got {nominal_delay}"))?;
    Ok(if nominal_delay * (delay_factor - 1.0) > env.slack {
        EffectClass::TimingFault
    } else {
        EffectClass::NoEffect
    })
}

/// Fabrication-level manipulations and the obfuscation classes each can
/// produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    SourceDrainDoping,
    ChannelDoping,
    MetalFill,
    IldThinning,
    IldThickening,
    InterconnectMask,
    Sraf,
}

impl Mechanism {
    pub const ALL: [Mechanism; 7] = [
        Mechanism::SourceDrainDoping,
        Mechanism::ChannelDoping,
        Mechanism::MetalFill,
        Mechanism::IldThinning,
        Mechanism::IldThickening,
        Mechanism::InterconnectMask,
        Mechanism::Sraf,
    ];

    /// (stuck-at, timing, stealthy signaling) capability flags.
    pub fn capabilities(self) -> (bool, bool, bool) {
        match self {
            Mechanism::SourceDrainDoping => (true, false, false),
            Mechanism::ChannelDoping => (true, true, false),
            Mechanism::MetalFill => (true, true, true),
            Mechanism::IldThinning => (false, true, true),
            Mechanism::IldThickening => (true, true, true),
            Mechanism::InterconnectMask => (true, true, true),
            Mechanism::Sraf => (false, true, false),
        }
    }

    /// Effect classes reachable through this mechanism.
    pub fn effect_classes(self) -> Vec<EffectClass> {
        let (sa, timing, signal) = self.capabilities();
        let mut out = Vec::new();
        if sa {
            out.extend([EffectClass::StuckAt0, EffectClass::StuckAt1]);
        }
        if timing {
            out.push(EffectClass::TimingFault);
        }
        if signal {
            out.push(EffectClass::StealthySignal);
        }
        out
    }
}
