//! Membrane kinetics. Only the Rogers-McCulloch model ships, behind the
//! [`IonicModel`] trait so other single-gate models can be plugged in.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub trait IonicModel: Sync {
    fn i_ion(&self, v: f64, w: f64) -> f64;
    fn di_ion_dv(&self, v: f64, w: f64) -> f64;
    /// Solves `w⁺ − τ R(v, w⁺) = w` for `w⁺`.
    fn gate_update(&self, v: f64, w: f64, tau: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmcParams {
    /// mS/cm²
    pub g: f64,
    /// mV
    pub v_th: f64,
    /// mV
    pub v_p: f64,
    /// mS/cm²
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for RmcParams {
    fn default() -> Self {
        Self {
            g: 1.2,
            v_th: 13.0,
            v_p: 100.0,
            eta1: 4.4,
            eta2: 0.012,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MembraneParams {
    /// cm⁻¹
    pub chi: f64,
    /// mF/cm²
    pub c_m: f64,
}

impl Default for MembraneParams {
    fn default() -> Self {
        Self { chi: 1.0, c_m: 1.0 }
    }
}

impl MembraneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.c_m > 0.0) {
            return config("chi and C_m must be positive");
        }
        Ok(())
    }
}

impl RmcParams {
    pub fn validate(&self) -> Result<()> {
        let p = [self.g, self.v_th, self.v_p, self.eta1, self.eta2];
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return config("Rogers-McCulloch parameters must be positive");
        }
        if self.v_th >= self.v_p {
            return config("v_th must be below v_p");
        }
        Ok(())
    }

    pub fn r_gate(&self, v: f64, w: f64) -> f64 {
        self.eta2 * (v / self.v_p - w)
    }

    /// Smallest value of `∂I_ion/∂v` over the box. The derivative is a
    /// convex parabola in `v` and increasing in `w`.
    pub fn min_di_dv(&self, v_range: [f64; 2], w_range: [f64; 2]) -> f64 {
        let vertex = (self.v_th + self.v_p) / 3.0;
        let v = vertex.clamp(v_range[0], v_range[1]);
        self.di_ion_dv(v, w_range[0])
    }

    /// `min χC_m + τ ∂I_ion/∂v` over the box.
    pub fn coercivity_margin(
        &self,
        membrane: &MembraneParams,
        v_range: [f64; 2],
        w_range: [f64; 2],
        tau: f64,
    ) -> f64 {
        membrane.chi * membrane.c_m + tau * self.min_di_dv(v_range, w_range)
    }

    /// Largest τ keeping the margin positive; infinite if `∂I_ion/∂v`
    /// never goes negative on the box.
    pub fn critical_tau(&self, membrane: &MembraneParams, v_range: [f64; 2], w_range: [f64; 2]) -> f64 {
        let m = self.min_di_dv(v_range, w_range);
        if m >= 0.0 {
            f64::INFINITY
        } else {
            membrane.chi * membrane.c_m / -m
        }
    }
}

impl IonicModel for RmcParams {
    fn i_ion(&self, v: f64, w: f64) -> f64 {
        self.g * v * (1.0 - v / self.v_th) * (1.0 - v / self.v_p) + self.eta1 * v * w
    }

    fn di_ion_dv(&self, v: f64, w: f64) -> f64 {
        let s = 1.0 / self.v_th + 1.0 / self.v_p;
        let q = 1.0 / (self.v_th * self.v_p);
        self.g * (1.0 - 2.0 * s * v + 3.0 * q * v * v) + self.eta1 * w
    }

    fn gate_update(&self, v: f64, w: f64, tau: f64) -> f64 {
        (w + tau * self.eta2 * v / self.v_p) / (1.0 + tau * self.eta2)
    }
}

/// Step 1 of the decoupled scheme applied node by node.
pub fn gate_update_step1(model: &dyn IonicModel, v_prev: &[f64], w_prev: &[f64], tau: f64) -> Vec<f64> {
    v_prev
        .iter()
        .zip(w_prev)
        .map(|(&v, &w)| model.gate_update(v, w, tau))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: RmcParams = RmcParams {
        g: 1.2,
        v_th: 13.0,
        v_p: 100.0,
        eta1: 4.4,
        eta2: 0.012,
    };

    #[test]
    fn current_values() {
        assert_eq!(P.i_ion(0.0, 0.0), 0.0);
        assert_eq!(P.i_ion(100.0, 0.0), 0.0);
        // 1.2·50·(1 − 50/13)·0.5 + 4.4·50·0.1
        let want = 60.0 * (1.0 - 50.0 / 13.0) * 0.5 + 22.0;
        assert!((P.i_ion(50.0, 0.1) - want).abs() < 1e-12);
        assert!((P.i_ion(50.0, 0.1) + 63.384615).abs() < 1e-6);
    }

    #[test]
    fn derivative_values() {
        assert_eq!(P.di_ion_dv(0.0, 0.0), 1.2);
        assert!((P.di_ion_dv(30.0, 0.7) - P.di_ion_dv(30.0, 0.0) - 4.4 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn gate_rate_and_update() {
        assert_eq!(P.r_gate(0.0, 0.0), 0.0);
        assert_eq!(P.r_gate(42.0, 0.42), 0.0);
        assert!((P.r_gate(100.0, 0.0) - 0.012).abs() < 1e-15);
        assert_eq!(P.gate_update(0.0, 0.0, 0.05), 0.0);
        assert!((P.gate_update(30.0, 0.3, 0.05) - 0.3).abs() < 1e-15);
        let w = P.gate_update(100.0, 0.0, 0.05);
        assert!((w - 0.0006 / 1.0006).abs() < 1e-18);
        assert!((w - 5.99640e-4).abs() < 1e-9);
    }

    #[test]
    fn coercivity() {
        let m = MembraneParams::default();
        let v = [-85.0, 120.0];
        let w = [0.0, 1.0];
        assert!(P.coercivity_margin(&m, v, w, 0.05) > 0.0);
        assert_eq!(P.coercivity_margin(&m, v, w, 0.0), 1.0);
        let t = P.critical_tau(&m, v, w);
        assert!((0.33..=0.41).contains(&t), "{t}");
        assert!(P.coercivity_margin(&m, v, w, t).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(v in -100.0f64..150.0, w in 0.0f64..2.0) {
            let h = 1e-4;
            let fd = (P.i_ion(v + h, w) - P.i_ion(v - h, w)) / (2.0 * h);
            let d = P.di_ion_dv(v, w);
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
        }

        #[test]
        fn gate_update_solves_implicit_equation(v in -100.0f64..150.0, w in 0.0f64..2.0, tau in 1e-3f64..1.0) {
            let wp = P.gate_update(v, w, tau);
            prop_assert!((wp - tau * P.r_gate(v, wp) - w).abs() <= 1e-14);
        }

        #[test]
        fn margin_decreases_with_tau(t1 in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let m = MembraneParams::default();
            let a = P.coercivity_margin(&m, [-85.0, 120.0], [0.0, 1.0], t1);
            let b = P.coercivity_margin(&m, [-85.0, 120.0], [0.0, 1.0], t1 + dt);
            prop_assert!(b <= a);
        }
    }
}
