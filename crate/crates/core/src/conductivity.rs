//! Anisotropic intra- and extracellular conductivity tensors.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::mesh::{FiberFrame, HexMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Intra,
    Extra,
}

/// Longitudinal, transversal and normal coefficients of one medium (mS/cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub l: f64,
    pub t: f64,
    pub n: f64,
}

impl Coefficients {
    pub fn isotropic(s: f64) -> Self {
        Self { l: s, t: s, n: s }
    }

    pub fn max(&self) -> f64 {
        self.l.max(self.t).max(self.n)
    }

    fn positive(&self) -> bool {
        [self.l, self.t, self.n].iter().all(|&s| s > 0.0 && s.is_finite())
    }
}

/// A box of elements `[lo, hi)` whose conductivities are replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOverride {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
    pub intra: Coefficients,
    pub extra: Coefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConductivityTensors {
    pub intra: Coefficients,
    pub extra: Coefficients,
    /// Later entries win where boxes overlap.
    pub overrides: Vec<RegionOverride>,
}

impl Default for ConductivityTensors {
    fn default() -> Self {
        Self {
            intra: Coefficients {
                l: 3e-3,
                t: 3.1525e-4,
                n: 3.1525e-5,
            },
            extra: Coefficients {
                l: 2e-3,
                t: 1.3514e-3,
                n: 6.757e-4,
            },
            overrides: Vec::new(),
        }
    }
}

impl ConductivityTensors {
    pub fn validate(&self) -> Result<()> {
        if !self.intra.positive() || !self.extra.positive() {
            return config("conductivity coefficients must be positive");
        }
        for o in &self.overrides {
            if !o.intra.positive() || !o.extra.positive() {
                return config("override conductivity coefficients must be positive");
            }
            if (0..3).any(|d| o.lo[d] >= o.hi[d]) {
                return config(format!("empty override box {:?}..{:?}", o.lo, o.hi));
            }
        }
        Ok(())
    }

    /// Coefficients in effect at element grid position `ijk`.
    pub fn coefficients_at(&self, ijk: [usize; 3], medium: Medium) -> Coefficients {
        let mut c = match medium {
            Medium::Intra => self.intra,
            Medium::Extra => self.extra,
        };
        for o in &self.overrides {
            if (0..3).all(|d| o.lo[d] <= ijk[d] && ijk[d] < o.hi[d]) {
                c = match medium {
                    Medium::Intra => o.intra,
                    Medium::Extra => o.extra,
                };
            }
        }
        c
    }

    pub fn tensor_at(&self, mesh: &HexMesh, element: usize, medium: Medium) -> [[f64; 3]; 3] {
        let c = self.coefficients_at(mesh.element_ijk(element), medium);
        tensor_from_frame(&c, &mesh.fibers[element])
    }
}

/// `D = σ_l a_l a_lᵀ + σ_t a_t a_tᵀ + σ_n a_n a_nᵀ`.
pub fn tensor_from_frame(c: &Coefficients, f: &FiberFrame) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    for (s, a) in [(c.l, f.l), (c.t, f.t), (c.n, f.n)] {
        for p in 0..3 {
            for q in 0..3 {
                d[p][q] += s * a[p] * a[q];
            }
        }
    }
    d
}

/// Tensor of `medium` on element `element` of `mesh`.
pub fn conductivity_tensor_at(
    mesh: &HexMesh,
    cond: &ConductivityTensors,
    element: usize,
    medium: Medium,
) -> [[f64; 3]; 3] {
    cond.tensor_at(mesh, element, medium)
}
