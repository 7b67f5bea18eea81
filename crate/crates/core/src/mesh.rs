//! Structured Q1 hexahedral meshes for the slab and truncated-ellipsoid
//! geometries, with per-element fiber frames.
//!
//! Nodes are numbered lexicographically, `i + (nx+1) * (j + (ny+1) * k)`,
//! and so are elements. Inside an element the local node `a` sits at the
//! corner `(a & 1, (a >> 1) & 1, (a >> 2) & 1)` of the reference cube.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fem::{gauss_points, jacobian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Slab,
    Ellipsoid,
}

/// Semi-axes and angular box of the truncated ellipsoid.
///
/// There are no published values; `Default` gives example axes chosen for
/// this repository, not measured anatomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EllipsoidParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for EllipsoidParams {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            a1: 1.5,
            a2: 2.7,
            b1: 1.5,
            b2: 2.7,
            c1: 4.4,
            c2: 5.0,
            phi_min: -PI / 2.0,
            phi_max: 0.0,
            theta_min: -3.0 * PI / 8.0,
            theta_max: PI / 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub geometry: GeometryKind,
    /// Elements along x, y, z (slab) or φ, θ, r (ellipsoid).
    pub elements: [usize; 3],
    /// Slab extents in cm.
    pub extent: [f64; 3],
    /// Required for the ellipsoid geometry.
    pub ellipsoid: Option<EllipsoidParams>,
    /// Total intramural fiber rotation in degrees.
    pub fiber_rotation_deg: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryKind::Slab,
            elements: [16, 16, 4],
            extent: [1.92, 1.92, 0.48],
            ellipsoid: None,
            fiber_rotation_deg: 120.0,
        }
    }
}

impl MeshConfig {
    pub fn slab(elements: [usize; 3], extent: [f64; 3]) -> Self {
        Self {
            geometry: GeometryKind::Slab,
            elements,
            extent,
            ..Self::default()
        }
    }

    pub fn ellipsoid(elements: [usize; 3], params: EllipsoidParams) -> Self {
        Self {
            geometry: GeometryKind::Ellipsoid,
            elements,
            ellipsoid: Some(params),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.iter().any(|&n| n == 0) {
            return config(format!("element counts must be positive, got {:?}", self.elements));
        }
        if !self.fiber_rotation_deg.is_finite() {
            return config("fiber rotation must be finite");
        }
        match self.geometry {
            GeometryKind::Slab => {
                if self.extent.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return config(format!("slab extents must be positive, got {:?}", self.extent));
                }
            }
            GeometryKind::Ellipsoid => {
                let Some(p) = &self.ellipsoid else {
                    return config("the ellipsoid geometry needs an [mesh.ellipsoid] table with its axes");
                };
                if !(p.a1 > 0.0 && p.b1 > 0.0 && p.c1 > 0.0) {
                    return config("ellipsoid inner axes must be positive");
                }
                if !(p.a2 > p.a1 && p.b2 > p.b1 && p.c2 > p.c1) {
                    return config("ellipsoid outer axes must exceed inner axes");
                }
                if !(p.phi_min < p.phi_max) || p.phi_max - p.phi_min >= 2.0 * std::f64::consts::PI {
                    return config("phi range must be non-empty and shorter than a full turn");
                }
                let half = std::f64::consts::FRAC_PI_2;
                if !(p.theta_min < p.theta_max) {
                    return config("theta range must be non-empty");
                }
                if p.theta_min <= -half || p.theta_max >= half {
                    return config("theta range must exclude the poles (|theta| < pi/2)");
                }
            }
        }
        Ok(())
    }
}

/// Orthonormal fiber triplet: longitudinal, transversal and normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberFrame {
    pub l: [f64; 3],
    pub t: [f64; 3],
    pub n: [f64; 3],
}

impl FiberFrame {
    pub fn axis_aligned() -> Self {
        Self {
            l: [1.0, 0.0, 0.0],
            t: [0.0, 1.0, 0.0],
            n: [0.0, 0.0, 1.0],
        }
    }

    pub fn axes(&self) -> [[f64; 3]; 3] {
        [self.l, self.t, self.n]
    }

    /// max over the frame of | |a|-1 | and |a_p . a_q|.
    pub fn orthonormality_defect(&self) -> f64 {
        let a = self.axes();
        let mut d: f64 = 0.0;
        for p in 0..3 {
            d = d.max((dot3(&a[p], &a[p]).sqrt() - 1.0).abs());
            for q in p + 1..3 {
                d = d.max(dot3(&a[p], &a[q]).abs());
            }
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct HexMesh {
    pub geometry: GeometryKind,
    /// Elements per direction.
    pub counts: [usize; 3],
    pub coords: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub fibers: Vec<FiberFrame>,
}

impl HexMesh {
    pub fn build(cfg: &MeshConfig) -> Result<Self> {
        match cfg.geometry {
            GeometryKind::Slab => build_slab_mesh(cfg),
            GeometryKind::Ellipsoid => build_ellipsoid_mesh(cfg),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_counts(&self) -> [usize; 3] {
        [self.counts[0] + 1, self.counts[1] + 1, self.counts[2] + 1]
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.node_counts();
        i + nx * (j + ny * k)
    }

    pub fn node_ijk(&self, n: usize) -> [usize; 3] {
        let [nx, ny, _] = self.node_counts();
        [n % nx, (n / nx) % ny, n / (nx * ny)]
    }

    pub fn element_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        let [ex, ey, _] = self.counts;
        [e % ex, (e / ex) % ey, e / (ex * ey)]
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let nodes = &self.elements[e];
        std::array::from_fn(|a| self.coords[nodes[a]])
    }

    /// Sum over elements of the quadrature volume.
    pub fn volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| element_volume(&self.element_coords(e))).sum()
    }

    /// Smallest Jacobian determinant over all elements and Gauss points.
    pub fn min_jacobian(&self) -> f64 {
        let mut m = f64::INFINITY;
        for e in 0..self.num_elements() {
            let x = self.element_coords(e);
            for (xi, _) in gauss_points() {
                let (_, det) = jacobian(&x, &xi);
                m = m.min(det);
            }
        }
        m
    }
}

fn structured_elements(counts: [usize; 3]) -> Vec<[usize; 8]> {
    let [ex, ey, ez] = counts;
    let (nx, ny) = (ex + 1, ey + 1);
    let mut elements = Vec::with_capacity(ex * ey * ez);
    for k in 0..ez {
        for j in 0..ey {
            for i in 0..ex {
                elements.push(std::array::from_fn(|a| {
                    let (di, dj, dk) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
                    (i + di) + nx * ((j + dj) + ny * (k + dk))
                }));
            }
        }
    }
    elements
}

fn check_jacobians(mesh: &HexMesh) -> Result<()> {
    let m = mesh.min_jacobian();
    if !(m > 0.0) {
        return config(format!("mesh has a non-positive element Jacobian ({m:.3e})"));
    }
    Ok(())
}

/// Uniform grid over `[0,Lx] x [0,Ly] x [0,Lz]`. Fibers lie in the
/// xy-plane and turn linearly with z; `a_n` is the z axis.
pub fn build_slab_mesh(cfg: &MeshConfig) -> Result<HexMesh> {
    cfg.validate()?;
    if cfg.geometry != GeometryKind::Slab {
        return config("build_slab_mesh called with a non-slab configuration");
    }
    let counts = cfg.elements;
    let [ex, ey, ez] = counts;
    let [lx, ly, lz] = cfg.extent;
    let mut coords = Vec::with_capacity((ex + 1) * (ey + 1) * (ez + 1));
    for k in 0..=ez {
        for j in 0..=ey {
            for i in 0..=ex {
                coords.push([
                    lx * i as f64 / ex as f64,
                    ly * j as f64 / ey as f64,
                    lz * k as f64 / ez as f64,
                ]);
            }
        }
    }
    let rot = cfg.fiber_rotation_deg.to_radians();
    let mut fibers = Vec::with_capacity(ex * ey * ez);
    for k in 0..ez {
        let depth = (k as f64 + 0.5) / ez as f64;
        // top face (z = Lz) is taken as the epicardium
        let alpha = rot / 2.0 - rot * depth;
        let (s, c) = alpha.sin_cos();
        let frame = FiberFrame {
            l: [c, s, 0.0],
            t: [-s, c, 0.0],
            n: [0.0, 0.0, 1.0],
        };
        fibers.extend(std::iter::repeat(frame).take(ex * ey));
    }
    let mesh = HexMesh {
        geometry: GeometryKind::Slab,
        counts,
        coords,
        elements: structured_elements(counts),
        fibers,
    };
    check_jacobians(&mesh)?;
    Ok(mesh)
}

/// Point of the truncated ellipsoid for parameters (φ, θ, r).
pub fn ellipsoid_point(p: &EllipsoidParams, phi: f64, theta: f64, r: f64) -> [f64; 3] {
    let a = p.a1 + r * (p.a2 - p.a1);
    let b = p.b1 + r * (p.b2 - p.b1);
    let c = p.c1 + r * (p.c2 - p.c1);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    [a * ct * cp, b * ct * sp, c * st]
}

fn ellipsoid_frame(p: &EllipsoidParams, phi: f64, theta: f64, r: f64, rot: f64) -> FiberFrame {
    let a = p.a1 + r * (p.a2 - p.a1);
    let b = p.b1 + r * (p.b2 - p.b1);
    let c = p.c1 + r * (p.c2 - p.c1);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let d_phi = [-a * ct * sp, b * ct * cp, 0.0];
    let d_theta = [-a * st * cp, -b * st * sp, c * ct];
    let n = normalize(cross(&d_phi, &d_theta));
    let e1 = normalize(d_phi);
    let e2 = cross(&n, &e1);
    // counterclockwise from epicardium (r = 1) to endocardium (r = 0)
    let alpha = -rot / 2.0 + rot * (1.0 - r);
    let (s, co) = alpha.sin_cos();
    let l = normalize([
        co * e1[0] + s * e2[0],
        co * e1[1] + s * e2[1],
        co * e1[2] + s * e2[2],
    ]);
    let t = cross(&n, &l);
    FiberFrame { l, t, n }
}

/// Image of the uniform (φ, θ, r) grid; element counts run along φ, θ
/// and r respectively, so k = 0 is the endocardial surface.
pub fn build_ellipsoid_mesh(cfg: &MeshConfig) -> Result<HexMesh> {
    cfg.validate()?;
    if cfg.geometry != GeometryKind::Ellipsoid {
        return config("build_ellipsoid_mesh called with a non-ellipsoid configuration");
    }
    let p = cfg.ellipsoid.as_ref().expect("validated above");
    let counts = cfg.elements;
    let [ex, ey, ez] = counts;
    let param = |i: f64, j: f64, k: f64| {
        (
            p.phi_min + (p.phi_max - p.phi_min) * i / ex as f64,
            p.theta_min + (p.theta_max - p.theta_min) * j / ey as f64,
            k / ez as f64,
        )
    };
    let mut coords = Vec::with_capacity((ex + 1) * (ey + 1) * (ez + 1));
    for k in 0..=ez {
        for j in 0..=ey {
            for i in 0..=ex {
                let (phi, theta, r) = param(i as f64, j as f64, k as f64);
                coords.push(ellipsoid_point(p, phi, theta, r));
            }
        }
    }
    let rot = cfg.fiber_rotation_deg.to_radians();
    let mut fibers = Vec::with_capacity(ex * ey * ez);
    for k in 0..ez {
        for j in 0..ey {
            for i in 0..ex {
                let (phi, theta, r) = param(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                fibers.push(ellipsoid_frame(p, phi, theta, r, rot));
            }
        }
    }
    let mesh = HexMesh {
        geometry: GeometryKind::Ellipsoid,
        counts,
        coords,
        elements: structured_elements(counts),
        fibers,
    };
    check_jacobians(&mesh)?;
    Ok(mesh)
}

pub(crate) fn element_volume(x: &[[f64; 3]; 8]) -> f64 {
    gauss_points()
        .iter()
        .map(|(xi, w)| w * jacobian(x, xi).1)
        .sum()
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot3(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
