//! Box decomposition of the structured mesh, interface equivalence classes
//! and the primal/dual coordinate layout produced by the change of basis.
//!
//! Every interface class carries one coordinate block per field. Classes
//! with an average constraint use chain differences
//! `e_{n_k} − e_{n_{k+1}}` for their dual coordinates plus the constant
//! vector for the primal one, so the primal coordinate is the class average
//! and dual coordinates never move it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fem::NodeNumbering;
use crate::mesh::HexMesh;
use crate::sparse::CsrMatrix;

pub const FIELDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Face,
    Edge,
    Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimalKind {
    V,
    Ve,
    Vef,
}

impl PrimalKind {
    pub fn label(&self) -> &'static str {
        match self {
            PrimalKind::V => "V",
            PrimalKind::Ve => "V+E",
            PrimalKind::Vef => "V+E+F",
        }
    }
}

impl std::str::FromStr for PrimalKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(PrimalKind::V),
            "ve" | "v+e" => Ok(PrimalKind::Ve),
            "vef" | "v+e+f" => Ok(PrimalKind::Vef),
            _ => Err(format!("unknown primal space '{s}' (expected v, ve or vef)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceClass {
    pub kind: ClassKind,
    /// Sorted subdomain indices whose closure contains the class.
    pub sharers: Vec<usize>,
    /// Sorted global node ids.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub index: usize,
    pub position: [usize; 3],
    /// Element box `[lo, hi)` in element grid coordinates.
    pub lo: [usize; 3],
    pub hi: [usize; 3],
    pub elements: Vec<usize>,
    pub numbering: NodeNumbering,
    /// Local indices of nodes owned by this subdomain alone.
    pub interior_nodes: Vec<usize>,
    /// Global ids of the interface classes touching this subdomain.
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub grid: [usize; 3],
    /// Elements per subdomain along each direction.
    pub local_elements: [usize; 3],
    pub subdomains: Vec<Subdomain>,
    pub classes: Vec<InterfaceClass>,
    /// Class of each global node, `None` for nodes interior to a subdomain.
    pub node_class: Vec<Option<usize>>,
    /// Largest subdomain extent (cm).
    pub big_h: f64,
    /// Largest element extent (cm).
    pub h: f64,
    pub num_nodes: usize,
}

/// Subdomains along one direction whose closure contains grid line `i`.
fn sharers_1d(i: usize, local: usize, parts: usize) -> Vec<usize> {
    let s = i / local;
    if i % local == 0 && s > 0 && s < parts {
        vec![s - 1, s]
    } else {
        vec![s.min(parts - 1)]
    }
}

fn bbox_extent(mesh: &HexMesh, nodes: impl Iterator<Item = usize>) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for n in nodes {
        for d in 0..3 {
            lo[d] = lo[d].min(mesh.coords[n][d]);
            hi[d] = hi[d].max(mesh.coords[n][d]);
        }
    }
    (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max)
}

impl Decomposition {
    pub fn num_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn subdomain_index(&self, p: [usize; 3]) -> usize {
        p[0] + self.grid[0] * (p[1] + self.grid[1] * p[2])
    }

    /// Elements per subdomain edge; the H/h axis of the experiments.
    pub fn h_ratio(&self) -> usize {
        *self.local_elements.iter().max().unwrap()
    }

    pub fn count_kind(&self, kind: ClassKind) -> usize {
        self.classes.iter().filter(|c| c.kind == kind).count()
    }

    /// One JSON object per line: kind, sharers and size of each class.
    pub fn classes_json_lines(&self) -> String {
        let mut s = String::new();
        for c in &self.classes {
            let line = serde_json::json!({
                "kind": c.kind,
                "sharers": c.sharers,
                "size": c.nodes.len(),
            });
            s.push_str(&line.to_string());
            s.push('\n');
        }
        s
    }
}

/// Box partition where interface classes depend only on the sharing set.
pub fn partition_box(mesh: &HexMesh, grid: [usize; 3]) -> Result<Decomposition> {
    partition_box_marked(mesh, grid, false)
}

/// Box partition. With `mark_boundary`, nodes on the outer boundary are
/// split off into their own classes, so the rim of an interface face
/// becomes edges and face/boundary corners become vertices.
pub fn partition_box_marked(
    mesh: &HexMesh,
    grid: [usize; 3],
    mark_boundary: bool,
) -> Result<Decomposition> {
    if grid.iter().any(|&p| p == 0) {
        return config(format!("subdomain grid must be positive, got {grid:?}"));
    }
    for d in 0..3 {
        if mesh.counts[d] % grid[d] != 0 {
            return config(format!(
                "subdomain grid {:?} does not divide the element grid {:?}",
                grid, mesh.counts
            ));
        }
    }
    let local: [usize; 3] = std::array::from_fn(|d| mesh.counts[d] / grid[d]);
    let nsub = grid.iter().product::<usize>();

    // sharing sets and classes
    let mut by_set: BTreeMap<(Vec<usize>, u8), Vec<usize>> = BTreeMap::new();
    let mut cut_dirs: BTreeMap<(Vec<usize>, u8), usize> = BTreeMap::new();
    let mut owner = vec![usize::MAX; mesh.num_nodes()];
    for n in 0..mesh.num_nodes() {
        let ijk = mesh.node_ijk(n);
        let per: [Vec<usize>; 3] = std::array::from_fn(|d| sharers_1d(ijk[d], local[d], grid[d]));
        let ncut = per.iter().filter(|v| v.len() == 2).count();
        let mut set = Vec::with_capacity(1 << ncut);
        for &sz in &per[2] {
            for &sy in &per[1] {
                for &sx in &per[0] {
                    set.push(sx + grid[0] * (sy + grid[1] * sz));
                }
            }
        }
        set.sort_unstable();
        if set.len() == 1 {
            owner[n] = set[0];
        } else {
            // the exterior acts as one more sharer on each boundary plane
            let mut mask = 0u8;
            if mark_boundary {
                for d in 0..3 {
                    if ijk[d] == 0 || ijk[d] == mesh.counts[d] {
                        mask |= 1 << (2 * d + usize::from(ijk[d] != 0));
                    }
                }
            }
            let key = (set, mask);
            cut_dirs.insert(key.clone(), ncut + mask.count_ones() as usize);
            by_set.entry(key).or_default().push(n);
        }
    }
    let mut node_class = vec![None; mesh.num_nodes()];
    let mut classes = Vec::with_capacity(by_set.len());
    for (c, (key, nodes)) in by_set.into_iter().enumerate() {
        let kind = match cut_dirs[&key] {
            1 => ClassKind::Face,
            2 => ClassKind::Edge,
            _ => ClassKind::Vertex,
        };
        for &n in &nodes {
            node_class[n] = Some(c);
        }
        classes.push(InterfaceClass {
            kind,
            sharers: key.0,
            nodes,
        });
    }

    let mut subdomains = Vec::with_capacity(nsub);
    let mut big_h: f64 = 0.0;
    for s in 0..nsub {
        let position = [s % grid[0], (s / grid[0]) % grid[1], s / (grid[0] * grid[1])];
        let lo: [usize; 3] = std::array::from_fn(|d| position[d] * local[d]);
        let hi: [usize; 3] = std::array::from_fn(|d| lo[d] + local[d]);
        let mut elements = Vec::with_capacity(local.iter().product());
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    elements.push(mesh.element_index(i, j, k));
                }
            }
        }
        let numbering = NodeNumbering::of_elements(mesh, &elements);
        let interior_nodes = (0..numbering.len())
            .filter(|&l| node_class[numbering.nodes[l]].is_none())
            .collect();
        let sub_classes = (0..classes.len())
            .filter(|&c| classes[c].sharers.binary_search(&s).is_ok())
            .collect();
        big_h = big_h.max(bbox_extent(mesh, numbering.nodes.iter().copied()));
        subdomains.push(Subdomain {
            index: s,
            position,
            lo,
            hi,
            elements,
            numbering,
            interior_nodes,
            classes: sub_classes,
        });
    }
    debug_assert!(owner
        .iter()
        .zip(&node_class)
        .all(|(&o, c)| (o == usize::MAX) == c.is_some()));
    let h = (0..mesh.num_elements())
        .map(|e| bbox_extent(mesh, mesh.elements[e].iter().copied()))
        .fold(0.0, f64::max);
    Ok(Decomposition {
        grid,
        local_elements: local,
        subdomains,
        classes,
        node_class,
        big_h,
        h,
        num_nodes: mesh.num_nodes(),
    })
}

/// How the coordinates of one class are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassRole {
    /// All coordinates dual, no change of basis.
    Dual,
    /// Chain-difference duals plus the class average as primal.
    Averaged,
    /// Every node primal.
    Primal,
}

/// Coordinate layout of the interface after the change of basis.
///
/// Global interface vectors are ordered `[all dual coordinates, all primal
/// coordinates]`; within each part classes appear in class order and each
/// class lists field 0 before field 1.
#[derive(Debug, Clone)]
pub struct InterfaceLayout {
    pub kind: PrimalKind,
    pub roles: Vec<ClassRole>,
    /// Per class: start of its dual block (field 0; field 1 follows).
    pub dual_start: Vec<usize>,
    pub primal_start: Vec<usize>,
    pub n_dual: usize,
    pub n_primal: usize,
}

impl InterfaceLayout {
    pub fn new(decomp: &Decomposition, kind: PrimalKind) -> Self {
        let roles: Vec<ClassRole> = decomp
            .classes
            .iter()
            .map(|c| match (c.kind, kind) {
                (ClassKind::Vertex, _) => ClassRole::Primal,
                (ClassKind::Edge, PrimalKind::Ve | PrimalKind::Vef) => ClassRole::Averaged,
                (ClassKind::Face, PrimalKind::Vef) => ClassRole::Averaged,
                _ => ClassRole::Dual,
            })
            .collect();
        let mut dual_start = Vec::with_capacity(roles.len());
        let mut primal_start = Vec::with_capacity(roles.len());
        let (mut nd, mut np) = (0, 0);
        for (c, class) in decomp.classes.iter().enumerate() {
            dual_start.push(nd);
            primal_start.push(np);
            let (d, p) = Self::split(roles[c], class.nodes.len());
            nd += FIELDS * d;
            np += FIELDS * p;
        }
        Self {
            kind,
            roles,
            dual_start,
            primal_start,
            n_dual: nd,
            n_primal: np,
        }
    }

    /// (dual, primal) coordinate counts per field for a class of `m` nodes.
    pub fn split(role: ClassRole, m: usize) -> (usize, usize) {
        match role {
            ClassRole::Dual => (m, 0),
            ClassRole::Averaged => (m - 1, 1),
            ClassRole::Primal => (0, m),
        }
    }

    pub fn class_split(&self, decomp: &Decomposition, c: usize) -> (usize, usize) {
        Self::split(self.roles[c], decomp.classes[c].nodes.len())
    }

    pub fn n_interface(&self) -> usize {
        self.n_dual + self.n_primal
    }

    /// Dual coordinates of class `c`, both fields.
    pub fn dual_range(&self, decomp: &Decomposition, c: usize) -> std::ops::Range<usize> {
        let (d, _) = self.class_split(decomp, c);
        self.dual_start[c]..self.dual_start[c] + FIELDS * d
    }

    pub fn primal_range(&self, decomp: &Decomposition, c: usize) -> std::ops::Range<usize> {
        let (_, p) = self.class_split(decomp, c);
        self.primal_start[c]..self.primal_start[c] + FIELDS * p
    }

    /// Number of non-redundant continuity constraints across dual coords.
    pub fn num_jump_rows(&self, decomp: &Decomposition) -> usize {
        (0..decomp.classes.len())
            .map(|c| (decomp.classes[c].sharers.len() - 1) * self.dual_range(decomp, c).len())
            .sum()
    }

    /// Original nodal values `u[field][node index within class]` to
    /// transformed coordinates (`T⁻¹`), written into `dual`/`primal`.
    fn forward_class(role: ClassRole, u: &[f64], dual: &mut [f64], primal: &mut [f64]) {
        match role {
            ClassRole::Dual => dual.copy_from_slice(u),
            ClassRole::Primal => primal.copy_from_slice(u),
            ClassRole::Averaged => {
                let mean = u.iter().sum::<f64>() / u.len() as f64;
                primal[0] = mean;
                let mut acc = 0.0;
                for k in 0..u.len() - 1 {
                    acc += u[k] - mean;
                    dual[k] = acc;
                }
            }
        }
    }

    /// Transformed coordinates back to nodal values (`T`).
    fn backward_class(role: ClassRole, dual: &[f64], primal: &[f64], u: &mut [f64]) {
        match role {
            ClassRole::Dual => u.copy_from_slice(dual),
            ClassRole::Primal => u.copy_from_slice(primal),
            ClassRole::Averaged => {
                let m = u.len();
                for i in 0..m {
                    let cur = if i < m - 1 { dual[i] } else { 0.0 };
                    let prev = if i > 0 { dual[i - 1] } else { 0.0 };
                    u[i] = primal[0] + cur - prev;
                }
            }
        }
    }

    /// `Tᵀ` restricted to one class and field.
    fn transpose_class(role: ClassRole, u: &[f64], dual: &mut [f64], primal: &mut [f64]) {
        match role {
            ClassRole::Dual => dual.copy_from_slice(u),
            ClassRole::Primal => primal.copy_from_slice(u),
            ClassRole::Averaged => {
                primal[0] = u.iter().sum();
                for k in 0..u.len() - 1 {
                    dual[k] = u[k] - u[k + 1];
                }
            }
        }
    }

    fn for_each_class_field<F>(&self, decomp: &Decomposition, mut f: F)
    where
        F: FnMut(usize, usize, std::ops::Range<usize>, std::ops::Range<usize>),
    {
        for c in 0..decomp.classes.len() {
            let (d, p) = self.class_split(decomp, c);
            for field in 0..FIELDS {
                let ds = self.dual_start[c] + field * d;
                let ps = self.n_dual + self.primal_start[c] + field * p;
                f(c, field, ds..ds + d, ps..ps + p);
            }
        }
    }

    fn map_global<G>(&self, decomp: &Decomposition, global: &[f64], op: G) -> Vec<f64>
    where
        G: Fn(ClassRole, &[f64], &mut [f64], &mut [f64]),
    {
        let mut out = vec![0.0; self.n_interface()];
        let mut buf = Vec::new();
        let mut tmp_p = Vec::new();
        self.for_each_class_field(decomp, |c, field, dr, pr| {
            buf.clear();
            buf.extend(decomp.classes[c].nodes.iter().map(|&n| global[FIELDS * n + field]));
            tmp_p.clear();
            tmp_p.resize(pr.len(), 0.0);
            let (dual_part, _) = out.split_at_mut(self.n_dual);
            op(self.roles[c], &buf, &mut dual_part[dr.clone()], &mut tmp_p);
            out[pr].copy_from_slice(&tmp_p);
        });
        out
    }

    /// Interface coordinates of a global nodal vector (`T⁻¹` on Γ).
    pub fn to_coords(&self, decomp: &Decomposition, global: &[f64]) -> Vec<f64> {
        self.map_global(decomp, global, Self::forward_class)
    }

    /// `Tᵀ` on Γ, used to carry right-hand sides into the new basis.
    pub fn transpose_to_coords(&self, decomp: &Decomposition, global: &[f64]) -> Vec<f64> {
        self.map_global(decomp, global, Self::transpose_class)
    }

    /// Writes `T coords` into the Γ entries of `global`; other entries are
    /// left alone.
    pub fn from_coords(&self, decomp: &Decomposition, coords: &[f64], global: &mut [f64]) {
        let mut buf = Vec::new();
        self.for_each_class_field(decomp, |c, field, dr, pr| {
            let m = decomp.classes[c].nodes.len();
            buf.clear();
            buf.resize(m, 0.0);
            Self::backward_class(self.roles[c], &coords[dr], &coords[pr], &mut buf);
            for (k, &n) in decomp.classes[c].nodes.iter().enumerate() {
                global[FIELDS * n + field] = buf[k];
            }
        });
    }

    /// Local `T^(j)` for subdomain `s`: rows are local nodal dofs
    /// (`2·local_node + field`), columns the local `[I, Δ, Π]` coordinates.
    pub fn local_transform(&self, decomp: &Decomposition, s: usize) -> LocalLayout {
        let sub = &decomp.subdomains[s];
        let n_local = sub.numbering.len();
        let n_i = FIELDS * sub.interior_nodes.len();
        let mut n_delta = 0;
        let mut n_pi = 0;
        for &c in &sub.classes {
            let (d, p) = self.class_split(decomp, c);
            n_delta += FIELDS * d;
            n_pi += FIELDS * p;
        }
        let mut trip = Vec::new();
        for (k, &l) in sub.interior_nodes.iter().enumerate() {
            for f in 0..FIELDS {
                trip.push((FIELDS * l + f, FIELDS * k + f, 1.0));
            }
        }
        let mut delta_global = Vec::with_capacity(n_delta);
        let mut pi_global = Vec::with_capacity(n_pi);
        let mut class_delta = Vec::with_capacity(sub.classes.len());
        let (mut od, mut op) = (n_i, n_i + n_delta);
        for &c in &sub.classes {
            let (d, p) = self.class_split(decomp, c);
            class_delta.push(od - n_i..od - n_i + FIELDS * d);
            let nodes = &decomp.classes[c].nodes;
            let locals: Vec<usize> = nodes.iter().map(|&n| sub.numbering.local(n).unwrap()).collect();
            for f in 0..FIELDS {
                let row = |i: usize| FIELDS * locals[i] + f;
                match self.roles[c] {
                    ClassRole::Dual => {
                        for i in 0..nodes.len() {
                            trip.push((row(i), od + i, 1.0));
                        }
                    }
                    ClassRole::Primal => {
                        for i in 0..nodes.len() {
                            trip.push((row(i), op + i, 1.0));
                        }
                    }
                    ClassRole::Averaged => {
                        let m = nodes.len();
                        for i in 0..m {
                            trip.push((row(i), op, 1.0));
                            if i < m - 1 {
                                trip.push((row(i), od + i, 1.0));
                            }
                            if i > 0 {
                                trip.push((row(i), od + i - 1, -1.0));
                            }
                        }
                    }
                }
                let ds = self.dual_start[c] + f * d;
                delta_global.extend(ds..ds + d);
                let ps = self.primal_start[c] + f * p;
                pi_global.extend(ps..ps + p);
                od += d;
                op += p;
            }
        }
        let n = FIELDS * n_local;
        LocalLayout {
            t: CsrMatrix::from_triplets(n, n, &trip),
            n_i,
            n_delta,
            n_pi,
            delta_global,
            pi_global,
            class_delta,
        }
    }
}

/// Per-subdomain coordinate layout `[I, Δ, Π]` and its maps into the
/// global dual and primal coordinate lists.
#[derive(Debug, Clone)]
pub struct LocalLayout {
    pub t: CsrMatrix,
    pub n_i: usize,
    pub n_delta: usize,
    pub n_pi: usize,
    /// Global dual index of each local Δ coordinate.
    pub delta_global: Vec<usize>,
    /// Global primal index of each local Π coordinate.
    pub pi_global: Vec<usize>,
    /// Range of local Δ coordinates owned by each entry of `Subdomain::classes`.
    pub class_delta: Vec<std::ops::Range<usize>>,
}

impl LocalLayout {
    pub fn n_total(&self) -> usize {
        self.n_i + self.n_delta + self.n_pi
    }

    pub fn n_gamma(&self) -> usize {
        self.n_delta + self.n_pi
    }
}
