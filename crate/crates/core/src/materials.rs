//! Layered material constructions and the patch-to-material binding step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_hits_triangle, Vec3};
use crate::mesh::Patch;
use crate::moisture::FuelParams;

/// Height tolerance above the ground datum for ground-level patches (m).
pub const GROUND_HEIGHT_TOL: f64 = 1e-3;
/// Maximum angle between a ground patch normal and the vertical.
pub const GROUND_MAX_TILT_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// m
    pub thickness: f64,
    /// W m⁻¹ K⁻¹
    pub conductivity: f64,
    /// kg m⁻³
    pub density: f64,
    /// J kg⁻¹ K⁻¹
    pub specific_heat: f64,
}

impl Layer {
    pub fn new(thickness: f64, conductivity: f64, density: f64, specific_heat: f64) -> Self {
        Self {
            thickness,
            conductivity,
            density,
            specific_heat,
        }
    }

    pub fn resistance(&self) -> f64 {
        self.thickness / self.conductivity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialKind {
    #[default]
    Inert,
    Fuel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialStack {
    pub name: String,
    /// Outer to inner.
    #[serde(default)]
    pub layers: Vec<Layer>,
    pub surface_albedo: f64,
    pub surface_emissivity: f64,
    #[serde(default)]
    pub kind: MaterialKind,
    #[serde(default)]
    pub fuel_params: Option<FuelParams>,
    /// K
    #[serde(default)]
    pub ignition_temperature: Option<f64>,
}

impl MaterialStack {
    pub fn inert(name: impl Into<String>, layers: Vec<Layer>, albedo: f64, emissivity: f64) -> Self {
        Self {
            name: name.into(),
            layers,
            surface_albedo: albedo,
            surface_emissivity: emissivity,
            kind: MaterialKind::Inert,
            fuel_params: None,
            ignition_temperature: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::InvalidMaterial {
            name: self.name.clone(),
            msg,
        };
        if !(0.0..=1.0).contains(&self.surface_albedo) {
            return Err(bad(format!("albedo {} outside [0,1]", self.surface_albedo)));
        }
        if !(self.surface_emissivity > 0.0 && self.surface_emissivity <= 1.0) {
            return Err(bad(format!("emissivity {} outside (0,1]", self.surface_emissivity)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let ok = [l.thickness, l.conductivity, l.density, l.specific_heat]
                .iter()
                .all(|v| *v > 0.0 && v.is_finite());
            if !ok {
                return Err(bad(format!("layer {i} has a nonpositive property")));
            }
        }
        match self.kind {
            MaterialKind::Fuel => {
                let fp = self
                    .fuel_params
                    .as_ref()
                    .ok_or_else(|| bad("fuel material requires fuel_params".into()))?;
                fp.validate().map_err(|e| bad(e.to_string()))?;
            }
            MaterialKind::Inert => {
                if self.layers.is_empty() {
                    return Err(bad("inert material needs at least one layer".into()));
                }
            }
        }
        Ok(())
    }

    /// Steady-state transmittance of the whole stack, W m⁻² K⁻¹.
    pub fn u_value(&self) -> f64 {
        1.0 / self.layers.iter().map(Layer::resistance).sum::<f64>()
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }
}

/// Which patches a binding applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    All,
    /// Half-open id range.
    IdRange { start: usize, end: usize },
    Group(String),
    CentroidBox { min: [f64; 3], max: [f64; 3] },
}

impl Selector {
    pub fn matches(&self, p: &Patch) -> bool {
        match self {
            Selector::All => true,
            Selector::IdRange { start, end } => (*start..*end).contains(&p.id),
            Selector::Group(g) => p.group.as_deref() == Some(g.as_str()),
            Selector::CentroidBox { min, max } => {
                (0..3).all(|k| p.centroid[k] >= min[k] && p.centroid[k] <= max[k])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub material: String,
    pub select: Selector,
}

/// The scene after binding: immutable input to every later stage.
#[derive(Debug, Clone)]
pub struct AssembledDomain {
    pub patches: Vec<Patch>,
    pub materials: Vec<MaterialStack>,
    pub material_index: HashMap<String, usize>,
    /// Height of the horizontal ground plane (m).
    pub ground_datum: f64,
}

impl AssembledDomain {
    pub fn material_of(&self, patch: usize) -> &MaterialStack {
        &self.materials[self.patches[patch].material.expect("assembled domain has bound patches")]
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }
}

pub fn assign_materials(
    mut patches: Vec<Patch>,
    materials: Vec<MaterialStack>,
    bindings: &[Binding],
    ground_datum: f64,
) -> Result<AssembledDomain> {
    let mut material_index = HashMap::new();
    for (i, m) in materials.iter().enumerate() {
        m.validate()?;
        if material_index.insert(m.name.clone(), i).is_some() {
            return Err(Error::InvalidMaterial {
                name: m.name.clone(),
                msg: "duplicate material name".into(),
            });
        }
    }
    let resolved: Vec<usize> = bindings
        .iter()
        .map(|b| {
            material_index
                .get(&b.material)
                .copied()
                .ok_or_else(|| Error::UnknownMaterial(b.material.clone()))
        })
        .collect::<Result<_>>()?;

    let cos_tilt = GROUND_MAX_TILT_DEG.to_radians().cos();
    for (i, p) in patches.iter_mut().enumerate() {
        p.id = i;
        let mut hit: Option<usize> = None;
        for (bi, b) in bindings.iter().enumerate() {
            if b.select.matches(p) {
                if let Some(first) = hit {
                    return Err(Error::ConflictingBindings {
                        patch: i,
                        first,
                        second: bi,
                    });
                }
                hit = Some(bi);
            }
        }
        let bi = hit.ok_or(Error::UnboundPatch(i))?;
        let m = &materials[resolved[bi]];
        p.material = Some(resolved[bi]);
        p.albedo = match (&m.kind, &m.fuel_params) {
            (MaterialKind::Fuel, Some(fp)) => fp.albedo,
            _ => m.surface_albedo,
        };
        p.emissivity = m.surface_emissivity;
        p.lw_reflectivity = 1.0 - m.surface_emissivity;
        p.height = p.centroid.z - ground_datum;
        p.is_ground = p.height <= GROUND_HEIGHT_TOL && p.normal.z >= cos_tilt;
    }
    Ok(AssembledDomain {
        patches,
        materials,
        material_index,
        ground_datum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Diagnostic {
    DuplicatePatch { first: usize, second: usize },
    InvertedWinding { patch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub patch_count: usize,
    pub total_area: f64,
    pub warnings: Vec<Diagnostic>,
}

/// Report-only scan for duplicate faces and normals pointing into a solid.
///
/// Winding is flagged when the outward ray from a patch centroid first
/// meets another surface from its back side.
pub fn validate_domain(patches: &[Patch]) -> Result<DiagnosticsReport> {
    if patches.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut warnings = Vec::new();

    let key = |p: &Patch| {
        let mut vs: Vec<[i64; 3]> = p
            .vertices
            .iter()
            .map(|v| [(v.x * 1e9).round() as i64, (v.y * 1e9).round() as i64, (v.z * 1e9).round() as i64])
            .collect();
        vs.sort();
        vs
    };
    let mut seen: HashMap<Vec<[i64; 3]>, usize> = HashMap::new();
    for p in patches {
        if let Some(&first) = seen.get(&key(p)) {
            warnings.push(Diagnostic::DuplicatePatch { first, second: p.id });
        } else {
            seen.insert(key(p), p.id);
        }
    }

    for p in patches {
        let mut nearest: Option<(f64, Vec3)> = None;
        for q in patches {
            if q.id == p.id {
                continue;
            }
            if let Some(l) = ray_hits_triangle(&p.centroid, &p.normal, &q.triangle(), &q.normal, f64::INFINITY) {
                if nearest.is_none_or(|(best, _)| l < best) {
                    nearest = Some((l, q.normal));
                }
            }
        }
        if let Some((_, n)) = nearest {
            if n.dot(&p.normal) > 1e-12 {
                warnings.push(Diagnostic::InvertedWinding { patch: p.id });
            }
        }
    }

    Ok(DiagnosticsReport {
        patch_count: patches.len(),
        total_area: patches.iter().map(|p| p.area).sum(),
        warnings,
    })
}
