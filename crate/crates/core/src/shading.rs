//! Sun shadowing by ray casting from patch centroids toward the sun.

use rayon::prelude::*;

use crate::geometry::{ray_hits_triangle, Vec3};
use crate::mesh::Patch;

/// True when patch `i` receives no direct beam: either it faces away from
/// the sun or the ray from its centroid toward the sun hits another patch.
pub fn sun_shading(i: usize, r_unit: &Vec3, patches: &[Patch]) -> bool {
    let p = &patches[i];
    if p.normal.dot(r_unit) <= 0.0 {
        return true;
    }
    patches
        .iter()
        .enumerate()
        .any(|(j, q)| j != i && ray_hits_triangle(&p.centroid, r_unit, &q.triangle(), &q.normal, f64::INFINITY).is_some())
}

/// Shading flags for every patch. All patches are shaded at night.
pub fn shade_all(patches: &[Patch], r_unit: &Vec3, sun_up: bool) -> Vec<bool> {
    if !sun_up {
        return vec![true; patches.len()];
    }
    (0..patches.len()).into_par_iter().map(|i| sun_shading(i, r_unit, patches)).collect()
}
