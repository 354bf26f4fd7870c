//! External heat sources (radiant panels, firebrands) applied to patches.

use crate::config::HeatSource;
use crate::mesh::Patch;

/// `Q_F` in W for `patch` at time `t`: every active entry that selects the
/// patch contributes `flux · A`. Entries are active on `[start, end)`.
pub fn apply_external_heat(schedule: &[HeatSource], patch: &Patch, t: f64) -> f64 {
    schedule
        .iter()
        .filter(|h| t >= h.start_s && t < h.end_s && h.select.matches(patch))
        .map(|h| h.flux_w_m2 * patch.area)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::Selector;
    use crate::scene;
    use crate::Vec3;

    fn source(flux: f64, start: f64, end: f64) -> HeatSource {
        HeatSource {
            select: Selector::All,
            start_s: start,
            end_s: end,
            flux_w_m2: flux,
        }
    }

    #[test]
    fn window_and_summation() {
        let p = &scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 1)[0];
        let s = [source(1000.0, 10.0, 20.0)];
        assert_eq!(apply_external_heat(&s, p, 5.0), 0.0);
        assert_eq!(apply_external_heat(&s, p, 10.0), 500.0);
        assert_eq!(apply_external_heat(&s, p, 20.0), 0.0);
        let two = [source(1000.0, 0.0, 100.0), source(1000.0, 0.0, 100.0)];
        assert_eq!(apply_external_heat(&two, p, 1.0), 2000.0 * p.area);
    }

    #[test]
    fn basket_disk() {
        // 0.126 m diameter sample at 12.5 kW m⁻²
        let area = std::f64::consts::PI * 0.063f64.powi(2);
        let mut p = scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 1)[0].clone();
        p.area = area;
        let q = apply_external_heat(&[source(12500.0, 0.0, f64::INFINITY)], &p, 0.0);
        assert!((q - 12500.0 * area).abs() < 1e-9);
        assert!((q - 155.6).abs() < 0.5, "{q}");
    }
}
