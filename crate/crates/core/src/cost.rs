//! Fabrication and packaging cost model: dies-per-wafer geometry, Murphy
//! yield, and package composition. Pure functions; energy/cost can be
//! recomputed after a run for different prices.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Price and process constants. Defaults: 300 mm wafer at 7 nm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConstants {
    pub wafer_price: f64,
    pub wafer_diameter_mm: f64,
    pub scribe_mm: f64,
    pub edge_loss_mm: f64,
    /// Defect density as commonly quoted for this model. Note: with
    /// `per_mm2` a 0.07 density makes yields of reticle-sized dies nearly
    /// zero; industry data sheets usually quote per cm². The unit is
    /// explicit so either convention can be selected.
    pub defect_density: f64,
    pub defect_density_unit: DefectUnit,
    /// Silicon interposer price as a fraction of a compute-die price, per
    /// die-DRAM pair.
    pub interposer_fraction: f64,
    /// Organic substrate price as a fraction of a compute-die price, per die.
    pub substrate_fraction: f64,
    /// Bonding overhead applied to the subtotal of physical components.
    pub bonding_overhead: f64,
    pub hbm_price_per_gb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectUnit {
    PerMm2,
    PerCm2,
}

impl Default for CostConstants {
    fn default() -> Self {
        Self {
            wafer_price: 6047.0,
            wafer_diameter_mm: 300.0,
            scribe_mm: 0.2,
            edge_loss_mm: 4.0,
            defect_density: 0.07,
            defect_density_unit: DefectUnit::PerMm2,
            interposer_fraction: 0.20,
            substrate_fraction: 0.10,
            bonding_overhead: 0.05,
            hbm_price_per_gb: 7.5,
        }
    }
}

impl CostConstants {
    pub fn any_nonpositive(&self) -> bool {
        [
            self.wafer_price,
            self.wafer_diameter_mm,
            self.scribe_mm,
            self.edge_loss_mm,
            self.defect_density,
            self.interposer_fraction,
            self.substrate_fraction,
            self.bonding_overhead,
            self.hbm_price_per_gb,
        ]
        .iter()
        .any(|x| *x <= 0.0)
    }

    pub fn defects_per_mm2(&self) -> f64 {
        match self.defect_density_unit {
            DefectUnit::PerMm2 => self.defect_density,
            DefectUnit::PerCm2 => self.defect_density / 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    DieDoesNotFit { die_w: f64, die_h: f64, usable_radius: f64 },
    NoGoodDies,
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::DieDoesNotFit { die_w, die_h, usable_radius } => write!(
                f,
                "die {die_w}x{die_h} mm yields zero placements in usable radius {usable_radius} mm"
            ),
            CostError::NoGoodDies => write!(f, "zero good dies per wafer"),
        }
    }
}

impl std::error::Error for CostError {}

/// Murphy's die-yield model: ((1 - e^(-A*D)) / (A*D))^2, with limit 1 as
/// A*D -> 0. `exp_m1` keeps the small-x regime accurate to ~1 ulp.
pub fn murphy_yield(area_mm2: f64, defects_per_mm2: f64) -> f64 {
    let x = area_mm2 * defects_per_mm2;
    if x == 0.0 {
        return 1.0;
    }
    let g = (-(-x).exp_m1()) / x;
    g * g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaferFit {
    /// Whole (die + scribe) rectangles inside the usable disk.
    pub placements: u64,
    pub die_yield: f64,
    /// placements x yield; fractional by design.
    pub good_dies: f64,
}

/// Count axis-aligned (die + scribe) cells fully inside the usable wafer
/// disk, grid anchored at the wafer center, then derate by Murphy yield.
pub fn dies_per_wafer(die_w: f64, die_h: f64, k: &CostConstants) -> Result<WaferFit, CostError> {
    let radius = k.wafer_diameter_mm / 2.0 - k.edge_loss_mm;
    let cell_w = die_w + k.scribe_mm;
    let cell_h = die_h + k.scribe_mm;
    let mut placements: u64 = 0;
    if radius > 0.0 {
        // Rows are symmetric about the center line; for row j >= 0 the far
        // edge sits at (j+1)*cell_h, and the admissible half-width follows
        // from the circle equation.
        let mut j = 0u64;
        loop {
            let y_far = (j + 1) as f64 * cell_h;
            if y_far > radius {
                break;
            }
            let x_allow = (radius * radius - y_far * y_far).sqrt();
            let per_side = (x_allow / cell_w).floor() as u64;
            placements += 2 * (2 * per_side);
            j += 1;
        }
    }
    if placements == 0 {
        return Err(CostError::DieDoesNotFit { die_w, die_h, usable_radius: radius });
    }
    let die_yield = murphy_yield(die_w * die_h, k.defects_per_mm2());
    Ok(WaferFit {
        placements,
        die_yield,
        good_dies: placements as f64 * die_yield,
    })
}

pub fn die_cost(wafer_price: f64, good_dies: f64) -> Result<f64, CostError> {
    if good_dies <= 0.0 {
        return Err(CostError::NoGoodDies);
    }
    Ok(wafer_price / good_dies)
}

/// One package's bill of materials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PackageCost {
    pub compute: f64,
    pub hbm: f64,
    pub interposer: f64,
    pub substrate: f64,
    pub bonding: f64,
    pub total: f64,
}

/// compute = n x die price; HBM by capacity; one interposer share per
/// die-DRAM pair; substrate per die; bonding overhead on the subtotal.
pub fn package_cost(
    n_compute_dies: u32,
    die_cost: f64,
    hbm_gb_total: f64,
    hbm_pairs: u32,
    k: &CostConstants,
) -> PackageCost {
    let compute = n_compute_dies as f64 * die_cost;
    let hbm = hbm_gb_total * k.hbm_price_per_gb;
    let interposer = k.interposer_fraction * die_cost * hbm_pairs as f64;
    let substrate = k.substrate_fraction * die_cost * n_compute_dies as f64;
    let physical = compute + hbm + interposer + substrate;
    let bonding = k.bonding_overhead * physical;
    PackageCost {
        compute,
        hbm,
        interposer,
        substrate,
        bonding,
        total: physical + bonding,
    }
}

/// Full system cost for a validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub die_width_mm: f64,
    pub die_height_mm: f64,
    pub die_area_mm2: f64,
    pub placements_per_wafer: u64,
    pub die_yield: f64,
    pub good_dies_per_wafer: f64,
    pub die_cost: f64,
    pub package: PackageCost,
    pub packages: u32,
    pub node_cost: f64,
}

pub fn system_cost(sys: &crate::sysconfig::ValidatedSystem) -> Result<CostReport, CostError> {
    let k = &sys.cfg.cost;
    let g = &sys.geometry;
    let fit = dies_per_wafer(g.die_width_mm, g.die_height_mm, k)?;
    let dc = die_cost(k.wafer_price, fit.good_dies)?;
    let p = &sys.cfg.packaging;
    let n_dies = p.dies_x * p.dies_y;
    let hbm_gb = p.hbm_per_die as f64 / (1u64 << 30) as f64 * n_dies as f64;
    let hbm_pairs = if p.hbm_per_die > 0 { n_dies } else { 0 };
    let pkg = package_cost(n_dies, dc, hbm_gb, hbm_pairs, k);
    let packages = p.packages_x * p.packages_y;
    Ok(CostReport {
        die_width_mm: g.die_width_mm,
        die_height_mm: g.die_height_mm,
        die_area_mm2: g.die_area_mm2,
        placements_per_wafer: fit.placements,
        die_yield: fit.die_yield,
        good_dies_per_wafer: fit.good_dies,
        die_cost: dc,
        package: pkg,
        packages,
        node_cost: packages as f64 * pkg.total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn murphy_limit_and_reference_point() {
        assert_eq!(murphy_yield(0.0, 0.07), 1.0);
        assert!(murphy_yield(1e-12, 0.07) > 0.999999999);
        // A = 1 mm², D = 0.07/mm²
        assert!((murphy_yield(1.0, 0.07) - 0.9327746095733392).abs() < 1e-12);
    }

    #[test]
    fn murphy_strictly_decreasing_in_area() {
        let mut last = 1.0;
        for i in 1..200 {
            let a = i as f64 * 0.5;
            let y = murphy_yield(a, 0.07);
            assert!(y < last, "not decreasing at area {a}");
            last = y;
        }
    }

    /// Brute-force placement oracle: enumerate cells, keep those whose four
    /// corners are inside the usable disk.
    fn placement_oracle(die_w: f64, die_h: f64, k: &CostConstants) -> u64 {
        let r = k.wafer_diameter_mm / 2.0 - k.edge_loss_mm;
        let cw = die_w + k.scribe_mm;
        let ch = die_h + k.scribe_mm;
        let max_i = (r / cw).ceil() as i64 + 1;
        let max_j = (r / ch).ceil() as i64 + 1;
        let mut count = 0;
        for j in -max_j..max_j {
            for i in -max_i..max_i {
                let xs = [i as f64 * cw, (i + 1) as f64 * cw];
                let ys = [j as f64 * ch, (j + 1) as f64 * ch];
                let inside = xs
                    .iter()
                    .all(|x| ys.iter().all(|y| x * x + y * y <= r * r));
                if inside {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn placements_match_brute_force_oracle() {
        let k = CostConstants::default();
        let fit = dies_per_wafer(10.0, 10.0, &k).unwrap();
        assert_eq!(fit.placements, placement_oracle(10.0, 10.0, &k));

        // A spread of shapes, including non-square ones.
        let mut state = 99u64;
        for _ in 0..50 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let w = 2.0 + (state >> 33) as f64 % 40.0 + ((state >> 20) & 0xff) as f64 / 256.0;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let h = 2.0 + (state >> 33) as f64 % 40.0 + ((state >> 20) & 0xff) as f64 / 256.0;
            let fit = dies_per_wafer(w, h, &k).unwrap();
            assert_eq!(fit.placements, placement_oracle(w, h, &k), "die {w}x{h}");
        }
    }

    #[test]
    fn oversized_die_is_an_error() {
        let k = CostConstants::default();
        assert!(matches!(
            dies_per_wafer(292.0, 292.0, &k),
            Err(CostError::DieDoesNotFit { .. })
        ));
    }

    #[test]
    fn quadrupling_area_quarters_placements_with_slack() {
        let k = CostConstants::default();
        for (w, h) in [(5.0, 5.0), (8.0, 8.0), (12.0, 12.0)] {
            let small = dies_per_wafer(w, h, &k).unwrap().placements;
            let big = dies_per_wafer(2.0 * w, 2.0 * h, &k).unwrap().placements;
            assert!(big <= small / 4 + small / 10, "{w}x{h}: {small} vs {big}");
        }
    }

    #[test]
    fn die_cost_examples() {
        assert!((die_cost(6047.0, 100.0).unwrap() - 60.47).abs() < 1e-12);
        assert_eq!(die_cost(6047.0, 1.0).unwrap(), 6047.0);
        let c = die_cost(6047.0, 37.0).unwrap();
        assert!((c * 37.0 - 6047.0).abs() < 1e-9);
        assert!(die_cost(6047.0, 0.0).is_err());
    }

    #[test]
    fn package_composition_hand_example() {
        let k = CostConstants::default();
        // 1 die at $100, no HBM: 100 + 0 + 0 + 10 + 0.05 * 110 = 115.50
        let p = package_cost(1, 100.0, 0.0, 0, &k);
        assert!((p.total - 115.50).abs() < 1e-12);
        assert_eq!(p.interposer, 0.0);

        // Adding an 8 GB HBM device: +$60 HBM, +$20 interposer, bonding on
        // the new subtotal.
        let p = package_cost(1, 100.0, 8.0, 1, &k);
        assert!((p.hbm - 60.0).abs() < 1e-12);
        assert!((p.interposer - 20.0).abs() < 1e-12);
        assert!((p.bonding - 9.5).abs() < 1e-12);
        assert!((p.total - 199.5).abs() < 1e-12);
    }

    #[test]
    fn zero_prices_zero_total() {
        let k = CostConstants::default();
        let p = package_cost(3, 0.0, 0.0, 3, &k);
        assert_eq!(p.total, 0.0);
    }

    #[test]
    fn cost_is_homogeneous_in_prices() {
        let k = CostConstants::default();
        let mut k2 = k.clone();
        k2.hbm_price_per_gb *= 2.0;
        let base = package_cost(4, 55.0, 32.0, 4, &k);
        let scaled = package_cost(4, 110.0, 32.0, 4, &k2);
        assert!((scaled.total - 2.0 * base.total).abs() < 1e-9);
        assert!((scaled.compute - 2.0 * base.compute).abs() < 1e-9);
        assert!((scaled.bonding - 2.0 * base.bonding).abs() < 1e-9);
    }

    #[test]
    fn defect_unit_conversion() {
        let mut k = CostConstants::default();
        assert_eq!(k.defects_per_mm2(), 0.07);
        k.defect_density_unit = DefectUnit::PerCm2;
        assert!((k.defects_per_mm2() - 0.0007).abs() < 1e-18);
    }
}
