//! Detector verdicts over a lattice of `(t0, x0, r, p, ν)`.

use nssl_core::detector::{
    concentration_p3, concentration_rate, epsilon_regularity, wolf_test, Criterion, DetectionVerdict, Thresholds,
    Variant,
};
use nssl_core::{CylinderSpec, Error, SampledField};
use rayon::prelude::*;

use crate::config::{Lattice, LatticePoint};

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub point: LatticePoint,
    pub criterion: Criterion,
    pub result: Result<DetectionVerdict, Error>,
}

/// Whether `criterion` runs at `pt`. Criteria independent of `p` or `ν`
/// run once per distinct parameter set; concentration needs `p > 3`.
pub fn applies(criterion: Criterion, pt: &LatticePoint) -> bool {
    match criterion {
        Criterion::MorreyOscillation | Criterion::MorreyPlain => pt.nu_slot == 0 && pt.p >= 2.0,
        Criterion::Wolf | Criterion::ConcentrationP3 => pt.p_slot == 0 && pt.nu_slot == 0,
        Criterion::ConcentrationGeneral => pt.p > 3.0,
    }
}

pub fn evaluate(
    field: &SampledField,
    pt: &LatticePoint,
    criterion: Criterion,
    th: &Thresholds,
    level_floor_cells: f64,
) -> Result<DetectionVerdict, Error> {
    match criterion {
        Criterion::MorreyOscillation => {
            epsilon_regularity(field, pt.t0, pt.x0, pt.r, pt.p, Variant::Oscillation, th)
        }
        Criterion::MorreyPlain => epsilon_regularity(field, pt.t0, pt.x0, pt.r, pt.p, Variant::Plain, th),
        Criterion::Wolf => wolf_test(field, &CylinderSpec::new(pt.t0, pt.x0, pt.r)?, th.wolf_eps),
        Criterion::ConcentrationP3 => concentration_p3(field, pt.t0, pt.x0, pt.r, th.delta_star, level_floor_cells),
        Criterion::ConcentrationGeneral => {
            concentration_rate(field, pt.t0, pt.x0, pt.r, pt.p, pt.nu, th.delta_star)
        }
    }
}

/// Runs every applicable criterion at every lattice point on `jobs` worker
/// threads (`0` = rayon default). Results come back in lattice order, then
/// criterion order, whatever the completion order.
pub fn scan(
    field: &SampledField,
    lattice: &Lattice,
    th: &Thresholds,
    jobs: usize,
) -> Result<Vec<ScanOutcome>, rayon::ThreadPoolBuildError> {
    let criteria = lattice.criteria();
    let tasks: Vec<(LatticePoint, Criterion)> = lattice
        .points()
        .into_iter()
        .flat_map(|pt| criteria.iter().filter(move |c| applies(**c, &pt)).map(move |&c| (pt, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(point, criterion)| {
                log::debug!("lattice point {} {}", point.index, criterion.as_str());
                ScanOutcome {
                    point,
                    criterion,
                    result: evaluate(field, &point, criterion, th, lattice.level_floor_cells),
                }
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nssl_core::detector::Verdict;
    use nssl_core::Grid;

    fn lattice() -> Lattice {
        serde_json::from_str(
            r#"{"t0":[1.0],"x0":[[0,0,0],[0.2,0.1,-0.3]],"r":[0.5,0.25],"p":[3,6,"inf"],"nu":[2,3]}"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_is_regular_everywhere() {
        let g = Grid::cube(24, -1.0, 1.0, 33, (0.0, 1.0), false).unwrap();
        let f = SampledField::from_fn(g, true, |_, _| ([0.0; 3], 0.0)).unwrap();
        let out = scan(&f, &lattice(), &Thresholds::default(), 2).unwrap();
        assert!(!out.is_empty());
        for o in &out {
            assert_eq!(o.result.as_ref().unwrap().verdict, Verdict::RegularIndicated, "{o:?}");
        }
    }

    #[test]
    fn order_does_not_depend_on_workers() {
        let g = Grid::cube(16, -1.0, 1.0, 9, (0.0, 1.0), false).unwrap();
        let f = SampledField::from_fn(g, false, |t, x| ([x[1] * t, -x[0], 0.3 * x[2]], 0.0)).unwrap();
        let l = lattice();
        let one = scan(&f, &l, &Thresholds::default(), 1).unwrap();
        let four = scan(&f, &l, &Thresholds::default(), 4).unwrap();
        assert_eq!(one.len(), four.len());
        for (a, b) in one.iter().zip(&four) {
            assert_eq!((a.point.index, a.criterion), (b.point.index, b.criterion));
            assert_eq!(a.result, b.result);
        }
        let idx: Vec<usize> = one.iter().map(|o| o.point.index).collect();
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn applicability() {
        let pts = lattice().points();
        let count = |c| pts.iter().filter(|p| applies(c, p)).count();
        // 4 (x0, r) pairs
        assert_eq!(count(Criterion::Wolf), 4);
        assert_eq!(count(Criterion::MorreyPlain), 12);
        assert_eq!(count(Criterion::ConcentrationGeneral), 16);
    }
}
