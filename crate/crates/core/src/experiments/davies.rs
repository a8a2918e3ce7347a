//! Trajectories k(t,x,y)/k(t,x₀,y₀) for the reference operator and for H_θ.

use std::collections::BTreeMap;

use crate::eigen2d::Basis2d;
use crate::longitudinal::Kernel1d;
use crate::reference_kernel::{ref_kernel, TubePoint};
use crate::twisted::evolve::{evolve, state_value, Evolver};
use crate::Result;

use super::ExperimentReport;

const COLUMNS: [&str; 4] = ["t", "pair", "k", "ratio"];

/// Largest relative spread max/min − 1 of each trajectory over the last decade of times.
fn last_decade_spread(rep: &mut ExperimentReport, pairs: usize, times: &[f64]) {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for p in 0..pairs {
        let vals: Vec<f64> = rep.rows.iter().filter(|r| r[1] == p as f64 && r[0] >= 0.1 * t_max * (1.0 - 1e-12)).map(|r| r[3]).collect();
        if vals.is_empty() {
            continue;
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi / lo - 1.0);
    }
    rep.set_envelope("last_decade_spread", worst);
}

/// Reference operator A from its tensor kernel; trajectories flatten at large t.
pub fn davies_ratio_reference(
    basis: &Basis2d<f64>,
    k1: &Kernel1d<f64>,
    pairs: &[(TubePoint<f64>, TubePoint<f64>)],
    base: (TubePoint<f64>, TubePoint<f64>),
    times: &[f64],
    modes: usize,
) -> ExperimentReport {
    let mut rep = ExperimentReport::new("davies_reference", &COLUMNS);
    rep.note("operator", "reference");
    for &t in times {
        let k0 = ref_kernel(basis, k1, t, base.0, base.1, modes);
        if !k0.valid {
            rep.warn(format!("t = {t}: base pair outside the validity window"));
        }
        for (p, &(x, y)) in pairs.iter().enumerate() {
            let k = ref_kernel(basis, k1, t, x, y, modes);
            rep.push_row(vec![t, p as f64, k.value, k.value / k0.value]);
        }
    }
    last_decade_spread(&mut rep, pairs.len(), times);
    rep
}

/// Same trajectories for H_θ from evolved columns (node pairs).
pub fn davies_ratio_twisted<E: Evolver<f64> + ?Sized>(prop: &E, pairs: &[(usize, usize)], base: (usize, usize), times: &[f64]) -> Result<ExperimentReport> {
    let grid = prop.grid();
    let n2 = grid.n2();
    let mut rep = ExperimentReport::new("davies_twisted", &COLUMNS);
    rep.note("operator", "twisted");
    rep.note("status", "open question");
    let mut fields = BTreeMap::new();
    for &y in pairs.iter().map(|(_, y)| y).chain([&base.1]) {
        if !fields.contains_key(&y) {
            fields.insert(y, evolve(prop, y, times)?);
        }
    }
    for (i, &t) in times.iter().enumerate() {
        let f0 = &fields[&base.1];
        let k0 = state_value(&f0.columns[i], f0.lift.as_deref(), n2, base.0);
        for (p, &(x, y)) in pairs.iter().enumerate() {
            let f = &fields[&y];
            let k = state_value(&f.columns[i], f.lift.as_deref(), n2, x);
            rep.push_row(vec![t, p as f64, k, k / k0]);
        }
    }
    last_decade_spread(&mut rep, pairs.len(), times);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen2d::{eigenpairs_2d, EigenMethod};
    use crate::geometry::{CrossSection, Shape, TubeGrid, TwistProfile};
    use crate::longitudinal::Line;
    use crate::twisted::{ModalOperator, ModalPropagator, StepPolicy};

    #[test]
    fn reference_trajectories_flatten() {
        let cs = CrossSection::new_unchecked(Shape::default_ellipse(), 0.1);
        let basis = eigenpairs_2d(&cs, 4, EigenMethod::Auto).unwrap();
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let k1 = Kernel1d::new(&profile, Line::new(256.0, 0.25).unwrap());
        let c = cs.origin_node();
        let pt = |x3: f64| TubePoint { node: c, x3 };
        let pairs = [(pt(0.0), pt(0.0)), (pt(1.0), pt(-2.0)), (pt(3.0), pt(2.0))];
        let times: Vec<f64> = (0..=10).map(|i| 100.0 * 10f64.powf(i as f64 / 10.0)).collect();
        let rep = davies_ratio_reference(&basis, &k1, &pairs, pairs[0], &times, 4);
        assert!(rep.rows.iter().filter(|r| r[1] == 0.0).all(|r| (r[3] - 1.0).abs() < 1e-14));
        assert!(rep.envelope("last_decade_spread").unwrap() < 0.05, "{:?}", rep.envelopes);
    }

    #[test]
    fn twisted_trajectories_are_labelled() {
        let cs = CrossSection::new_unchecked(Shape::default_ellipse(), 0.1);
        let grid = TubeGrid::new(cs, 8.0, 0.25, 1.0).unwrap();
        let op = ModalOperator::new(grid, TwistProfile::new(3.0, 1.0).unwrap(), None, 3).unwrap();
        let prop = ModalPropagator::new(&op, StepPolicy::default());
        let x0 = op.grid.nearest([0.0, 0.0, 0.0]).unwrap();
        let x1 = op.grid.nearest([0.0, 0.0, 2.0]).unwrap();
        let rep = davies_ratio_twisted(&prop, &[(x0, x0), (x1, x0)], (x0, x0), &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(rep.provenance["status"], "open question");
        assert!(rep.checks.is_empty());
        assert!(rep.rows.iter().filter(|r| r[1] == 0.0).all(|r| r[3] == 1.0));
    }
}
