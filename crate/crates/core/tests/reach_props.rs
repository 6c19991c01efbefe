mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symmargin::prelude::*;
use symmargin::reachability::{reach_exact_linear, reach_growth_bound};
use symmargin::systems::AffineDynamics;

use common::rect;

fn affine_system() -> impl Strategy<Value = SystemSpec> {
    (prop::array::uniform4(-1.5f64..1.5), prop::array::uniform2(-1.0f64..1.0), prop::array::uniform2(0.0f64..0.3))
        .prop_map(|(a, b, w)| {
            SystemSpec::new(
                Dynamics::Affine(AffineDynamics {
                    a: vec![vec![a[0], a[1]], vec![a[2], a[3]]],
                    b: vec![vec![b[0]], vec![b[1]]],
                    e: vec![vec![1.0, 0.0], vec![0.5, 1.0]],
                    c: vec![0.1, -0.2],
                }),
                rect(&[-10.0, -10.0], &[10.0, 10.0]),
                rect(&[-1.0], &[1.0]),
                rect(&[-w[0], -w[1]], &[w[0], w[1]]),
                vec![false, false],
            )
            .unwrap()
        })
}

fn cell_box() -> impl Strategy<Value = HyperRect> {
    (prop::array::uniform2(-3.0f64..3.0), prop::array::uniform2(0.0f64..1.0))
        .prop_map(|(c, w)| rect(&[c[0], c[1]], &[c[0] + w[0], c[1] + w[1]]))
}

/// Hull of the images of every (cell corner, disturbance corner) pair.
fn corner_hull(sys: &SystemSpec, cell: &HyperRect, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = sys.disturbance_set();
    let mut lo = vec![f64::INFINITY; 2];
    let mut hi = vec![f64::NEG_INFINITY; 2];
    for k in 0..16u32 {
        let pick = |r: &HyperRect, d: usize, bit: u32| if k >> bit & 1 == 1 { r.hi()[d] } else { r.lo()[d] };
        let x = [pick(cell, 0, 0), pick(cell, 1, 1)];
        let d = [pick(w, 0, 2), pick(w, 1, 3)];
        let y = sys.step(&x, u, &d).unwrap();
        for i in 0..2 {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    (lo, hi)
}

proptest! {
    #[test]
    fn exact_linear_is_the_corner_hull(sys in affine_system(), cell in cell_box(), u in -1.0f64..1.0) {
        let r = reach_exact_linear(&sys, &cell, &[u]).unwrap();
        let (lo, hi) = corner_hull(&sys, &cell, &[u]);
        for d in 0..2 {
            prop_assert!((r.lo()[d] - lo[d]).abs() <= 1e-12 * (1.0 + lo[d].abs()));
            prop_assert!((r.hi()[d] - hi[d]).abs() <= 1e-12 * (1.0 + hi[d].abs()));
        }
    }

    #[test]
    fn exact_linear_contains_sampled_images(sys in affine_system(), cell in cell_box(), u in -1.0f64..1.0, seed in any::<u64>()) {
        let r = reach_exact_linear(&sys, &cell, &[u]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = sys.disturbance_set().clone();
        for _ in 0..64 {
            let x: Vec<f64> = (0..2).map(|d| rng.gen_range(cell.lo()[d]..=cell.hi()[d])).collect();
            let dist: Vec<f64> = (0..2).map(|d| rng.gen_range(w.lo()[d]..=w.hi()[d])).collect();
            let y = sys.step(&x, &[u], &dist).unwrap();
            prop_assert!(r.inflate(1e-12).unwrap().contains(&y));
        }
    }

    #[test]
    fn exact_linear_is_monotone(sys in affine_system(), cell in cell_box(), s in prop::array::uniform4(0.0f64..1.0), u in -1.0f64..1.0) {
        let at = |d: usize, t: f64| cell.lo()[d] + t * cell.width(d);
        let sub = rect(
            &[at(0, s[0].min(s[1])), at(1, s[2].min(s[3]))],
            &[at(0, s[0].max(s[1])), at(1, s[2].max(s[3]))],
        );
        let big = reach_exact_linear(&sys, &cell, &[u]).unwrap();
        let small = reach_exact_linear(&sys, &sub, &[u]).unwrap();
        prop_assert!(big.inflate(1e-12).unwrap().contains_rect(&small));
    }

    #[test]
    fn growth_bound_contains_unicycle_images(c in prop::array::uniform3(0.0f64..1.0), u in prop::array::uniform2(0.0f64..1.0), seed in any::<u64>()) {
        let model = common::unicycle([10, 10, 8]);
        let sys = model.system();
        let grid = model.grid();
        let dom = grid.domain();
        let x: Vec<f64> = (0..3).map(|d| dom.lo()[d] + c[d] * dom.width(d)).collect();
        let q = grid.quantize(&x);
        let cell = grid.cell_bounds(q).unwrap();
        let input = [0.25 + 0.75 * u[0], -1.0 + 2.0 * u[1]];
        let r = reach_growth_bound(sys, &cell, &input).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..64 {
            let z: Vec<f64> = (0..3).map(|d| rng.gen_range(cell.lo()[d]..=cell.hi()[d])).collect();
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.05..=0.05)).collect();
            let mut y = sys.step(&z, &input, &w).unwrap();
            // compare the heading on the unwrapped line next to the reach box
            let p = 2.0 * std::f64::consts::PI;
            y[2] += ((r.center()[2] - y[2]) / p).round() * p;
            prop_assert!(r.inflate(1e-9).unwrap().contains(&y), "{:?} not in {:?}", y, r);
        }
    }

    #[test]
    fn zero_perturbation_is_the_nominal_step(x in prop::array::uniform3(-20.0f64..20.0), u in prop::array::uniform2(-1.0f64..1.0), d in prop::array::uniform3(-0.05f64..0.05)) {
        let model = common::unicycle([4, 4, 4]);
        let sys = model.system();
        let a = sys.step(&x, &u, &d).unwrap();
        let b = sys.perturbed_step(&x, &u, &d, &[0.0; 3], 0.0).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let p = std::f64::consts::PI;
        prop_assert!((-p..p).contains(&a[2]));
    }

    #[test]
    fn double_integrator_matches_its_matrices(x in prop::array::uniform2(-6.0f64..6.0), u in -1.0f64..1.0, d in prop::array::uniform2(-0.01f64..0.01)) {
        let sys = common::double_integrator();
        let tau: f64 = 0.5;
        let y = sys.step(&x, &[u], &d).unwrap();
        let oracle = [
            x[0] + tau * x[1] + tau * tau / 2.0 * (u + d[0]),
            x[1] + tau * (u + d[1]),
        ];
        for i in 0..2 {
            prop_assert!((y[i] - oracle[i]).abs() < 1e-12);
        }
    }
}
