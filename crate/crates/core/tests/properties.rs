use std::sync::Arc;

use proptest::prelude::*;

use fracflow::convex::{prox, AbsValue, Energy, Quadratic, Space};
use fracflow::io::{read_trajectory_csv, write_trajectory_csv};
use fracflow::kernels::{cell_weights, resolvent_kernel, rl_pair, Member};
use fracflow::plaplace::{MovingDomain, PLaplaceEnergy, SpatialGrid};
use fracflow::stepper::{solve_flow, FlowConfig};
use fracflow::verify::{ab_estimate_certificate, chain_rule_certificate, Certificate};
use fracflow::TimeGrid;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rl_weights_positive_nonincreasing_and_telescoping(alpha in 0.05f64..0.95, n in 1usize..300, t in 0.1f64..5.0) {
        let grid = TimeGrid::new(t, n).unwrap();
        let pair = rl_pair(alpha).unwrap();
        for member in [Member::K, Member::L] {
            let w = cell_weights(&pair, &grid, member);
            prop_assert!(w.values.iter().all(|v| *v > 0.0));
            prop_assert!(w.values.windows(2).all(|p| p[1] <= p[0]));
            let mass: f64 = grid.tau() * w.values.iter().sum::<f64>();
            let exact = match member {
                Member::K => pair.k_integral(t).unwrap(),
                Member::L => pair.l_integral(t).unwrap(),
            };
            prop_assert!((mass - exact).abs() <= 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn resolvent_nonnegative_nonincreasing(alpha in 0.05f64..0.95, lambda in 0.01f64..10.0, n in 1usize..400) {
        let k = resolvent_kernel(&rl_pair(alpha).unwrap(), lambda, &TimeGrid::new(1.0, n).unwrap()).unwrap();
        prop_assert_eq!(k[0], 1.0 / lambda);
        prop_assert!(k.iter().all(|v| *v >= 0.0));
        prop_assert!(k.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn prox_is_nonexpansive(
        z1 in prop::collection::vec(-3.0f64..3.0, 24),
        z2 in prop::collection::vec(-3.0f64..3.0, 24),
        lambda in 0.001f64..5.0,
        t in 0.0f64..1.0,
    ) {
        let e = PLaplaceEnergy::new(3.0, MovingDomain::new(0.2, 0.8, 0.05, -0.05, 6.0, 0.0).unwrap(), SpatialGrid::new(24).unwrap(), 1e-12).unwrap();
        let space = e.space();
        let a = prox(&e, t, lambda, &z1).unwrap();
        let b = prox(&e, t, lambda, &z2).unwrap();
        prop_assert!(space.dist(&a.w, &b.w) <= space.dist(&z1, &z2) + 1e-10);
        prop_assert!(e.eval(t, &a.w).is_finite());
        let s1 = prox(&AbsValue, t, lambda, &z1[..1]).unwrap();
        let s2 = prox(&AbsValue, t, lambda, &z2[..1]).unwrap();
        prop_assert!((s1.w[0] - s2.w[0]).abs() <= (z1[0] - z2[0]).abs() + 1e-15);
    }

    #[test]
    fn chain_rule_slack_nonnegative_for_quadratic_flows(
        alpha in 0.1f64..0.9,
        rate in 0.1f64..5.0,
        u0 in -3.0f64..3.0,
        amp in -2.0f64..2.0,
        n in 8usize..256,
    ) {
        let cfg = FlowConfig::new(rl_pair(alpha).unwrap(), TimeGrid::new(1.0, n).unwrap(), Arc::new(Quadratic::new(1, rate)), vec![u0])
            .with_forcing_fn(|t| vec![amp * (3.0 * t).cos()]);
        let traj = solve_flow(&cfg).unwrap();
        let c = chain_rule_certificate(&traj, &cfg.pair, cfg.energy.as_ref(), 0.0).unwrap();
        let scale = 1.0 + u0 * u0 + amp * amp;
        prop_assert!(c.min_slack >= -1e-12 * scale, "{}", c.min_slack);
    }

    #[test]
    fn energy_estimate_slack_nonnegative(
        alpha in 0.1f64..0.9,
        coef in prop::collection::vec(-1.0f64..1.0, 4),
        n in 8usize..256,
    ) {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let u: Vec<Vec<f64>> = grid
            .nodes()
            .map(|t| vec![coef.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * 2.0 * t).sin()).sum()])
            .collect();
        let c = ab_estimate_certificate(&u, &Space::euclidean(1), &rl_pair(alpha).unwrap(), &grid, 0.0).unwrap();
        prop_assert!(c.min_slack >= -1e-12, "{}", c.min_slack);
    }

    #[test]
    fn certificate_pass_iff_within_tolerance(slack in prop::collection::vec(-1.0f64..1.0, 1..50), tol in 0.0f64..0.5) {
        let c = Certificate::new("p", slack.clone(), tol);
        let min = slack.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(c.min_slack, min);
        prop_assert_eq!(c.pass, min >= -tol);
    }

    #[test]
    fn solves_are_bitwise_reproducible(alpha in 0.1f64..0.9, u0 in -2.0f64..2.0, n in 4usize..64) {
        let cfg = FlowConfig::new(rl_pair(alpha).unwrap(), TimeGrid::new(1.0, n).unwrap(), Arc::new(AbsValue), vec![u0]);
        let a = solve_flow(&cfg).unwrap();
        let b = solve_flow(&cfg).unwrap();
        prop_assert!(a.u.iter().flatten().zip(b.u.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn trajectory_csv_round_trip(u0 in prop::collection::vec(-1e6f64..1e6, 1..6), n in 1usize..20) {
        let dim = u0.len();
        let cfg = FlowConfig::new(rl_pair(0.5).unwrap(), TimeGrid::new(1.0, n).unwrap(), Arc::new(Quadratic::new(dim, 1.0)), u0);
        let traj = solve_flow(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, "h", None, &mut buf).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.u, traj.u);
        prop_assert_eq!(back.residual, traj.residual);
    }

    #[test]
    fn static_transport_is_identity(w in prop::collection::vec(-2.0f64..2.0, 30), t in 0.0f64..2.0, s in 0.0f64..2.0) {
        let dom = MovingDomain::fixed(0.1, 0.9).unwrap();
        let e = PLaplaceEnergy::new(2.0, dom, SpatialGrid::new(30).unwrap(), 1e-10).unwrap();
        let mask = e.mask(0.0);
        let w: Vec<f64> = w.iter().zip(&mask).map(|(v, m)| if *m { *v } else { 0.0 }).collect();
        prop_assert_eq!(e.transport(t, s, &w), w);
    }
}
