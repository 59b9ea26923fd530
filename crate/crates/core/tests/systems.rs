use resflow::dataset::sample_domain;
use resflow::integrators::reference_step;
use resflow::system::{autonomize, by_id, catalog, scale_system};

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
}

#[test]
fn every_system_evaluates_on_sampled_points() {
    for s in catalog() {
        let points = sample_domain(s.domain(), 1000, 11).unwrap();
        for x in &points {
            assert!(s.domain().contains(x), "{}: sample outside domain", s.id());
            let t = s.time_coordinate().map_or(0.0, |i| x[i]);
            let f = s.eval(x, t).unwrap_or_else(|e| panic!("{} at {x:?}: {e}", s.id()));
            assert!(f.iter().all(|v| v.is_finite()), "{} at {x:?}", s.id());
        }
    }
}

#[test]
fn scaled_rhs_agrees_with_original() {
    for (id, factor) in [("toggle", 20.0), ("pendulum", 3.0), ("van_der_pol", 0.5), ("electric_network", 7.0)] {
        let s = by_id(id).unwrap();
        let u_sys = scale_system(&s, factor).unwrap();
        // Points are drawn in scaled coordinates so that x = factor·u exactly.
        for u in sample_domain(u_sys.domain(), 1000, 3).unwrap() {
            let x: Vec<f64> = u.iter().map(|v| v * factor).collect();
            let fu: Vec<f64> = u_sys.eval(&u, 0.0).unwrap().iter().map(|v| v * factor).collect();
            let fx = s.eval(&x, 0.0).unwrap();
            assert!(rel_close(&fu, &fx, 1e-14), "{id} at {x:?}: {fu:?} vs {fx:?}");
        }
    }
}

#[test]
fn scaled_trajectories_match_original() {
    let s = by_id("toggle").unwrap();
    let u_sys = by_id("toggle_scaled").unwrap();
    let x = [19.0, 17.0];
    let u = [19.0 / 20.0, 17.0 / 20.0];
    let xs = reference_step(&s, &x, 0.0, 0.05, 1000).unwrap();
    let us = reference_step(&u_sys, &u, 0.0, 0.05, 1000).unwrap();
    let back: Vec<f64> = us.iter().map(|v| v * 20.0).collect();
    assert!(rel_close(&back, &xs, 1e-12), "{back:?} vs {xs:?}");
}

#[test]
fn autonomized_flow_projects_onto_original() {
    let s = by_id("nonautonomous").unwrap();
    let a = autonomize(&s).unwrap();
    for p in sample_domain(a.domain(), 200, 5).unwrap() {
        let t = p[3];
        let direct = reference_step(&s, &p[..3], t, 0.05, 1000).unwrap();
        let lifted = reference_step(&a, &p, 0.0, 0.05, 1000).unwrap();
        assert!(rel_close(&lifted[..3], &direct, 1e-10), "{p:?}");
        assert!((lifted[3] - (t + 0.05)).abs() < 1e-12);
    }
}

#[test]
fn cataloged_four_dimensional_system_is_the_autonomized_one() {
    let a = autonomize(&by_id("nonautonomous").unwrap()).unwrap();
    let b = by_id("nonautonomous_4d").unwrap();
    for p in sample_domain(b.domain(), 100, 9).unwrap() {
        assert_eq!(a.eval(&p, 0.0).unwrap(), b.eval(&p, 0.0).unwrap());
    }
    assert_eq!(a.domain(), b.domain());
}
