use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use fppga_core::control::{optimize, CrosstalkMatrix, DriverConfig, OptimizerOptions};
use fppga_core::gates::{euler_compose, euler_decompose};
use fppga_core::mesh::{self, generate};
use fppga_core::netsolve;
use fppga_core::router::{self, RouterConfig, RoutingRequest};
use fppga_core::tbu::tbu_transfer;
use fppga_core::{EulerAngles, EulerOrder, Mesh, Program, TbuMode, TbuSettings, Topology, WaveguideParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn topology() -> impl Strategy<Value = Topology> {
    prop_oneof![Just(Topology::Square), Just(Topology::Triangular), Just(Topology::Hexagonal)]
}

fn angle() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn program_for(mesh: &Mesh, seeds: &[(u8, f64, f64)], loss_db: f64) -> Program {
    let mut p = Program::with_loss(loss_db);
    for (t, &(kind, a, b)) in (0..mesh.tbu_count()).zip(seeds.iter().cycle()) {
        let mode = match kind % 4 {
            0 => TbuMode::Bar,
            1 => TbuMode::Cross,
            2 => TbuMode::Off,
            _ => TbuMode::Tunable(TbuSettings::new(a, b, loss_db)),
        };
        p.set(t, mode);
    }
    p
}

fn to_na(s: &fppga_core::linalg::CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(s.rows(), s.cols(), |r, c| s[(r, c)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euler_angles_round_trip(d in angle(), a in angle(), b in angle(), g in angle(), xyz in any::<bool>()) {
        let order = if xyz { EulerOrder::Xyz } else { EulerOrder::Zyx };
        let u = euler_compose(&EulerAngles::new(d, a, b, g, order)).unwrap();
        let e = euler_decompose(&u, order).unwrap();
        let back = euler_compose(&e).unwrap();
        prop_assert!(back.frobenius_distance(&u) < 1e-10);
        prop_assert!(e.delta > -PI / 2.0 - 1e-12 && e.delta <= PI / 2.0 + 1e-12);
        prop_assert!(e.beta.abs() <= PI / 2.0 + 1e-12);
    }

    #[test]
    fn unit_transfer_scales_a_unitary(tu in angle(), tl in angle(), loss in 0.0..3.0f64) {
        let m = tbu_transfer(&TbuSettings::new(tu, tl, loss)).unwrap();
        let amp = 10f64.powf(-loss / 20.0);
        prop_assert!(m.scale(Complex64::new(1.0 / amp, 0.0)).is_unitary(1e-12));
        // reciprocal
        prop_assert!((m.get(0, 1) - m.get(1, 0)).norm() < 1e-15);
    }

    #[test]
    fn mesh_structure(topo in topology(), m in 1usize..=4, n in 1usize..=4) {
        let mesh = generate(topo, m, n).unwrap();
        let mut seen = BTreeMap::new();
        for &(a, b) in mesh.connections() {
            prop_assert_ne!(a.tbu, b.tbu);
            *seen.entry(a).or_insert(0) += 1;
            *seen.entry(b).or_insert(0) += 1;
            prop_assert_eq!(mesh.partner(a), Some(b));
            prop_assert_eq!(mesh.partner(b), Some(a));
        }
        for &p in mesh.external_ports() {
            *seen.entry(p).or_insert(0) += 1;
            prop_assert!(mesh.partner(p).is_none());
        }
        let all: BTreeSet<_> = mesh.tbus().iter().flat_map(|t| t.ports()).collect();
        prop_assert_eq!(all.len(), 4 * mesh.tbu_count());
        for p in &all {
            prop_assert_eq!(seen.get(p).copied(), Some(1), "port {} used {:?} times", p, seen.get(p));
            prop_assert!(mesh.junction_degree(*p) <= topo.vertex_degree());
        }
        prop_assert!(mesh.is_connected());
        for (k, &p) in mesh.external_ports().iter().enumerate() {
            prop_assert_eq!(mesh.resolve_port(&mesh.port_name(p)).unwrap(), p);
            prop_assert_eq!(mesh.external_index(p), Some(k));
        }
    }

    #[test]
    fn documents_round_trip(
        topo in topology(),
        m in 1usize..=3,
        n in 1usize..=3,
        seeds in prop::collection::vec((any::<u8>(), angle(), angle()), 1..16),
        loss in 0.0..1.0f64,
    ) {
        let mesh = generate(topo, m, n).unwrap();
        let program = program_for(&mesh, &seeds, loss);
        let text = mesh::serialize(&mesh, &program);
        let (m2, p2) = mesh::deserialize(&text).unwrap();
        prop_assert_eq!(&m2, &mesh);
        prop_assert_eq!(&p2, &program);
        prop_assert_eq!(mesh::serialize(&m2, &p2), text);
    }

    #[test]
    fn solved_network_is_passive_and_reciprocal(
        topo in topology(),
        m in 1usize..=2,
        n in 1usize..=2,
        seeds in prop::collection::vec((any::<u8>(), angle(), angle()), 1..12),
        df in -50e9..50e9f64,
    ) {
        let mesh = generate(topo, m, n).unwrap();
        let params = WaveguideParams::default();
        let program = program_for(&mesh, &seeds, 0.3);
        let s = to_na(&netsolve::solve(&mesh, &program, &params, params.reference_hz + df).unwrap());
        prop_assert!(s.singular_values().max() <= 1.0 + 1e-12);
        prop_assert!((&s - s.transpose()).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn lossless_full_program_is_unitary(
        m in 1usize..=2,
        n in 1usize..=2,
        phases in prop::collection::vec((0.0..2.0 * PI, 0.0..2.0 * PI), 1..20),
    ) {
        let mesh = generate(Topology::Hexagonal, m, n).unwrap();
        let mut program = Program::with_loss(0.0);
        for (t, &(a, b)) in (0..mesh.tbu_count()).zip(phases.iter().cycle()) {
            program.set(t, TbuMode::Tunable(TbuSettings::new(a, b, 0.0)));
        }
        let params = WaveguideParams::default();
        let s = to_na(&netsolve::solve(&mesh, &program, &params, params.reference_hz).unwrap());
        let dev = s.adjoint() * &s - DMatrix::identity(s.nrows(), s.ncols());
        prop_assert!(dev.iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn routed_path_loses_one_unit_per_hop(
        topo in topology(),
        m in 1usize..=3,
        n in 1usize..=3,
        a in any::<prop::sample::Index>(),
        b in any::<prop::sample::Index>(),
    ) {
        let mesh = generate(topo, m, n).unwrap();
        let ext = mesh.external_ports();
        let (src, dst) = (ext[a.index(ext.len())], ext[b.index(ext.len())]);
        prop_assume!(src != dst);
        let cfg = RouterConfig::default();
        let Ok(r) = router::route(&mesh, &RoutingRequest::new(src, dst), &cfg) else {
            return Ok(());
        };
        let program = router::apply_route(&Program::with_loss(cfg.insertion_loss_db), &r).unwrap();
        let params = WaveguideParams::default();
        let s = netsolve::solve(&mesh, &program, &params, params.reference_hz).unwrap();
        let got = s[(mesh.external_index(dst).unwrap(), mesh.external_index(src).unwrap())].norm();
        let want = 10f64.powf(-(r.hops.len() as f64) * cfg.insertion_loss_db / 20.0);
        prop_assert!((got - want).abs() < 1e-12);
        prop_assert!((r.loss_db - r.hops.len() as f64 * cfg.insertion_loss_db).abs() < 1e-12);
        // the first and last hops touch the requested ports
        prop_assert_eq!(r.hops[0].in_port, src);
        prop_assert_eq!(r.hops[r.hops.len() - 1].out_port, dst);
    }

    #[test]
    fn quantization_is_nearest_level(bits in 1u32..=16, phase in -20.0..20.0f64) {
        let d = DriverConfig::new(bits).unwrap();
        let q = d.quantize(phase);
        let w = phase.rem_euclid(2.0 * PI);
        prop_assert!((q - w).abs() <= d.step() / 2.0 + 1e-12);
        prop_assert!((q / d.step() - (q / d.step()).round()).abs() < 1e-9);
        // the top level is 2π, which wraps back to level 0
        let again = if q >= 2.0 * PI { 0.0 } else { q };
        prop_assert!((d.quantize(q) - again).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_shift_is_bounded(
        eps in 0.0..0.2f64,
        phases in prop::collection::vec(0.0..2.0 * PI, 2..10),
    ) {
        let x = CrosstalkMatrix::uniform_neighbor(phases.len(), eps).unwrap();
        let out = x.apply(&phases).unwrap();
        let top = phases.iter().cloned().fold(0.0, f64::max);
        for (o, p) in out.iter().zip(&phases) {
            prop_assert!(o - p >= 0.0);
            prop_assert!(o - p <= x.max_row_sum() * top + 1e-12);
        }
    }

    #[test]
    fn optimizer_is_deterministic_and_improves(
        seed in any::<u64>(),
        centre in prop::collection::vec(-1.0..1.0f64, 1..4),
    ) {
        let bounds = vec![(-2.0, 2.0); centre.len()];
        let options = OptimizerOptions { seed, ..OptimizerOptions::new(bounds) };
        let run = || {
            let mut f = |x: &[f64]| x.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
            optimize(&mut f, &vec![0.0; centre.len()], &options).unwrap()
        };
        let (r1, r2) = (run(), run());
        prop_assert_eq!(&r1, &r2);
        prop_assert!(r1.evaluations <= options.max_evaluations);
        prop_assert!(r1.best_cost <= centre.iter().map(|c| c * c).sum::<f64>());
        prop_assert!(r1.best_cost < 1e-10);
    }
}
