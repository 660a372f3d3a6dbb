use proptest::prelude::*;
use tdm_core::bnp::{solve_bnp, BnpConfig, BnpNode};
use tdm_core::colgen::{
    build_master, column_generation, solve_master, CgLimits, CgStatus, Column, ColumnPool,
    DualPrices, Pricer,
};
use tdm_core::io::read_instance;
use tdm_core::ratio::{snap, to_f64, Ratio};
use tdm_core::verify::{brute_force_optimum, client_feasible};
use tdm_core::{ClientRequirement, CoreError, ProblemInstance};

fn two_client() -> ProblemInstance {
    read_instance(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two-client.json").as_ref()).unwrap()
}

fn mask(bits: &[u8]) -> Vec<bool> {
    bits.iter().map(|&b| b == 1).collect()
}

fn seeded_pool() -> ColumnPool {
    let mut pool = ColumnPool::new(2);
    pool.add(Column::new(0, mask(&[0, 0, 1, 1, 0, 0, 0, 1, 1, 1])));
    pool.add(Column::new(1, mask(&[1, 1, 0, 0, 0, 1, 1, 0, 0, 0])));
    pool
}

fn no_stop() -> CgLimits {
    CgLimits {
        lagrangian_stop: false,
        ..Default::default()
    }
}

#[test]
fn two_client_trace() {
    let inst = two_client();
    let mut pool = seeded_pool();
    let mut pricer = Pricer::new(&inst);
    let out =
        column_generation(&inst, &mut pool, &BnpNode::root(), &mut pricer, &no_stop()).unwrap();
    assert_eq!(out.status, CgStatus::Converged);
    for r in &out.trace {
        let k = (r.master_objective * 100.0).round();
        assert!((r.master_objective * 100.0 - k).abs() < 1e-7, "{r}");
    }
    let path: Vec<Ratio> = out.objective_path(100);
    assert_eq!(
        path,
        vec![Ratio::new(9, 10), Ratio::new(17, 20), Ratio::new(4, 5)]
    );
    let first = &out.trace[0].reduced_costs;
    assert!(first[0].abs() < 1e-9);
    assert!((first[1] + 0.1).abs() < 1e-9);
    let bnp = solve_bnp(&inst, &BnpConfig::default()).unwrap();
    assert_eq!(bnp.objective, Some(Ratio::new(4, 5)));
    for c in pool.columns() {
        assert!(client_feasible(&c.mask, &inst.clients[c.client]).feasible);
    }
}

#[test]
fn two_client_master_values() {
    let inst = two_client();
    let pool = seeded_pool();
    let m = solve_master(&inst, &pool, &BnpNode::root()).unwrap();
    assert_eq!(snap(m.objective, 10), Ratio::new(9, 10));
    assert!(m.duals.lambda.iter().all(|&l| l.abs() < 1e-9));
    // existing columns price at zero
    for c in pool.columns() {
        assert!(m.duals.reduced_cost(c).abs() < 1e-9);
    }
}

#[test]
fn two_client_first_pricing() {
    let inst = two_client();
    let m = solve_master(&inst, &seeded_pool(), &BnpNode::root()).unwrap();
    let mut pricer = Pricer::new(&inst);
    let p1 = pricer
        .price_client(0, &m.duals, &BnpNode::root(), 0.0, None)
        .unwrap();
    assert!(p1.reduced_cost.abs() < 1e-9);
    assert_eq!(p1.column.slot_count, 5);
    let p2 = pricer
        .price_client(1, &m.duals, &BnpNode::root(), 0.0, None)
        .unwrap();
    assert!((p2.reduced_cost + 0.1).abs() < 1e-9);
    assert_eq!(p2.column.slot_count, 3);
}

#[test]
fn zero_duals_price_at_lower_bound() {
    let inst = two_client();
    let mut pricer = Pricer::new(&inst);
    let zero = DualPrices::zero(2, 10);
    for i in 0..2 {
        let p = pricer
            .price_client(i, &zero, &BnpNode::root(), 0.0, None)
            .unwrap();
        assert_eq!(p.column.slot_count, inst.min_slots(i));
        assert!((p.reduced_cost - inst.min_slots(i) as f64 / 10.0).abs() < 1e-9);
    }
}

#[test]
fn single_column_master() {
    let inst =
        ProblemInstance::new(4, vec![ClientRequirement::new("a", Ratio::new(1, 2), None)]).unwrap();
    let mut pool = ColumnPool::new(1);
    pool.add(Column::new(0, vec![true, false, true, false]));
    let m = solve_master(&inst, &pool, &BnpNode::root()).unwrap();
    assert!((m.objective - 0.5).abs() < 1e-9);
    assert!((m.weights[0].1 - 1.0).abs() < 1e-9);
}

#[test]
fn pool_deduplicates() {
    let mut pool = seeded_pool();
    assert!(pool
        .add(Column::new(0, mask(&[0, 0, 1, 1, 0, 0, 0, 1, 1, 1])))
        .is_none());
    assert!(pool
        .add(Column::new(1, mask(&[0, 0, 1, 1, 0, 0, 0, 1, 1, 1])))
        .is_some());
    assert_eq!(pool.len(), 3);
}

#[test]
fn node_without_columns_is_infeasible() {
    let inst = two_client();
    let pool = seeded_pool();
    let node = BnpNode::root().child(0, 0, tdm_core::bnp::Decision::Allocate);
    assert!(matches!(
        build_master(&inst, &pool, &node),
        Err(CoreError::NodeInfeasible(0))
    ));
}

#[test]
fn optimal_pool_adds_nothing() {
    let inst = two_client();
    let mut pool = ColumnPool::new(2);
    pool.add(Column::new(0, mask(&[0, 1, 1, 0, 1, 1, 0, 0, 1, 0])));
    pool.add(Column::new(1, mask(&[1, 0, 0, 1, 0, 0, 1, 0, 0, 0])));
    let mut pricer = Pricer::new(&inst);
    let out =
        column_generation(&inst, &mut pool, &BnpNode::root(), &mut pricer, &no_stop()).unwrap();
    assert_eq!(out.columns_added, 0);
    assert_eq!(pool.len(), 2);
    assert_eq!(out.trace.len(), 1);
}

fn small_instance() -> impl Strategy<Value = ProblemInstance> {
    (6usize..=12, 1usize..=3)
        .prop_flat_map(|(f, n)| {
            let client = (0i64..=40, prop::option::of(2i64..=(f as i64 * 4)))
                .prop_map(move |(r, l)| (Ratio::new(r, 100), l.map(|l| Ratio::new(l, 4))));
            (Just(f), prop::collection::vec(client, n))
        })
        .prop_filter_map("infeasible", |(f, cs)| {
            let clients = cs
                .into_iter()
                .enumerate()
                .map(|(i, (r, l))| ClientRequirement::new(format!("c{i}"), r, l))
                .collect();
            let inst = ProblemInstance::new(f, clients).ok()?;
            let lb: usize = (0..inst.n()).map(|i| inst.min_slots(i)).sum();
            (lb <= f).then_some(inst)
        })
}

fn seed_with_zero_duals(inst: &ProblemInstance, pricer: &mut Pricer) -> Option<ColumnPool> {
    let mut pool = ColumnPool::new(inst.n());
    let zero = DualPrices::zero(inst.n(), inst.frame_size);
    for i in 0..inst.n() {
        pool.add(
            pricer
                .price_client(i, &zero, &BnpNode::root(), 0.0, None)
                .ok()?
                .column,
        );
    }
    Some(pool)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn root_bound_below_integral_optimum(inst in small_instance()) {
        let mut pricer = Pricer::new(&inst);
        let Some(mut pool) = seed_with_zero_duals(&inst, &mut pricer) else { return Ok(()); };
        let out = column_generation(&inst, &mut pool, &BnpNode::root(), &mut pricer, &no_stop()).unwrap();
        prop_assert_eq!(out.status, CgStatus::Converged);
        // master objective never increases
        for w in out.trace.windows(2) {
            prop_assert!(w[1].master_objective <= w[0].master_objective + 1e-9);
        }
        // every Lagrangian estimate is below the converged bound
        for r in &out.trace {
            prop_assert!(r.lagrangian_bound <= out.lower_bound + 1e-7);
        }
        let last = out.trace.last().unwrap();
        prop_assert!(last.reduced_costs.iter().all(|&x| x >= -1e-6));
        for c in pool.columns() {
            prop_assert!(client_feasible(&c.mask, &inst.clients[c.client]).feasible);
        }
        if let Some(best) = brute_force_optimum(&inst).unwrap() {
            prop_assert!(out.lower_bound <= to_f64(&best.objective()) + 1e-7);
        }
    }
}
