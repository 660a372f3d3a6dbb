use proptest::prelude::*;
use tdm_mip::{
    solve_lp, solve_mip, Constraint, LinearModel, LpStatus, MipParams, MipStatus, Sense, VarId,
};

fn master_lp(columns: &[(usize, [u8; 10])]) -> (LinearModel, Vec<VarId>) {
    let mut m = LinearModel::new();
    let omegas: Vec<VarId> = columns
        .iter()
        .enumerate()
        .map(|(k, (_, a))| {
            let phi = a.iter().filter(|&&b| b == 1).count() as f64;
            m.add_continuous(format!("w{k}"), 0.0, f64::INFINITY, phi / 10.0)
        })
        .collect();
    let ys: Vec<VarId> = (0..10)
        .map(|j| m.add_continuous(format!("y{j}"), 0.0, f64::INFINITY, 10.0))
        .collect();
    for j in 0..10 {
        let mut coeffs: Vec<(VarId, f64)> = columns
            .iter()
            .zip(&omegas)
            .filter(|((_, a), _)| a[j] == 1)
            .map(|(_, &w)| (w, 1.0))
            .collect();
        coeffs.push((ys[j], -1.0));
        m.add_constraint(Constraint::new(coeffs, Sense::Le, 1.0));
    }
    for client in 0..2 {
        let coeffs = columns
            .iter()
            .zip(&omegas)
            .filter(|((c, _), _)| *c == client)
            .map(|(_, &w)| (w, 1.0))
            .collect();
        m.add_constraint(Constraint::new(coeffs, Sense::Ge, 1.0));
    }
    (m, omegas)
}

const A11: [u8; 10] = [0, 0, 1, 1, 0, 0, 0, 1, 1, 1];
const A21: [u8; 10] = [1, 1, 0, 0, 0, 1, 1, 0, 0, 0];
const A22: [u8; 10] = [1, 0, 0, 0, 1, 0, 0, 1, 0, 0];
const A12: [u8; 10] = [0, 1, 1, 0, 1, 1, 0, 0, 1, 0];
const A23: [u8; 10] = [1, 0, 0, 1, 0, 0, 1, 0, 0, 0];

#[test]
fn two_column_master_has_objective_nine_tenths() {
    let (m, w) = master_lp(&[(0, A11), (1, A21)]);
    let sol = solve_lp(&m).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 0.9).abs() < 1e-9);
    assert!((sol.primal[w[0].0] - 1.0).abs() < 1e-9);
    assert!((sol.primal[w[1].0] - 1.0).abs() < 1e-9);
    for j in 0..10 {
        assert!(sol.primal[2 + j].abs() < 1e-9);
    }
    // convexity duals are the column costs
    assert!((sol.duals[10] - 0.5).abs() < 1e-9);
    assert!((sol.duals[11] - 0.4).abs() < 1e-9);
}

#[test]
fn master_objective_drops_as_columns_arrive() {
    let (m, _) = master_lp(&[(0, A11), (1, A21), (1, A22), (0, A12)]);
    let sol = solve_lp(&m).unwrap();
    assert!((sol.objective - 0.85).abs() < 1e-9);
    let (m, _) = master_lp(&[(0, A11), (1, A21), (1, A22), (0, A12), (1, A23)]);
    let sol = solve_lp(&m).unwrap();
    assert!((sol.objective - 0.8).abs() < 1e-9);
}

#[test]
fn ge_row_dual_is_one() {
    let mut m = LinearModel::new();
    let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
    m.add_constraint(Constraint::new(vec![(x, 1.0)], Sense::Ge, 3.0));
    let sol = solve_lp(&m).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.primal[0] - 3.0).abs() < 1e-9);
    assert!((sol.duals[0] - 1.0).abs() < 1e-9);
    assert!((sol.objective - 3.0).abs() < 1e-9);
}

#[test]
fn model_without_rows_sits_on_cheapest_bounds() {
    let mut m = LinearModel::new();
    m.add_continuous("a", -1.0, 2.0, 1.0);
    m.add_continuous("b", -1.0, 2.0, -1.0);
    m.set_obj_offset(0.5);
    let sol = solve_lp(&m).unwrap();
    assert_eq!(sol.primal, vec![-1.0, 2.0]);
    assert!((sol.objective - (-2.5)).abs() < 1e-12);
    let mip = solve_mip(&m, |_| None, &MipParams::default()).unwrap();
    assert_eq!(mip.status, MipStatus::Optimal);
}

#[test]
fn infeasible_and_unbounded_lps() {
    let mut m = LinearModel::new();
    let x = m.add_continuous("x", 0.0, 1.0, 1.0);
    m.add_constraint(Constraint::new(vec![(x, 1.0)], Sense::Ge, 2.0));
    assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);

    let mut m = LinearModel::new();
    let x = m.add_continuous("x", 0.0, f64::INFINITY, -1.0);
    m.add_constraint(Constraint::new(vec![(x, 1.0)], Sense::Ge, 2.0));
    assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn invalid_models_are_rejected() {
    let mut m = LinearModel::new();
    m.add_continuous("x", 0.0, 1.0, 1.0);
    m.add_constraint(Constraint::new(vec![(VarId(3), 1.0)], Sense::Le, 1.0));
    assert!(solve_lp(&m).is_err());
    let mut m = LinearModel::new();
    m.add_var("z", 0.0, f64::INFINITY, 1.0, true);
    assert!(solve_mip(&m, |_| None, &MipParams::default()).is_err());
}

#[test]
fn small_knapsack_matches_enumeration() {
    // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 4, binaries
    let mut m = LinearModel::new();
    let v: Vec<VarId> = [5.0, 4.0, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &p)| m.add_binary(format!("x{i}"), -p))
        .collect();
    m.add_constraint(Constraint::new(
        vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)],
        Sense::Le,
        4.0,
    ));
    let sol = solve_mip(&m, |_| None, &MipParams::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert_eq!(sol.assignment, vec![1.0, 0.0, 1.0]);
    assert!((sol.objective + 8.0).abs() < 1e-9);
}

#[test]
fn lazy_rows_and_callback_cuts_are_respected() {
    // min -x0 - x1 - x2 with a lazy pair row and a callback forbidding all three
    let mut m = LinearModel::new();
    let v: Vec<VarId> = (0..3)
        .map(|i| m.add_binary(format!("x{i}"), -1.0))
        .collect();
    m.add_constraint(Constraint::new(vec![(v[0], 1.0), (v[1], 1.0)], Sense::Le, 1.0).lazy());
    let mut calls = 0;
    let sol = solve_mip(
        &m,
        |x| {
            calls += 1;
            (x[1] + x[2] > 1.5)
                .then(|| Constraint::new(vec![(VarId(1), 1.0), (VarId(2), 1.0)], Sense::Le, 1.0))
        },
        &MipParams::default(),
    )
    .unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!((sol.objective + 2.0).abs() < 1e-9);
    assert!(sol.assignment[0] + sol.assignment[1] <= 1.0);
    assert!(sol.assignment[1] + sol.assignment[2] <= 1.0);
    assert!(calls >= 1);
    assert!(sol.stats.lazy_rows >= 1);
}

#[test]
fn infeasible_mip() {
    let mut m = LinearModel::new();
    let a = m.add_binary("a", 1.0);
    let b = m.add_binary("b", 1.0);
    m.add_constraint(Constraint::new(vec![(a, 2.0), (b, 2.0)], Sense::Eq, 3.0));
    let sol = solve_mip(&m, |_| None, &MipParams::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Infeasible);
    assert!(!sol.has_solution());
}

#[derive(Debug, Clone)]
struct RandomRow {
    coeffs: Vec<i32>,
    sense: u8,
    rhs: i32,
}

fn random_model(nv: usize) -> impl Strategy<Value = (Vec<i32>, Vec<RandomRow>)> {
    let row = (prop::collection::vec(-3i32..=3, nv), 0u8..3, -2i32..=6)
        .prop_map(|(coeffs, sense, rhs)| RandomRow { coeffs, sense, rhs });
    (
        prop::collection::vec(-5i32..=5, nv),
        prop::collection::vec(row, 0..5),
    )
}

fn build(obj: &[i32], rows: &[RandomRow], lazy: bool) -> LinearModel {
    let mut m = LinearModel::new();
    let v: Vec<VarId> = obj
        .iter()
        .enumerate()
        .map(|(i, &c)| m.add_binary(format!("x{i}"), c as f64))
        .collect();
    for (k, r) in rows.iter().enumerate() {
        let sense = match r.sense {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let coeffs = r
            .coeffs
            .iter()
            .zip(&v)
            .filter(|(&a, _)| a != 0)
            .map(|(&a, &x)| (x, a as f64))
            .collect();
        let c = Constraint::new(coeffs, sense, r.rhs as f64);
        m.add_constraint(if lazy && k % 2 == 1 { c.lazy() } else { c });
    }
    m
}

fn enumerate(m: &LinearModel) -> Option<f64> {
    let n = m.num_vars();
    (0u32..1 << n)
        .filter_map(|mask| {
            let x: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
            m.is_feasible(&x, 1e-9).then(|| m.objective_value(&x))
        })
        .min_by(f64::total_cmp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mip_matches_enumeration((obj, rows) in (1usize..=10).prop_flat_map(random_model), lazy in any::<bool>()) {
        let m = build(&obj, &rows, lazy);
        let sol = solve_mip(&m, |_| None, &MipParams::default()).unwrap();
        match enumerate(&m) {
            None => prop_assert_eq!(sol.status, MipStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, MipStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-7);
                prop_assert!(m.is_feasible(&sol.assignment, 1e-7));
                prop_assert!((sol.best_bound - sol.objective).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lp_strong_duality((obj, rows) in (1usize..=8).prop_flat_map(random_model)) {
        let m = build(&obj, &rows, false);
        let sol = solve_lp(&m).unwrap();
        if sol.status != LpStatus::Optimal {
            return Ok(());
        }
        prop_assert!(m.is_feasible(&sol.primal, 1e-7));
        // dual objective for a boxed LP: b'y + sum of bound terms from reduced costs
        let mut dual_obj: f64 = m.constraints().iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
        for (j, v) in m.vars().iter().enumerate() {
            let d = sol.reduced_costs[j];
            dual_obj += if d > 0.0 { d * v.lower } else { d * v.upper };
        }
        prop_assert!((dual_obj - sol.objective).abs() < 1e-6);
        // dual sign feasibility
        for (r, y) in m.constraints().iter().zip(&sol.duals) {
            match r.sense {
                Sense::Le => prop_assert!(*y <= 1e-9),
                Sense::Ge => prop_assert!(*y >= -1e-9),
                Sense::Eq => {}
            }
        }
    }
}
