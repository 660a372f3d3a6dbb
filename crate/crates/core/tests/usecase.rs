use std::time::Instant;

use tdm_core::io::read_instance;
use tdm_core::model::dominance_class;
use tdm_core::ratio::Ratio;
use tdm_core::usecase::{filter_feasible, generate, Discard, FilterMethod, GenSpec};
use tdm_core::{ClientRequirement, CoreError, DominanceClass, ProblemInstance};

const CLASSES: [DominanceClass; 3] = [
    DominanceClass::BandwidthDominated,
    DominanceClass::LatencyDominated,
    DominanceClass::MixedDominated,
];

#[test]
fn windows_and_classes_hold() {
    for class in CLASSES {
        for n in [8, 16, 32] {
            for seed in 0..5 {
                let spec = GenSpec::new(class, n, seed).unwrap();
                let t = Instant::now();
                let inst = generate(&spec).unwrap();
                assert!(t.elapsed().as_secs() < 5);
                assert_eq!(inst.n(), n);
                assert_eq!(inst.frame_size, 8 * n);
                let (lo, hi) = spec.total_rate_window;
                assert!(lo <= inst.total_rate() && inst.total_rate() <= hi);
                if let Some((lo, hi)) = spec.latency_load_window {
                    assert!(lo <= inst.latency_load() && inst.latency_load() <= hi);
                }
                let (rl, rh) = spec.rate_range;
                for c in &inst.clients {
                    assert_eq!(dominance_class(c, inst.frame_size), class, "{c:?}");
                    let r = tdm_core::ratio::to_f64(&c.rate);
                    assert!(r >= rl - 1e-12 && r <= rh + 1e-12);
                    let bound_b = (c.rate * inst.frame_size as i64).ceil().to_integer();
                    let bound_l = (Ratio::from_integer(inst.frame_size as i64)
                        / (c.latency.unwrap() + 1))
                        .ceil()
                        .to_integer();
                    match class {
                        DominanceClass::BandwidthDominated => assert!(bound_b > bound_l),
                        DominanceClass::LatencyDominated => assert!(bound_l > bound_b),
                        DominanceClass::MixedDominated => assert_eq!(bound_l, bound_b),
                    }
                }
            }
        }
    }
}

#[test]
fn bd_eight_clients_uses_table_row() {
    let spec = GenSpec::new(DominanceClass::BandwidthDominated, 8, 3).unwrap();
    assert_eq!(spec.rate_range, (0.06, 0.16));
    assert_eq!(spec.frame_size, 64);
    let ld = GenSpec::new(DominanceClass::LatencyDominated, 8, 3).unwrap();
    assert_eq!(ld.tightness_range, (1.6, 3.3));
    assert_eq!(
        ld.latency_load_window,
        Some((Ratio::new(3, 4), Ratio::new(19, 20)))
    );
}

#[test]
fn same_seed_same_instance() {
    for class in CLASSES {
        let spec = GenSpec::new(class, 8, 42).unwrap();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GenSpec {
            seed: 43,
            ..spec.clone()
        };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }
}

#[test]
fn impossible_window_exhausts() {
    let mut spec = GenSpec::new(DominanceClass::BandwidthDominated, 8, 0).unwrap();
    spec.total_rate_window = (Ratio::new(3, 1), Ratio::new(4, 1));
    spec.max_attempts = 50;
    assert!(matches!(
        generate(&spec),
        Err(CoreError::GenerationExhausted(50))
    ));
}

#[test]
fn custom_client_count_scales_rates() {
    let spec = GenSpec::new(DominanceClass::BandwidthDominated, 4, 0).unwrap();
    assert!((spec.rate_range.0 - 0.12).abs() < 1e-12);
    assert_eq!(spec.frame_size, 32);
    generate(&spec).unwrap();
}

#[test]
fn filter_keeps_feasible_and_drops_overloaded() {
    let two_client =
        read_instance(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two-client.json").as_ref())
            .unwrap();
    let overloaded = ProblemInstance::new(
        4,
        vec![
            ClientRequirement::new("a", Ratio::new(3, 4), None),
            ClientRequirement::new("b", Ratio::new(1, 2), None),
        ],
    )
    .unwrap();
    for method in [FilterMethod::Bnp, FilterMethod::Ilp] {
        let r =
            filter_feasible(vec![two_client.clone(), overloaded.clone()], method, None).unwrap();
        assert_eq!(r.kept, vec![two_client.clone()]);
        assert_eq!(r.discarded, vec![(1, Discard::Infeasible)]);
    }
}

#[test]
fn bd_batch_is_mostly_feasible() {
    let batch: Vec<_> = (0..8)
        .map(|s| {
            generate(&GenSpec::new(DominanceClass::BandwidthDominated, 8, s).unwrap()).unwrap()
        })
        .collect();
    let r = filter_feasible(
        batch,
        FilterMethod::Bnp,
        Some(std::time::Duration::from_secs(10)),
    )
    .unwrap();
    println!("kept {} discarded {:?}", r.kept.len(), r.discarded);
    assert!(r.kept.len() >= 6);
}
