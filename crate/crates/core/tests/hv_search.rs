//! Hidden-variable searches checked against plain nested-loop enumerations.

use localworlds::correlations::{Constraint, CorrelationSpec};
use localworlds::hv_search::{
    chsh_classical_bound, chsh_strategies, closing_products, derive_contradiction_trace, enumerate_divergent_worlds,
    enumerate_divergent_worlds_with, enumerate_single_world, enumerate_single_world_range, many_worlds_witness, many_worlds_witness_with,
    MarginalRule, SearchError, WorldRule,
};
use localworlds::{Outcome, Setting};

fn ghz() -> CorrelationSpec {
    CorrelationSpec::ghz()
}

/// Value tables as six ±1 integers: (xa, xb, xc, ya, yb, yc).
fn ghz_ok(v: [i32; 6]) -> bool {
    let [xa, xb, xc, ya, yb, yc] = v;
    xa * xb * xc == -1 && ya * yb * xc == 1 && xa * yb * yc == 1 && ya * xb * yc == 1
}

fn all_tables() -> impl Iterator<Item = [i32; 6]> {
    (0..64u32).map(|m| std::array::from_fn(|i| if m >> i & 1 == 0 { 1 } else { -1 }))
}

#[test]
fn single_world_agrees_with_loop_oracle() {
    let oracle = all_tables().filter(|t| ghz_ok(*t)).count();
    assert_eq!(oracle, 0);
    let report = enumerate_single_world(&ghz()).unwrap();
    assert_eq!(report.total_searched, 64);
    assert_eq!(report.witness_count, oracle as u64);
}

#[test]
fn dropping_one_constraint_leaves_eight_tables() {
    // any three GHZ constraints fix three values from the other three
    for skip in 0..4 {
        let spec = ghz();
        let cons: Vec<Constraint> = spec.constraints.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, c)| c.clone()).collect();
        let reduced = CorrelationSpec::new(spec.parties.clone(), spec.settings.clone(), cons).unwrap();
        let report = enumerate_single_world(&reduced).unwrap();
        assert_eq!(report.witness_count, 8, "without constraint {skip}");
        match derive_contradiction_trace(&reduced) {
            Ok(chain) => assert!(!chain.is_contradiction()),
            Err(e) => assert_eq!(e, SearchError::NoSymbolicChain),
        }
        for w in &report.witnesses {
            for c in &reduced.constraints {
                let vals = reduced.parties.iter().zip(&c.settings).map(|(p, s)| w.values(p, *s)[0]);
                assert_eq!(Outcome::product(vals), c.product);
            }
        }
    }
}

#[test]
fn ranges_merge_to_the_full_search() {
    let spec = ghz();
    let whole = enumerate_single_world(&spec).unwrap();
    let parts = [0..10, 10..40, 40..64].into_iter().map(|r| enumerate_single_world_range(&spec, r).unwrap());
    let merged = parts.reduce(|a, b| a.merge(b)).unwrap();
    assert_eq!(merged.total_searched, whole.total_searched);
    assert_eq!(merged.witness_count, whole.witness_count);
}

#[test]
fn chain_ends_on_the_anchor() {
    let chain = derive_contradiction_trace(&ghz()).unwrap();
    assert!(chain.is_contradiction());
    let derived: Vec<&str> = chain.steps.iter().map(|s| s.text.as_str()).collect();
    assert!(derived[0].starts_with("λ_X^A = l"));
    assert!(derived.iter().any(|l| l.starts_with("λ_X^A = ") && l.ends_with("= -l [from XYY=+1]")), "{derived:?}");
}

#[test]
fn constraint_order_does_not_matter() {
    let spec = ghz();
    let mut cons = spec.constraints.clone();
    cons.reverse();
    let reordered = CorrelationSpec::new(spec.parties.clone(), spec.settings.clone(), cons).unwrap();
    assert!(!enumerate_single_world(&reordered).unwrap().satisfiable);
    assert!(derive_contradiction_trace(&reordered).unwrap().is_contradiction());
}

#[test]
fn divergent_worlds_agree_with_loop_oracle() {
    // world w carries the w-th XXX = −1 combination; the y values are free per world
    let anchors: Vec<[i32; 3]> = [[1, 1, -1], [1, -1, 1], [-1, 1, 1], [-1, -1, -1]].to_vec();
    let mut oracle = 0;
    for ys in 0..4096u32 {
        let ok = anchors.iter().enumerate().all(|(w, x)| {
            let y: [i32; 3] = std::array::from_fn(|i| if ys >> (3 * w + i) & 1 == 0 { 1 } else { -1 });
            ghz_ok([x[0], x[1], x[2], y[0], y[1], y[2]])
        });
        oracle += ok as u64;
    }
    assert_eq!(oracle, 0);
    let report = enumerate_divergent_worlds(&ghz(), 4).unwrap();
    assert_eq!(report.total_searched, 4096);
    assert_eq!(report.witness_count, oracle);
    assert_eq!(report.worlds.len(), 4);
}

#[test]
fn forced_closing_product_is_minus_one() {
    // with XXX, YYX and YXY imposed, XYY comes out −1 in every world
    let products = closing_products(&ghz(), 4, 0, 2).unwrap();
    assert!(!products.is_empty());
    assert!(products.iter().all(|per_world| per_world.len() == 4 && per_world.iter().all(|p| *p == -1)));
}

#[test]
fn world_count_must_match_anchor() {
    assert!(matches!(enumerate_divergent_worlds(&ghz(), 3), Err(SearchError::WorldCount { expected: 4, got: 3, .. })));
    assert!(matches!(enumerate_divergent_worlds(&ghz(), 0), Err(SearchError::NoWorlds)));
    let one = enumerate_divergent_worlds(&ghz(), 1).unwrap();
    assert_eq!(one.total_searched, 64);
    assert!(!one.satisfiable);
}

#[test]
fn independent_worlds_are_refused_at_size() {
    // 6 pairs × 4 worlds = 24 bits fits; 5 worlds does not
    let r = enumerate_divergent_worlds_with(&ghz(), 2, WorldRule::Independent).unwrap();
    assert_eq!(r.total_searched, 1 << 12);
    assert!(!r.satisfiable);
    assert!(matches!(enumerate_divergent_worlds_with(&ghz(), 5, WorldRule::Independent), Err(SearchError::SizeGuard { .. })));
}

#[test]
fn multivalued_witness_holds_both_values_everywhere() {
    let r = many_worlds_witness(&ghz()).unwrap();
    assert!(r.satisfiable);
    let w = &r.witnesses[0];
    for p in ["A", "B", "C"] {
        for s in [Setting::X, Setting::Y] {
            assert_eq!(w.values(p, s).len(), 2);
        }
    }
    assert_eq!(r.pairing_rules.len(), 4);
    assert!(r.pairing_rules.iter().all(|p| p.combinations.len() == 4));
}

#[test]
fn closure_alone_allows_single_values_for_a_pair() {
    let spec = CorrelationSpec::new(vec!["A", "B"], vec![Setting::Z], vec![Constraint::new("ZZ", 1)]).unwrap();
    let closure = many_worlds_witness_with(&spec, MarginalRule::ClosureOnly).unwrap();
    assert_eq!(closure.witnesses[0].cardinality(), 2);
    let uncertain = many_worlds_witness(&spec).unwrap();
    assert_eq!(uncertain.witnesses[0].cardinality(), 4);
}

#[test]
fn chsh_bound_by_exhaustion() {
    let strategies = chsh_strategies();
    assert_eq!(strategies.len(), 16);
    let max = (0..16)
        .map(|m: u32| {
            let v: Vec<i32> = (0..4).map(|i| if m >> i & 1 == 0 { 1 } else { -1 }).collect();
            v[0] * v[2] + v[0] * v[3] + v[1] * v[2] - v[1] * v[3]
        })
        .max()
        .unwrap();
    assert_eq!(chsh_classical_bound(), f64::from(max));
    assert_eq!(chsh_classical_bound(), 2.0);
    let all_up = strategies.iter().find(|(s, _)| s.iter().all(|o| *o == Outcome::Up)).unwrap();
    assert_eq!(all_up.1, 2);
}
