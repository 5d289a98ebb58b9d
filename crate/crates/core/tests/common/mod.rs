//! Generators and brute-force oracles shared by the integration tests.

use std::collections::BTreeSet;

use odd_assure::cause_tree::{CutSet, Gate};
use odd_assure::odd_monitor::{Region, Surface};
use odd_assure::scenario_sim::{Trace, TraceMeta};
use odd_assure::{CauseTree, CtaNode, SensorFrame};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Random AND/OR tree with `leaves` leaves (ids `L0..`), every gate with
/// two to four children. Leaves draw classes from a pool of four and get
/// random exposure shares normalized to one.
pub fn random_tree(rng: &mut impl Rng, leaves: usize) -> CauseTree {
    assert!(leaves >= 1);
    let classes = ["alpha", "beta", "gamma", "delta"];
    let raw: Vec<f64> = (0..leaves).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut nodes: Vec<CtaNode> = (0..leaves)
        .map(|i| {
            CtaNode::leaf(
                &format!("L{i}"),
                "leaf",
                classes.choose(rng).unwrap(),
                Some(raw[i] / total),
            )
        })
        .collect();
    // merge random groups of the open frontier under fresh gates until one remains
    let mut frontier: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let mut g = 0;
    while frontier.len() > 1 {
        let k = rng.random_range(2..=4).min(frontier.len());
        let mut children = Vec::with_capacity(k);
        for _ in 0..k {
            let i = rng.random_range(0..frontier.len());
            children.push(frontier.swap_remove(i));
        }
        let gate = if rng.random_bool(0.5) {
            Gate::And
        } else {
            Gate::Or
        };
        let id = format!("G{g}");
        g += 1;
        let refs: Vec<&str> = children.iter().map(String::as_str).collect();
        nodes.push(CtaNode::gate(&id, "gate", gate, &refs));
        frontier.push(id);
    }
    let root = frontier.pop().unwrap();
    CauseTree::new(&root, nodes)
}

fn holds(tree: &CauseTree, id: &str, active: &BTreeSet<&str>) -> bool {
    let node = &tree.nodes[id];
    match node.gate {
        Gate::Leaf => active.contains(id),
        Gate::And => node.children.iter().all(|c| holds(tree, c, active)),
        Gate::Or => node.children.iter().any(|c| holds(tree, c, active)),
    }
}

/// Minimal cut sets by enumerating the full truth table: a satisfying leaf
/// set is minimal when dropping any one leaf falsifies the top event.
pub fn brute_force_cut_sets(tree: &CauseTree) -> BTreeSet<CutSet> {
    let leaves: Vec<&str> = tree
        .nodes
        .values()
        .filter(|n| n.gate == Gate::Leaf)
        .map(|n| n.id.as_str())
        .collect();
    assert!(leaves.len() <= 16, "truth table too large");
    let set_of = |mask: u32| -> BTreeSet<&str> {
        leaves
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, l)| *l)
            .collect()
    };
    let sat: Vec<bool> = (0..1u32 << leaves.len())
        .map(|mask| holds(tree, &tree.root, &set_of(mask)))
        .collect();
    (0..1u32 << leaves.len())
        .filter(|&mask| sat[mask as usize])
        .filter(|&mask| {
            (0..leaves.len())
                .filter(|i| mask & (1 << i) != 0)
                .all(|i| !sat[(mask & !(1 << i)) as usize])
        })
        .map(|mask| set_of(mask).into_iter().map(str::to_string).collect())
        .collect()
}

/// Reference drift detector: at every tick, max minus min deviation over
/// the samples with timestamps in `(t - window, t]`, compared strictly
/// against `limit`. Returns the firing timestamps.
pub fn drift_oracle(samples: &[(u64, f64)], window_ms: u64, limit: f64) -> Vec<u64> {
    let mut fired = Vec::new();
    for (i, &(t, _)) in samples.iter().enumerate() {
        let in_window = samples[..=i]
            .iter()
            .filter(|(ts, _)| ts + window_ms > t)
            .map(|(_, d)| *d);
        let (hi, lo) = in_window.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), d| {
            (hi.max(d), lo.min(d))
        });
        if hi - lo > limit {
            fired.push(t);
        }
    }
    fired
}

/// Builds a trace tick by tick from a frame function, everything else
/// nominal at confidence 0.9 and 72 km/h.
pub fn synthetic_trace(
    id: &str,
    tick_ms: u64,
    ticks: u64,
    mut frame: impl FnMut(u64, &mut SensorFrame),
) -> Trace {
    let frames = (0..ticks)
        .map(|i| {
            let t = i * tick_ms;
            let mut f = SensorFrame::nominal(t, 0.9);
            f.speed_kmh = 72.0;
            f.distance_delta_km = 72.0 * tick_ms as f64 / 3_600_000.0;
            frame(i, &mut f);
            f
        })
        .collect();
    Trace {
        meta: TraceMeta {
            scenario_id: id.to_string(),
            scenario_class: "synthetic".to_string(),
            seed: 0,
            spec_digest: String::new(),
            tick_ms,
        },
        frames,
    }
}

/// Ten hours at a 100 ms tick: 360 000 ticks, the first half urban and dry,
/// the second half rural and wet. `misclassified(i)` marks ticks that are
/// truly outside the ODD while the monitor still reads full confidence.
pub fn ten_hour_trace(id: &str, misclassified: impl Fn(u64) -> bool) -> Trace {
    const TICKS: u64 = 360_000;
    synthetic_trace(id, 100, TICKS, |i, f| {
        if i < TICKS / 2 {
            f.region = Region::Urban;
            f.surface = Surface::Dry;
        } else {
            f.region = Region::Rural;
            f.surface = Surface::Wet;
        }
        f.true_in_odd = !misclassified(i);
    })
}
