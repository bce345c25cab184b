use std::collections::HashSet;

use pncl::continual::{plan_count, select_replay, Pick, ReplayPlan, Source};
use pncl::data::{
    admissible_range, default_schedule, generate_groups, read_dataset, tpms_voxel, write_dataset, GridField, Network,
    TpmsKind,
};
use pncl::diffcore::Tensor;
use pncl::physics::{ScoreKind, ScoredSample};
use pncl::transolver::deslice;
use pncl::Error;
use proptest::prelude::*;

fn scored(group_id: u32, scores: &[f64]) -> Vec<ScoredSample> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &score)| ScoredSample { group_id, sample_index: i, score, kind: ScoreKind::Strong, sentinel: false })
        .collect()
}

fn softmax_rows(rows: usize, cols: usize, logits: &[f64]) -> Tensor {
    let mut out = Vec::with_capacity(rows * cols);
    for r in logits.chunks(cols) {
        let m = r.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    Tensor::matrix(rows, cols, out).unwrap()
}

/// Volume fraction at a coarse resolution, where thresholds near the ends of
/// the admissible range can leave the lattice empty or full.
fn vf(kind: TpmsKind, c: f64) -> f64 {
    match tpms_voxel(kind, Network::Solid, 16, c) {
        Ok(v) => v.volume_fraction(),
        Err(Error::InadmissibleThreshold { what: "empty", .. }) => 0.0,
        Err(Error::InadmissibleThreshold { what: "full", .. }) => 1.0,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solid_volume_fraction_is_monotone(kind in 0usize..3, a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let kind = TpmsKind::ALL[kind];
        let (lo, hi) = admissible_range(kind, Network::Solid);
        let (c1, c2) = (lo + (hi - lo) * a.min(b), lo + (hi - lo) * a.max(b));
        let v1 = vf(kind, c1);
        let v2 = vf(kind, c2);
        prop_assert!(v2 <= v1, "{kind:?}: vf({c2}) = {v2} > vf({c1}) = {v1}");
    }

    #[test]
    fn dataset_round_trips(seed in any::<u64>(), groups in 1usize..4, per_group in 1usize..4, nx in 4usize..10, labeled in any::<bool>()) {
        let mut d = generate_groups(&default_schedule()[..groups], per_group, nx, 0.2, seed).unwrap();
        if labeled {
            for g in &mut d.groups {
                for s in &mut g.samples {
                    s.label = Some(GridField::from_fn(nx, nx, |x, y| x * y + seed as f64 * 1e-20).unwrap());
                }
            }
        }
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &d).unwrap();
        prop_assert_eq!(read_dataset(bytes.as_slice()).unwrap(), d);
    }

    #[test]
    fn replay_selection_is_disjoint_with_planned_counts(
        past in prop::collection::vec(-10.0f64..10.0, 1..40),
        new in prop::collection::vec(-10.0f64..10.0, 1..40),
        pw in 0.0f64..0.4, pr in 0.0f64..0.4, nw in 0.0f64..0.4, nr in 0.0f64..0.4,
        seed in any::<u64>(),
    ) {
        let plan = ReplayPlan::new(pw, pr, nw, nr).unwrap();
        let (sp, sn) = (scored(1, &past), scored(2, &new));
        let mix = select_replay(&sp, &sn, &plan, seed).unwrap();
        let keys: HashSet<_> = mix.iter().map(|s| (s.group_id, s.sample_index)).collect();
        prop_assert_eq!(keys.len(), mix.len());

        let count = |src, pick| mix.iter().filter(|s| s.source == src && s.pick == pick).count();
        let expect = |w: f64, r: f64, n: usize| {
            let nw = plan_count(w, n);
            (nw, plan_count(r, n).min(n - nw))
        };
        prop_assert_eq!((count(Source::Past, Pick::Worst), count(Source::Past, Pick::Random)), expect(pw, pr, past.len()));
        prop_assert_eq!((count(Source::New, Pick::Worst), count(Source::New, Pick::Random)), expect(nw, nr, new.len()));

        // Every worst pick scores at least as high as every unpicked sample.
        for (src, scores, gid) in [(Source::Past, &past, 1u32), (Source::New, &new, 2u32)] {
            let worst_min = mix.iter().filter(|s| s.source == src && s.pick == Pick::Worst).map(|s| scores[s.sample_index]).fold(f64::INFINITY, f64::min);
            for (i, &v) in scores.iter().enumerate() {
                if !keys.contains(&(gid, i)) {
                    prop_assert!(v <= worst_min);
                }
            }
        }
        prop_assert_eq!(select_replay(&sp, &sn, &plan, seed).unwrap(), mix);
    }

    #[test]
    fn deslice_is_linear_in_tokens(
        logits in prop::collection::vec(-3.0f64..3.0, 15),
        z1 in prop::collection::vec(-2.0f64..2.0, 6),
        z2 in prop::collection::vec(-2.0f64..2.0, 6),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let m = softmax_rows(5, 3, &logits);
        let t1 = Tensor::matrix(3, 2, z1.clone()).unwrap();
        let t2 = Tensor::matrix(3, 2, z2.clone()).unwrap();
        let mix = Tensor::matrix(3, 2, z1.iter().zip(&z2).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let lhs = deslice(&mix, &m).unwrap();
        let (d1, d2) = (deslice(&t1, &m).unwrap(), deslice(&t2, &m).unwrap());
        for i in 0..lhs.len() {
            let rhs = a * d1.data()[i] + b * d2.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() < 1e-12);
        }
    }
}
