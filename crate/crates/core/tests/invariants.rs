//! Property tests over the crate's stated invariants.

use proptest::prelude::*;

use asd_core::diarization::{hot_encode, jaccard_distance, key_from_counts};
use asd_core::fusion::{attention_apply, fuse};
use asd_core::metrics::{auc, roc_curve};
use asd_core::numerics::softmax;
use asd_core::timeline::{Segment, SpeakerTimeline};

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        xs in prop::collection::vec(-30.0f64..30.0, 1..64),
        shift in -50.0f64..50.0,
    ) {
        let p = softmax(&xs).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0 + 1e-15));

        let shifted: Vec<f64> = xs.iter().map(|v| v + shift).collect();
        let q = softmax(&shifted).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn binary_keys_satisfy_popcount_and_normalization(
        counts in prop::collection::vec(0.0f64..100.0, 5..400),
    ) {
        prop_assume!(counts.iter().sum::<f64>() > 0.0);
        let key = key_from_counts(&counts);
        let expected_bits = ((0.2 * counts.len() as f64).ceil() as usize).max(1);
        prop_assert_eq!(key.popcount(), expected_bits);
        let sum: f64 = key.cumulative.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(key.cumulative.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn jaccard_is_a_bounded_symmetric_distance(
        (a, b) in (20usize..60).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..10.0, n),
            prop::collection::vec(0.0f64..10.0, n),
        )),
    ) {
        let ka = key_from_counts(&a);
        let kb = key_from_counts(&b);
        let dab = jaccard_distance(&ka, &kb).unwrap();
        let dba = jaccard_distance(&kb, &ka).unwrap();
        prop_assert!((0.0..=1.0).contains(&dab));
        prop_assert_eq!(dab, dba);
        prop_assert_eq!(jaccard_distance(&ka, &ka).unwrap(), 0.0);
    }

    #[test]
    fn auc_is_invariant_under_monotone_score_maps(
        (scores, labels) in (4usize..80).prop_flat_map(|n| (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0u8..2, n),
        )),
        scale in 0.1f64..10.0,
        offset in -10.0f64..10.0,
    ) {
        prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
        let base = auc(&roc_curve(&scores, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));

        let affine: Vec<f64> = scores.iter().map(|s| scale * s + offset).collect();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert!((auc(&roc_curve(&affine, &labels).unwrap()) - base).abs() <= 1e-12);
        prop_assert!((auc(&roc_curve(&exp, &labels).unwrap()) - base).abs() <= 1e-12);
    }

    #[test]
    fn roc_curves_are_monotone_in_the_unit_square(
        (scores, labels) in (4usize..60).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0u8..2, n),
        )),
    ) {
        prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
        let curve = roc_curve(&scores, &labels).unwrap();
        prop_assert_eq!(curve.points[0], (0.0, 0.0));
        prop_assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            prop_assert!((0.0..=1.0).contains(&w[1].0) && (0.0..=1.0).contains(&w[1].1));
        }
    }

    #[test]
    fn hot_rows_stay_one_hot_under_arbitrary_timelines(
        segments in prop::collection::vec((0.0f64..8.0, 0.1f64..2.0, 0usize..6), 0..10),
        dim in 7usize..12,
    ) {
        let segs: Vec<Segment> = segments
            .iter()
            .enumerate()
            .map(|(i, &(start, len, spk))| {
                // Offset per index so same-label segments cannot overlap.
                Segment::new(
                    start + 10.0 * i as f64,
                    start + 10.0 * i as f64 + len,
                    format!("spk{spk}"),
                )
            })
            .collect();
        let timeline = SpeakerTimeline::new(segs).unwrap();
        let times: Vec<f64> = (0..16).map(|f| f as f64 * 0.4).collect();
        let seq = hot_encode(&timeline, &times, dim).unwrap();
        for f in 0..16 {
            let row = seq.row(f);
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), dim - 1);
        }
    }

    #[test]
    fn fusion_preserves_sub_vector_boundaries(
        parts in prop::collection::vec(
            prop::collection::vec(-3.0f64..3.0, 1..20),
            1..5,
        ),
        use_attention in any::<bool>(),
    ) {
        let (fused, offsets) = fuse(&parts, use_attention).unwrap();
        let total: usize = parts.iter().map(Vec::len).sum();
        prop_assert_eq!(fused.len(), total);
        for (m, part) in parts.iter().enumerate() {
            let start = offsets[m];
            let end = offsets.get(m + 1).copied().unwrap_or(fused.len());
            let expect = if use_attention {
                attention_apply(part).unwrap()
            } else {
                part.clone()
            };
            prop_assert_eq!(&fused[start..end], expect.as_slice());
        }
    }

    #[test]
    fn rttm_round_trips_within_format_precision(
        segments in prop::collection::vec((0.0f64..100.0, 0.01f64..5.0, 0usize..4), 1..12),
    ) {
        let segs: Vec<Segment> = segments
            .iter()
            .enumerate()
            .map(|(i, &(start, len, spk))| {
                Segment::new(
                    start + 200.0 * i as f64,
                    start + 200.0 * i as f64 + len,
                    format!("spk{spk}"),
                )
            })
            .collect();
        let timeline = SpeakerTimeline::new(segs).unwrap();
        let parsed = SpeakerTimeline::from_rttm(&timeline.to_rttm("m")).unwrap();
        prop_assert_eq!(parsed.segments().len(), timeline.segments().len());
        for (a, b) in parsed.segments().iter().zip(timeline.segments()) {
            // Times are rendered to 3 decimals.
            prop_assert!((a.start - b.start).abs() <= 5e-4);
            prop_assert!((a.duration() - b.duration()).abs() <= 5e-4);
            prop_assert_eq!(&a.label, &b.label);
        }
    }
}
