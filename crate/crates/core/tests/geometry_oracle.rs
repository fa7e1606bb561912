//! Cross-checks the Moller-Trumbore predicate against the independent
//! plane-clipping oracle, plus algebraic properties of the predicate.

mod common;

use common::{clipping_oracle, OracleVerdict};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmesh::geometry::{intersection_point, moller_trumbore, Point3, Segment};

const ORACLE_MARGIN: f64 = 1e-5;

fn random_point(rng: &mut ChaCha8Rng, half_extent: f32) -> Point3 {
    Point3::new(
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent),
    )
}

#[test]
fn predicate_agrees_with_clipping_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e6_7a1);
    let mut definite = 0;
    let mut marginal = 0;

    for case in 0..1000 {
        let v0 = random_point(&mut rng, 10.0);
        let v1 = random_point(&mut rng, 10.0);
        let v2 = random_point(&mut rng, 10.0);
        let seg = Segment::new(random_point(&mut rng, 12.0), random_point(&mut rng, 12.0));

        let verdict = clipping_oracle(&seg, v0, v1, v2, ORACLE_MARGIN);
        let mt = moller_trumbore(&seg, v0, v1, v2, 0, false);

        match verdict {
            OracleVerdict::Marginal => marginal += 1,
            OracleVerdict::Miss => {
                definite += 1;
                assert!(mt.is_none(), "case {case}: oracle says miss, predicate hit");
            }
            OracleVerdict::Hit { t } => {
                definite += 1;
                let hit = mt.unwrap_or_else(|| {
                    panic!("case {case}: oracle says hit at t={t}, predicate missed")
                });
                assert!(
                    (hit.t as f64 - t).abs() < 1e-4,
                    "case {case}: t mismatch {t} vs {}",
                    hit.t
                );
            }
        }
    }
    // Random pairs essentially never graze a boundary.
    assert!(definite >= 990, "{marginal} marginal cases of 1000");
}

#[test]
fn constructed_hits_agree_with_oracle() {
    // Segments built to pass through a known interior point: the oracle
    // and the predicate must both report the hit.
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_4ea);
    for case in 0..500 {
        let (v0, v1, v2, seg, _, _, t_true) = constructed_hit(&mut rng);
        let verdict = clipping_oracle(&seg, v0, v1, v2, ORACLE_MARGIN);
        let hit = moller_trumbore(&seg, v0, v1, v2, 0, false)
            .unwrap_or_else(|| panic!("case {case}: constructed hit missed"));
        assert!((hit.t - t_true).abs() < 1e-3, "case {case}");
        if let OracleVerdict::Hit { t } = verdict {
            assert!((t - t_true as f64).abs() < 1e-3, "case {case}");
        } else {
            panic!("case {case}: oracle verdict {verdict:?} for a constructed hit");
        }
    }
}

/// Builds a triangle plus a segment crossing it at comfortable margins.
/// Returns (v0, v1, v2, seg, u, v, t).
fn constructed_hit(rng: &mut ChaCha8Rng) -> (Point3, Point3, Point3, Segment, f32, f32, f32) {
    loop {
        let v0 = random_point(rng, 10.0);
        let v1 = random_point(rng, 10.0);
        let v2 = random_point(rng, 10.0);
        let e1 = v1 - v0;
        let e2 = v2 - v0;
        let n = e1.cross(e2);
        let area2 = n.length();
        if area2 < 1.0 {
            continue; // too sliver-like for clean margins
        }

        let u: f32 = rng.random_range(0.1..0.8);
        let v: f32 = rng.random_range(0.1..0.9 - u);
        let p = v0 + e1 * u + e2 * v;

        let dir = random_point(rng, 1.0);
        let d_len = dir.length();
        if d_len < 0.1 || dir.dot(n).abs() / (d_len * area2) < 0.2 {
            continue; // nearly in-plane; margins would be poor
        }
        let alpha: f32 = rng.random_range(0.2..1.0);
        let beta: f32 = rng.random_range(0.2..1.0);
        let seg = Segment::new(p - dir * alpha, p + dir * beta);
        let t = alpha / (alpha + beta);
        return (v0, v1, v2, seg, u, v, t);
    }
}

fn arb_seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    // Hit existence and t survive cyclic permutation of the vertices;
    // the barycentric pair permutes as (u, v) -> (v, 1-u-v).
    #[test]
    fn cyclic_permutation_preserves_hits(seed in arb_seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v0, v1, v2, seg, _, _, _) = constructed_hit(&mut rng);
        let base = moller_trumbore(&seg, v0, v1, v2, 0, false).expect("constructed hit");
        let rolled = moller_trumbore(&seg, v1, v2, v0, 0, false).expect("cyclic hit");
        prop_assert!((base.t - rolled.t).abs() < 1e-4);
        prop_assert!((rolled.u - base.v).abs() < 1e-3);
        prop_assert!((rolled.v - (1.0 - base.u - base.v)).abs() < 1e-3);
    }

    // Reversing a segment maps t -> 1 - t and preserves the hit.
    #[test]
    fn reversal_mirrors_t(seed in arb_seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v0, v1, v2, seg, _, _, _) = constructed_hit(&mut rng);
        let base = moller_trumbore(&seg, v0, v1, v2, 0, false).expect("constructed hit");
        let reversed = Segment::new(seg.end, seg.start);
        let mirrored = moller_trumbore(&reversed, v0, v1, v2, 0, false).expect("reversed hit");
        prop_assert!((mirrored.t - (1.0 - base.t)).abs() < 1e-4);
        prop_assert!((mirrored.u - base.u).abs() < 1e-3);
        prop_assert!((mirrored.v - base.v).abs() < 1e-3);
    }

    // The barycentric combination reconstructs the intersection point.
    #[test]
    fn barycentric_weights_reconstruct_the_point(seed in arb_seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v0, v1, v2, seg, _, _, _) = constructed_hit(&mut rng);
        let hit = moller_trumbore(&seg, v0, v1, v2, 0, false).expect("constructed hit");
        let p = intersection_point(&seg, &hit);
        let w0 = 1.0 - hit.u - hit.v;
        let q = v0 * w0 + v1 * hit.u + v2 * hit.v;
        let d = p - q;
        prop_assert!(d.length() < 1e-4, "reconstruction off by {}", d.length());
    }

    // Distance equals the norm of (intersection_point - start).
    #[test]
    fn distance_matches_point_recomputation(seed in arb_seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v0, v1, v2, seg, _, _, _) = constructed_hit(&mut rng);
        let hit = moller_trumbore(&seg, v0, v1, v2, 0, false).expect("constructed hit");
        let d = segmesh::geometry::intersection_distance(&seg, &hit);
        let p = intersection_point(&seg, &hit);
        let via_point = (p - seg.start).length();
        prop_assert!((d - via_point).abs() <= 1e-5 * (1.0 + d.abs()));
    }
}
