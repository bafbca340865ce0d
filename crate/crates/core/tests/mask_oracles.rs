mod common;

use common::{oracle_area, oracle_bbox, oracle_iou, rng, Grid};
use maskfuse_core::{rle, BBox, BinaryMask};
use proptest::prelude::*;

#[test]
fn random_pairs_match_pixel_oracles() {
    let mut r = rng(0x1d0);
    for _ in 0..1000 {
        let a = Grid::random(&mut r, 32, 32);
        let b = Grid::random(&mut r, 32, 32);
        let (ma, mb) = (a.to_mask(), b.to_mask());
        assert_eq!(ma.area(), oracle_area(&a));
        assert_eq!(ma.iou(&mb).unwrap(), oracle_iou(&a, &b));
        let bbox = ma.tight_bbox().map(|b| [b.x, b.y, b.w, b.h]);
        assert_eq!(bbox, oracle_bbox(&a));
    }
}

#[test]
fn odd_sizes_match_oracles() {
    // widths that leave partial trailing words
    let mut r = rng(7);
    for (w, h) in [(1, 1), (63, 2), (64, 3), (65, 5), (129, 7), (3, 100)] {
        for _ in 0..50 {
            let a = Grid::random(&mut r, w, h);
            let b = Grid::random(&mut r, w, h);
            let (ma, mb) = (a.to_mask(), b.to_mask());
            assert_eq!(ma.area(), oracle_area(&a));
            assert_eq!(ma.iou(&mb).unwrap(), oracle_iou(&a, &b));
            assert_eq!(ma.tight_bbox().map(|b| [b.x, b.y, b.w, b.h]), oracle_bbox(&a));
            assert_eq!(ma.invert().area(), (w * h) as u64 - oracle_area(&a));
        }
    }
}

#[test]
fn resize_matches_index_oracle() {
    let mut r = rng(99);
    for (sw, sh, dw, dh) in [(4, 4, 8, 8), (8, 8, 4, 4), (5, 3, 7, 11), (32, 32, 17, 9), (1, 1, 6, 2)] {
        let g = Grid::random(&mut r, sw, sh);
        let out = g.to_mask().resize_nearest(dw as u32, dh as u32).unwrap();
        for y in 0..dh {
            for x in 0..dw {
                let (sx, sy) = (x * sw / dw, y * sh / dh);
                assert_eq!(out.get(x as u32, y as u32), g.at(sx, sy), "({x},{y})");
            }
        }
    }
}

#[test]
fn rle_matches_run_oracle() {
    let mut r = rng(3);
    for _ in 0..200 {
        let g = Grid::random(&mut r, 13, 9);
        // runs of equal values in row-major order, starting with zeros
        let mut runs = vec![0u64];
        let mut cur = false;
        for &b in &g.bits {
            if b != cur {
                runs.push(0);
                cur = b;
            }
            *runs.last_mut().unwrap() += 1;
        }
        assert_eq!(rle::encode(&g.to_mask()), runs);
    }
}

fn arb_mask() -> impl Strategy<Value = BinaryMask> {
    (1u32..70, 1u32..40).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), (w * h) as usize)
            .prop_map(move |bits| BinaryMask::from_bits(w, h, &bits).unwrap())
    })
}

fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1u32..70, 1u32..40).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryMask::from_bits(w, h, &a).unwrap(),
                    BinaryMask::from_bits(w, h, &b).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn iou_bounded_and_symmetric((a, b) in arb_pair()) {
        let ab = a.iou(&b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, b.iou(&a).unwrap());
        prop_assert_eq!(a.iou(&a).unwrap(), 1.0);
    }

    #[test]
    fn iou_with_complement_is_zero(m in arb_mask()) {
        let inv = m.invert();
        prop_assert_eq!(m.iou(&inv).unwrap(), 0.0);
        prop_assert_eq!(inv.invert(), m.clone());
        prop_assert_eq!(m.area() + inv.area(), m.len() as u64);
    }

    #[test]
    fn union_intersection_areas((a, b) in arb_pair()) {
        let inter = a.intersection(&b).unwrap();
        let uni = a.union(&b).unwrap();
        prop_assert_eq!(inter.area(), a.intersection_area(&b).unwrap());
        prop_assert_eq!(uni.area(), a.union_area(&b).unwrap());
        prop_assert_eq!(inter.area() + uni.area(), a.area() + b.area());
    }

    #[test]
    fn bbox_contains_all_pixels(m in arb_mask()) {
        match m.tight_bbox() {
            None => prop_assert_eq!(m.area(), 0),
            Some(BBox { x, y, w, h }) => {
                prop_assert!(BBox::new(x, y, w, h).fits_within(m.width(), m.height()));
                let inside = BinaryMask::from_fn(m.width(), m.height(), |px, py| {
                    px >= x && px < x + w && py >= y && py < y + h
                }).unwrap();
                prop_assert_eq!(m.intersection_area(&inside).unwrap(), m.area());
                // every edge of the box touches the mask
                prop_assert!((y..y + h).any(|py| m.get(x, py)));
                prop_assert!((y..y + h).any(|py| m.get(x + w - 1, py)));
                prop_assert!((x..x + w).any(|px| m.get(px, y)));
                prop_assert!((x..x + w).any(|px| m.get(px, y + h - 1)));
            }
        }
    }

    #[test]
    fn rle_round_trip(m in arb_mask()) {
        let runs = rle::encode(&m);
        prop_assert_eq!(runs.iter().sum::<u64>(), m.len() as u64);
        prop_assert_eq!(rle::decode(m.width(), m.height(), &runs).unwrap(), m);
    }

    #[test]
    fn resize_to_same_dims_is_identity(m in arb_mask()) {
        prop_assert_eq!(m.resize_nearest(m.width(), m.height()).unwrap(), m);
    }

    #[test]
    fn integer_upscale_preserves_iou((a, b) in arb_pair(), k in 1u32..4) {
        let (w, h) = a.dims();
        let ua = a.resize_nearest(w * k, h * k).unwrap();
        let ub = b.resize_nearest(w * k, h * k).unwrap();
        prop_assert_eq!(ua.area(), a.area() * u64::from(k * k));
        prop_assert_eq!(ua.iou(&ub).unwrap(), a.iou(&b).unwrap());
    }
}
