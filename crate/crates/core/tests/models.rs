use proptest::prelude::*;

use vfold::models::{
    collection_by_name, dya2_collection, dya2_grid_size, dya2_indices, dya2_model, regu_collection,
    DyadicIndex, HistogramModel, ModelCollection,
};

#[test]
fn regu_collections() {
    assert_eq!(regu_collection(5).unwrap().dims(), vec![1, 2, 3, 4, 5]);
    let one = regu_collection(1).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one.models()[0].dim(), 1);
    let c = regu_collection(500).unwrap();
    let m = &c.models()[249];
    assert_eq!(m.dim(), 250);
    assert!(m.widths().iter().all(|w| (w - 1.0 / 250.0).abs() < 1e-15));
    assert!(c.models().iter().all(|m| m.bins_wider_than_inverse_n(500)));
    assert!(regu_collection(0).is_err());
}

fn floor_log2(k: usize) -> usize {
    let mut r = 0;
    while (2usize << r) <= k {
        r += 1;
    }
    r
}

#[test]
fn dya2_at_500() {
    let grid = dya2_grid_size(500);
    assert_eq!(grid, 80);
    let c = dya2_collection(500).unwrap();
    let count: usize = (1..grid)
        .map(|k| (floor_log2(k) + 1) * (floor_log2(grid - k) + 1))
        .sum();
    assert_eq!(c.len(), count);
    let half = dya2_model(grid, DyadicIndex { k: 40, i: 0, j: 0 }).unwrap();
    assert_eq!(half.breakpoints(), &[0.0, 0.5, 1.0]);
    assert!(c.models().iter().all(|m| m.bins_wider_than_inverse_n(500)));
}

#[test]
fn dya2_widths_are_dyadic_on_each_side() {
    let grid = dya2_grid_size(300);
    for idx in dya2_indices(300).unwrap() {
        let m = dya2_model(grid, idx).unwrap();
        let left = idx.k as f64 / grid as f64 / (1u64 << idx.i) as f64;
        let right = (1.0 - idx.k as f64 / grid as f64) / (1u64 << idx.j) as f64;
        let (l, r) = m.widths().split_at(1 << idx.i);
        assert_eq!(r.len(), 1 << idx.j);
        assert!(l.iter().all(|w| (w - left).abs() < 1e-14));
        assert!(r.iter().all(|w| (w - right).abs() < 1e-14));
    }
    assert!(dya2_collection(2).is_err());
    assert!(dya2_model(grid, DyadicIndex { k: grid, i: 0, j: 0 }).is_err());
}

#[test]
fn collection_order_is_stable() {
    assert_eq!(dya2_collection(200).unwrap(), dya2_collection(200).unwrap());
    let names: Vec<String> = dya2_collection(200)
        .unwrap()
        .models()
        .iter()
        .map(|m| m.id().to_string())
        .collect();
    assert_eq!(names[0], "dya2:1,0,0");
}

#[test]
fn custom_models() {
    assert_eq!(HistogramModel::custom(vec![0.0, 1.0]).unwrap().dim(), 1);
    assert_eq!(HistogramModel::custom(vec![0.0, 0.3, 1.0]).unwrap().dim(), 2);
    for bad in [
        vec![0.0, 0.5, 0.5, 1.0],
        vec![0.0, 0.7, 0.3, 1.0],
        vec![0.1, 1.0],
        vec![0.0, 0.9],
        vec![0.0],
        vec![0.0, f64::NAN, 1.0],
    ] {
        assert!(HistogramModel::custom(bad.clone()).is_err(), "{bad:?}");
    }
}

#[test]
fn bins_at_least_one_over_n_examples() {
    assert!(HistogramModel::regular(10).unwrap().bins_wider_than_inverse_n(100));
    assert!(!HistogramModel::regular(200).unwrap().bins_wider_than_inverse_n(100));
}

#[test]
fn collections_from_json() {
    let c = ModelCollection::from_json_str("mine", "[[0, 0.5, 1], [0, 0.25, 0.5, 1]]").unwrap();
    assert_eq!(c.dims(), vec![2, 3]);
    assert_eq!(c.all_breakpoints(), vec![0.0, 0.25, 0.5, 1.0]);
    let single = ModelCollection::from_json_str("one", "[0, 0.1, 1]").unwrap();
    assert_eq!(single.len(), 1);
    assert!(ModelCollection::from_json_str("bad", "[[0, 2]]").is_err());
    assert!(ModelCollection::from_json_str("bad", "[]").is_err());
    assert!(collection_by_name("regu", 10).is_ok());
    assert!(collection_by_name("dyadic", 10).is_err());
}

#[test]
fn breakpoints_belong_to_the_right_bin() {
    let m = HistogramModel::custom(vec![0.0, 0.25, 0.5, 1.0]).unwrap();
    assert_eq!(m.bin_of(0.0), 0);
    assert_eq!(m.bin_of(0.25), 1);
    assert_eq!(m.bin_of(0.5), 2);
    assert_eq!(m.bin_of(1.0), 2);
    assert_eq!(m.bin_index(1.5), None);
    assert_eq!(m.bin_index(-0.1), None);
}

proptest! {
    #[test]
    fn bin_lookup_matches_linear_scan(d in 1usize..40, x in 0.0f64..=1.0) {
        let m = HistogramModel::regular(d).unwrap();
        let b = m.breakpoints();
        let scan = (0..d).find(|&k| b[k] <= x && (x < b[k + 1] || k == d - 1)).unwrap();
        prop_assert_eq!(m.bin_of(x), scan);
    }

    #[test]
    fn widths_sum_to_one(cuts in proptest::collection::btree_set(1u32..1000, 0..20)) {
        let mut b = vec![0.0];
        b.extend(cuts.iter().map(|&c| c as f64 / 1000.0));
        b.push(1.0);
        let m = HistogramModel::custom(b).unwrap();
        prop_assert!((m.widths().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(m.dim(), cuts.len() + 1);
    }
}
