use rand::Rng;

use mlgrowth::metrics::{
    aggregate_probability_map, binarized_difference, dilate_to_double_area, hd95, otsu_threshold,
    ssim_region, threshold_probability_map, wilcoxon_signed_rank, MapMode,
};
use mlgrowth::seed::rng_from_seed;
use mlgrowth::{BinaryMask, Error, Image2D};

#[test]
fn otsu_isolates_a_single_bright_pixel() {
    let img = Image2D::from_fn(5, 5, 1.0, |x, y| if (x, y) == (2, 3) { 1.0 } else { 0.0 }).unwrap();
    let t = otsu_threshold(&img, 256).unwrap();
    let mask = BinaryMask::from_threshold(&img, t);
    assert_eq!(mask.coords(), vec![(2, 3)]);
    let flat = Image2D::filled(3, 3, 1.0, 0.4).unwrap();
    assert!(matches!(otsu_threshold(&flat, 256), Err(Error::Degenerate(_))));
}

#[test]
fn dilation_of_a_square_follows_the_closed_form() {
    let sq = BinaryMask::from_fn(100, 100, |x, y| (45..55).contains(&x) && (45..55).contains(&y));
    let d = dilate_to_double_area(&sq).unwrap();
    assert_eq!(d.iterations, 3);
    assert_eq!(d.mask.count(), 16 * 16);
    assert!(!d.saturated);
    assert!(d.mask.is_superset_of(&sq));

    let dot = BinaryMask::from_fn(9, 9, |x, y| (x, y) == (4, 4));
    assert_eq!(dilate_to_double_area(&dot).unwrap().mask.count(), 9);

    let big = BinaryMask::from_fn(10, 10, |x, _| x < 7);
    let sat = dilate_to_double_area(&big).unwrap();
    assert!(sat.saturated);
    assert_eq!(sat.mask.count(), 100);
    assert!(matches!(dilate_to_double_area(&BinaryMask::empty(4, 4)), Err(Error::InvalidInput(_))));
}

#[test]
fn ssim_properties() {
    let mut rng = rng_from_seed(12);
    let a = Image2D::from_fn(20, 18, 1.0, |_, _| rng.random::<f64>()).unwrap();
    let b = Image2D::from_fn(20, 18, 1.0, |_, _| rng.random::<f64>()).unwrap();
    let region = BinaryMask::from_fn(20, 18, |x, y| x > 4 && y > 3);
    assert_eq!(ssim_region(&a, &a, &region).unwrap(), 1.0);
    let ab = ssim_region(&a, &b, &region).unwrap();
    assert_eq!(ab, ssim_region(&b, &a, &region).unwrap());
    assert!((-1.0..=1.0).contains(&ab));
    let corner = BinaryMask::from_fn(20, 18, |x, y| x < 2 && y < 2);
    assert!(matches!(ssim_region(&a, &b, &corner), Err(Error::Degenerate(_))));
}

#[test]
fn hd95_simple_cases() {
    let a = BinaryMask::from_fn(12, 3, |x, y| (x, y) == (1, 1));
    let b = BinaryMask::from_fn(12, 3, |x, y| (x, y) == (6, 1));
    assert_eq!(hd95(&a, &b, 1.0).unwrap(), 5.0);
    assert_eq!(hd95(&a, &b, 0.5).unwrap(), 2.5);
    assert_eq!(hd95(&a, &a, 1.0).unwrap(), 0.0);
    assert_eq!(hd95(&a, &b, 1.0).unwrap(), hd95(&b, &a, 1.0).unwrap());
    assert!(matches!(hd95(&a, &BinaryMask::empty(12, 3), 1.0), Err(Error::InvalidInput(_))));
}

#[test]
fn difference_binarization() {
    let orig = Image2D::from_fn(32, 32, 1.0, |x, y| 0.3 + 0.001 * ((x * 7 + y * 3) % 11) as f64).unwrap();
    assert!(binarized_difference(&orig, &orig).unwrap().is_empty());
    let darker = orig.map(|v| v - 0.2);
    assert!(binarized_difference(&darker, &orig).unwrap().is_empty());

    let disk = BinaryMask::from_fn(32, 32, |x, y| (x as f64 - 20.0).powi(2) + (y as f64 - 12.0).powi(2) <= 25.0);
    let with_disk = Image2D::from_fn(32, 32, 1.0, |x, y| orig.get(x, y) + if disk.get(x, y) { 0.5 } else { 0.0 }).unwrap();
    let found = binarized_difference(&with_disk, &orig).unwrap();
    assert!(found.iou(&disk).unwrap() >= 0.95);
}

#[test]
fn aggregation_counts_and_thresholds() {
    let mut rng = rng_from_seed(31);
    let masks: Vec<BinaryMask> = (0..100).map(|_| BinaryMask::from_fn(7, 6, |_, _| rng.random::<f64>() < 0.3)).collect();
    let pm = aggregate_probability_map(&masks, MapMode::Dynamic).unwrap();
    assert_eq!(pm.n_aggregated, 100);
    for k in 0..42 {
        let count = masks.iter().filter(|m| m.bits()[k]).count();
        assert_eq!(pm.values[k], count as f64 / 100.0);
    }
    let mut reversed = masks.clone();
    reversed.reverse();
    assert_eq!(aggregate_probability_map(&reversed, MapMode::Dynamic).unwrap().values, pm.values);

    let halves = [BinaryMask::from_fn(4, 1, |x, _| x < 2), BinaryMask::from_fn(4, 1, |x, _| (1..3).contains(&x))];
    let two = aggregate_probability_map(&halves, MapMode::Static).unwrap();
    assert_eq!(two.values, vec![0.5, 1.0, 0.5, 0.0]);
    assert_eq!(threshold_probability_map(&two, 0.0).unwrap().count(), 4);
    assert_eq!(threshold_probability_map(&two, 1.0).unwrap().coords(), vec![(1, 0)]);
    assert_eq!(threshold_probability_map(&two, 0.5).unwrap().count(), 3);

    let same = vec![halves[0].clone(); 5];
    let pm_same = aggregate_probability_map(&same, MapMode::Static).unwrap();
    assert!(pm_same.values.iter().all(|&v| v == 0.0 || v == 1.0));
    let mismatched = [BinaryMask::empty(3, 3), BinaryMask::empty(4, 3)];
    assert!(matches!(aggregate_probability_map(&mismatched, MapMode::Static), Err(Error::InvalidInput(_))));
}

#[test]
fn wilcoxon_small_samples() {
    let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let x: Vec<f64> = y.iter().map(|v| v + 0.7).collect();
    let r = wilcoxon_signed_rank(&x, &y).unwrap();
    assert!((r.p_two_sided - 2.0 / 64.0).abs() < 1e-15);
    assert!(matches!(wilcoxon_signed_rank(&y, &y), Err(Error::Degenerate(_))));

    // Ranks 1..=10 with W+ = 8: 25 of 1024 sign patterns give W+ <= 8.
    let d = [-1.0, 2.0, -3.0, -4.0, -5.0, 6.0, -7.0, -8.0, -9.0, -10.0];
    let zeros = [0.0; 10];
    let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
    assert_eq!(r.w_plus, 8.0);
    assert!((r.p_two_sided - 50.0 / 1024.0).abs() < 1e-15);
}

#[test]
fn wilcoxon_large_sample_uses_normal_approximation() {
    let mut rng = rng_from_seed(3);
    let x: Vec<f64> = (0..40).map(|_| rng.random::<f64>() + 0.3).collect();
    let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let r = wilcoxon_signed_rank(&x, &y).unwrap();
    assert_eq!(r.method, mlgrowth::metrics::WilcoxonMethod::Normal);
    assert!(r.p_two_sided > 0.0 && r.p_two_sided < 0.05);
}
