//! Algebraic invariants checked on random inputs.

mod common;

use common::*;
use pdca::data::{gen_half_circles, gen_two_moons, gen_two_region_image, pca_reduce, sample_supervision, PointCloud};
use pdca::energy::{grad_total, p1_value, p2_value, total_energy};
use pdca::graph::{build_knn_graph, FeatureSet, KernelScaling};
use pdca::metrics::{accuracy, dice, jaccard};
use pdca::{EnergyParams, Normalization};
use pdca_oracle::{dense_eigen, dense_eigs, dense_laplacian, dense_signless, DenseSym};
use proptest::prelude::*;

fn labels(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadratic_form_is_weighted_edge_sum(n in 3usize..40, seed in any::<u64>()) {
        let w = random_graph(n, 0.2, seed);
        let u = random_vec(n, seed);
        let d = w.degrees();
        for mode in MODES {
            let scaled: Vec<f64> = match mode {
                Normalization::Unnormalized => u.clone(),
                Normalization::Normalized => u.iter().zip(d.as_slice()).map(|(x, di)| x / di.sqrt()).collect(),
            };
            let edges: f64 = w.triplets().map(|(i, j, wij)| wij * (scaled[i] - scaled[j]).powi(2)).sum::<f64>() / 2.0;
            let q = op(&w, mode).quadratic_form(&u).unwrap();
            prop_assert!((q - edges).abs() <= 1e-12 * edges.abs().max(1.0), "{:?}: {} vs {}", mode, q, edges);
        }
    }

    #[test]
    fn laplacian_spectra_are_bounded(n in 3usize..60, density in 0.0f64..0.5, seed in any::<u64>()) {
        let w = random_graph(n, density, seed);
        let signless = dense_eigs(&dense_signless(&w).unwrap()).unwrap();
        prop_assert!(signless[0] >= -1e-10);
        let ls = dense_eigs(&dense_laplacian(&w, Normalization::Normalized).unwrap()).unwrap();
        prop_assert!(ls[0] >= -1e-10 && ls[n - 1] <= 2.0 + 1e-10, "{} {}", ls[0], ls[n - 1]);
    }

    #[test]
    fn dc_parts_recombine(n in 2usize..30, seed in any::<u64>(), eps in 0.1f64..200.0, c in 0.0f64..20.0) {
        let p = EnergyParams { epsilon: eps, eta: 3.0, convex_shift: c };
        let w = random_graph(n.max(3), 0.3, seed);
        let n = w.num_nodes();
        let prior = random_prior(n, 0.5, seed);
        let u = random_vec(n, seed);
        for mode in MODES {
            let l = op(&w, mode);
            let f = total_energy(&u, &l, &prior, &p).unwrap();
            let split = p1_value(&u, &l, &prior, &p).unwrap() - p2_value(&u, &p);
            prop_assert!((f - split).abs() <= 1e-10 * f.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_central_differences(n in 3usize..25, seed in any::<u64>()) {
        let p = EnergyParams { epsilon: 1.5, eta: 4.0, convex_shift: 3.0 };
        let w = random_graph(n, 0.3, seed);
        let prior = random_prior(n, 0.5, seed);
        let u = random_vec(n, seed);
        for mode in MODES {
            let l = op(&w, mode);
            let g = grad_total(&u, &l, &prior, &p).unwrap();
            let h = 1e-5;
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut up = u.clone();
                up[i] += h;
                let mut dn = u.clone();
                dn[i] -= h;
                let fd = (total_energy(&up, &l, &prior, &p).unwrap() - total_energy(&dn, &l, &prior, &p).unwrap()) / (2.0 * h);
                worst = worst.max((fd - g[i]).abs());
            }
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(worst / scale < 1e-6, "{:?}: {}", mode, worst / scale);
        }
    }

    #[test]
    fn knn_graph_is_symmetric_and_nonnegative(n in 4usize..60, k in 1usize..8, seed in any::<u64>()) {
        let cloud = gen_half_circles(2 * (n / 2).max(2), (0.8, 1.0), (1.8, 2.0), seed).unwrap();
        let k = k.min(cloud.len() - 1);
        let w = build_knn_graph(&cloud.features, k, KernelScaling::LocalScaling { m: k }).unwrap();
        for (i, j, wij) in w.triplets() {
            prop_assert!(i != j && wij > 0.0 && wij <= 1.0);
            prop_assert_eq!(w.get(j, i), Some(wij));
        }
        // every node keeps at least its own k neighbors
        for i in 0..w.num_nodes() {
            prop_assert!(w.row(i).0.len() >= k);
        }
    }

    #[test]
    fn dice_and_jaccard_are_linked(seg in labels(40), gt in labels(40)) {
        let d = dice(&seg, &gt).unwrap();
        let j = jaccard(&seg, &gt).unwrap();
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
        prop_assert!((j - d / (2.0 - d)).abs() < 1e-12);
        prop_assert!(j <= d + 1e-15);
    }

    #[test]
    fn accuracy_ignores_label_swap(pred in labels(33), gt in labels(33)) {
        let a = accuracy(&pred, &gt).unwrap();
        let flipped: Vec<i8> = pred.iter().map(|x| -x).collect();
        prop_assert_eq!(a, accuracy(&flipped, &gt).unwrap());
        prop_assert!(a >= 0.5);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let a = gen_two_moons(40, 8, 0.02, seed).unwrap();
        let b = gen_two_moons(40, 8, 0.02, seed).unwrap();
        prop_assert_eq!(a.features.data(), b.features.data());
        prop_assert_eq!(&a.labels, &b.labels);
        let c = gen_half_circles(40, (0.8, 1.0), (1.8, 2.0), seed).unwrap();
        let d = gen_half_circles(40, (0.8, 1.0), (1.8, 2.0), seed).unwrap();
        prop_assert_eq!(c.features.data(), d.features.data());
        let s1 = sample_supervision(c.labels.as_ref().unwrap(), 0.1, seed).unwrap();
        let s2 = sample_supervision(c.labels.as_ref().unwrap(), 0.1, seed).unwrap();
        prop_assert_eq!(s1.lambda(), s2.lambda());
    }
}

#[test]
fn two_region_image_is_deterministic() {
    let a = gen_two_region_image(16, 12, 0.05, 0.02, 9).unwrap();
    let b = gen_two_region_image(16, 12, 0.05, 0.02, 9).unwrap();
    assert_eq!(a.image.data(), b.image.data());
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.prior.targets(), b.prior.targets());
}

#[test]
fn pca_matches_brute_force_covariance() {
    let (n, d) = (20, 5);
    let data = random_vec(n * d, 77);
    let cloud = PointCloud::new(d, data.clone(), None).unwrap();
    let pca = pca_reduce(&cloud, 3).unwrap();
    // components are orthonormal
    for a in 0..3 {
        for b in 0..3 {
            let dot: f64 = pca.components[a].iter().zip(&pca.components[b]).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10);
        }
    }
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| data[i * d + j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (data[i * d + a] - mean[a]) * (data[i * d + b] - mean[b]) / (n - 1) as f64;
            }
        }
    }
    let eig = dense_eigen(&DenseSym::from_rows(d, cov).unwrap()).unwrap();
    let mut values = eig.values.clone();
    values.sort_by(|a, b| b.total_cmp(a));
    for k in 0..3 {
        assert!((pca.variances[k] - values[k]).abs() < 1e-10, "{} vs {}", pca.variances[k], values[k]);
    }
    assert!((pca.total_variance - values.iter().sum::<f64>()).abs() < 1e-10);
    // projected coordinates are the centered data times the components
    let feats = FeatureSet::new(3, pca.projected.features.data().to_vec(), pca.projected.features.source()).unwrap();
    for i in 0..n {
        for k in 0..3 {
            let want: f64 = (0..d).map(|j| (data[i * d + j] - mean[j]) * pca.components[k][j]).sum();
            assert!((feats.point(i)[k] - want).abs() < 1e-10);
        }
    }
}
