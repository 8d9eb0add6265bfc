//! Property tests for structural invariants.

use advtex::io::Image;
use advtex::metrics;
use advtex::tensor::{conv::conv_out_size, Graph};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Convolution output sizes follow the floor formula for every input
    /// size and stride the stack uses.
    #[test]
    fn conv_shape_follows_floor_formula(h in 2usize..300, w in 2usize..300, stride in 1usize..=2) {
        let mut g = Graph::new();
        let input = g.leaf(&vec![0.0; 2 * h * w], &[2, h, w]);
        let weight = g.leaf(&vec![0.0; 3 * 2 * 16], &[3, 2, 4, 4]);
        let bias = g.leaf(&[0.0; 3], &[3]);
        let out = g.conv2d(input, weight, bias, stride, 1).unwrap();
        let expect_h = (h + 2 - 4) / stride + 1;
        let expect_w = (w + 2 - 4) / stride + 1;
        prop_assert_eq!(g.shape(out), &[3, expect_h, expect_w]);
        prop_assert_eq!(expect_h, conv_out_size(h, 4, stride, 1));
    }

    /// Bilinear sampling is exact at integer coordinates and linear along
    /// each axis between adjacent texels (interior texels; borders clamp).
    #[test]
    fn bilinear_is_linear_between_texels(
        y0 in 0usize..4,
        x0 in 0usize..4,
        fy in 0.0f32..0.999,
        fx in 0.0f32..0.999,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (5usize, 5usize); // x0+1, y0+1 always in range
        let src: Vec<f32> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut g = Graph::new();
        let s = g.leaf(&src, &[1, h, w]);

        let sample = |g: &mut Graph, y: f32, x: f32| -> f32 {
            let c = g.leaf(&[y, x], &[2, 1, 1]);
            let v = g.leaf(&[1.0], &[1, 1]);
            let (out, _) = g.bilinear_sample(s, c, v).unwrap();
            g.data(out)[0]
        };

        // exact at grid points
        prop_assert_eq!(sample(&mut g, y0 as f32, x0 as f32), src[y0 * w + x0]);

        // linear along x at fixed integer y
        let a = src[y0 * w + x0];
        let b = src[y0 * w + x0 + 1];
        let mid = sample(&mut g, y0 as f32, x0 as f32 + fx);
        prop_assert!((mid - (a + fx * (b - a))).abs() < 1e-5);

        // linear along y at fixed integer x
        let c = src[(y0 + 1) * w + x0];
        let midy = sample(&mut g, y0 as f32 + fy, x0 as f32);
        prop_assert!((midy - (a + fy * (c - a))).abs() < 1e-5);
    }

    /// The nearest patch loss never exceeds the exact patch loss and is
    /// non-increasing in the search window.
    #[test]
    fn nearest_patch_loss_window_monotone(seed in 0u64..200) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let size = 12usize;
        let mut a = Image::zeros(size, size);
        let mut b = Image::zeros(size, size);
        for v in a.data.iter_mut().chain(b.data.iter_mut()) {
            *v = rng.gen_range(0.0..1.0);
        }
        let exact = metrics::exact_patch_loss(&a, &b, 5).unwrap();
        let mut prev = f64::INFINITY;
        for window in [0usize, 1, 2, 3] {
            let nearest = metrics::nearest_patch_loss(&a, &b, 5, window).unwrap();
            prop_assert!(nearest <= exact + 1e-12);
            prop_assert!(nearest <= prev + 1e-12);
            prev = nearest;
        }
    }

    /// Smoothed scalars stay within the input range (convex combinations).
    #[test]
    fn smoothing_stays_in_range(seed in 0u64..200, steps in 0usize..6) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = advtex::synth::uv_sphere(5, 7, 1.0);
        let values: Vec<f64> = (0..mesh.positions.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in advtex::geom::laplacian_smooth_scalars(&values, &mesh, steps) {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
