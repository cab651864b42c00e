use super::*;
use crate::scenario::{toy_faces, toy_flowers_a, toy_flowers_b, Palette, SceneParams};

fn generator() -> Generator {
    Generator::new(GeneratorGeometry::default()).unwrap()
}

fn styles(n: usize, seed: u64) -> Vec<StyleVector> {
    let g = generator();
    let mut rng = Rng::new(seed);
    (0..n).map(|_| g.sample_style(&mut rng)).collect()
}

#[test]
fn mapping_round_trip() {
    let g = generator();
    let mut rng = Rng::new(1);
    for _ in 0..50 {
        let z = g.sample_latent(&mut rng);
        let back = g.unmap_latent(&g.map_latent(&z).unwrap()).unwrap();
        for (a, b) in z.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn mapping_rejects_wrong_length() {
    let g = generator();
    assert!(g.map_latent(&LatentCode::zeros(3)).is_err());
    assert!(g.unmap_latent(&StyleVector::zeros(3)).is_err());
}

#[test]
fn zero_latent_decodes_to_midpoints() {
    let g = generator();
    for scene in [toy_faces(), toy_flowers_a()] {
        let w = g.map_latent(&LatentCode::zeros(16)).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.0));
        let p = g.decode_style(&w, &scene).unwrap();
        assert_eq!(p, SceneParams::midpoints(&scene));
    }
}

#[test]
fn synthesize_from_z_matches_uniform_assignment() {
    let g = generator();
    let scene = toy_faces();
    let mut rng = Rng::new(2);
    for _ in 0..5 {
        let z = g.sample_latent(&mut rng);
        let w = g.map_latent(&z).unwrap();
        let direct = g
            .synthesize(&LayerAssignment::uniform(&w, 6), &scene)
            .unwrap();
        assert_eq!(g.synthesize_from_z(&z, &scene).unwrap(), direct);
        // Through the inverse map the style is recovered to rounding only.
        let again = g
            .synthesize_from_z(&g.unmap_latent(&w).unwrap(), &scene)
            .unwrap();
        assert!(again.max_abs_diff(&direct) < 1e-9);
    }
}

#[test]
fn decoded_attributes_stay_in_range() {
    let g = generator();
    for scene in [toy_faces(), toy_flowers_a(), toy_flowers_b()] {
        for w in styles(40, 3) {
            let p = g.decode_style(&w, &scene).unwrap();
            for (a, v) in scene.attributes.iter().zip(p.values()) {
                assert!(a.contains(*v), "{} = {v}", a.name);
            }
        }
    }
}

#[test]
fn layer_locality_on_decoded_attributes() {
    let g = generator();
    let scene = toy_faces();
    let s = styles(2, 4);
    let base = g.decode_style(&s[0], &scene).unwrap();
    let other = g.decode_style(&s[1], &scene).unwrap();
    for layer in 0..6 {
        let mut assignment = LayerAssignment::uniform(&s[0], 6);
        assignment.set(layer, LayerStyle::single(s[1].clone()));
        let mixed = g.decode_styles(&assignment, &scene).unwrap();
        for (i, a) in scene.attributes.iter().enumerate() {
            let expected = if a.layer == layer + 1 {
                other.values()[i]
            } else {
                base.values()[i]
            };
            assert_eq!(
                mixed.values()[i],
                expected,
                "{} at layer {}",
                a.name,
                layer + 1
            );
        }
    }
}

#[test]
fn blend_identities_are_exact() {
    let g = generator();
    let scene = toy_flowers_b();
    let s = styles(2, 5);
    let direct = g.synthesize_style(&s[0], &scene).unwrap();
    let self_blend =
        LayerAssignment::new(vec![LayerStyle::blend(s[0].clone(), s[0].clone(), 0.37); 6]);
    assert_eq!(g.synthesize(&self_blend, &scene).unwrap(), direct);
    for (alpha, expect) in [(0.0, &s[0]), (1.0, &s[1])] {
        let a = LayerAssignment::new(vec![
            LayerStyle::blend(s[0].clone(), s[1].clone(), alpha);
            6
        ]);
        assert_eq!(
            g.synthesize(&a, &scene).unwrap(),
            g.synthesize_style(expect, &scene).unwrap()
        );
    }
}

#[test]
fn invalid_assignments_are_rejected() {
    let g = generator();
    let scene = toy_faces();
    let s = styles(2, 6);
    assert!(g
        .synthesize(&LayerAssignment::uniform(&s[0], 5), &scene)
        .is_err());
    let bad_alpha =
        LayerAssignment::new(vec![LayerStyle::blend(s[0].clone(), s[1].clone(), 1.5); 6]);
    assert!(g.synthesize(&bad_alpha, &scene).is_err());
    let short = LayerAssignment::uniform(&StyleVector::zeros(4), 6);
    assert!(g.synthesize(&short, &scene).is_err());
}

#[test]
fn colour_layers_leave_geometry_untouched() {
    let g = generator();
    for scene in [toy_faces(), toy_flowers_a()] {
        let s = styles(2, 7);
        let mut mixed = LayerAssignment::uniform(&s[0], 6);
        mixed.set(4, LayerStyle::single(s[1].clone()));
        mixed.set(5, LayerStyle::single(s[1].clone()));
        let a = g.decode_style(&s[0], &scene).unwrap();
        let b = g.decode_styles(&mixed, &scene).unwrap();
        let ma = g.render_masks(&a, &scene).unwrap();
        let mb = g.render_masks(&b, &scene).unwrap();
        // Blush opacity follows makeup, so compare shape masks only.
        for (i, name) in ma.names.iter().enumerate() {
            if !name.starts_with("blush") {
                assert_eq!(ma.planes[i], mb.planes[i], "{name}");
            }
        }
        assert_ne!(g.render(&a, &scene).unwrap(), g.render(&b, &scene).unwrap());
    }
}

#[test]
fn background_brightness_is_monotone() {
    let g = generator();
    for scene in [toy_faces(), toy_flowers_a()] {
        let mut last = -1.0;
        for step in 0..=10 {
            let mut p = SceneParams::midpoints(&scene);
            p.set(&scene, "background", step as f64 / 10.0).unwrap();
            let corner = g.render(&p, &scene).unwrap().pixel(0, 0);
            let v = corner.iter().sum::<f64>();
            assert!(v > last, "{} step {step}", scene.id);
            last = v;
        }
    }
}

#[test]
fn render_validates_params() {
    let g = generator();
    let scene = toy_faces();
    let bad = SceneParams::from_unchecked(vec![0.0; 3]);
    assert!(g.render(&bad, &scene).is_err());
    let mut out_of_range = SceneParams::midpoints(&scene).values().to_vec();
    out_of_range[0] = 100.0;
    assert!(g
        .render(&SceneParams::from_unchecked(out_of_range), &scene)
        .is_err());
}

#[test]
fn images_are_in_unit_range() {
    let g = generator();
    for scene in [toy_faces(), toy_flowers_a(), toy_flowers_b()] {
        for w in styles(10, 8) {
            let img = g.synthesize_style(&w, &scene).unwrap();
            assert_eq!(img.dims(), (64, 64));
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

/// Central differences over each attribute against the forward-mode
/// Jacobian.
fn check_jacobian(scene: &SceneSpec, seed: u64) {
    let g = generator();
    let h = 1e-4;
    for w in styles(5, seed) {
        // Keep every attribute at least one step inside its range so the
        // differences stay central.
        let values = g
            .decode_style(&w, scene)
            .unwrap()
            .values()
            .iter()
            .zip(&scene.attributes)
            .map(|(v, a)| v.clamp(a.min + h, a.max - h))
            .collect();
        let p = SceneParams::new(scene, values).unwrap();
        let jac = g.params_jacobian(&p, scene).unwrap();
        assert_eq!(jac.image, g.render(&p, scene).unwrap());
        for k in 0..scene.attributes.len() {
            let mut plus = p.values().to_vec();
            let mut minus = p.values().to_vec();
            plus[k] += h;
            minus[k] -= h;
            let span = 2.0 * h;
            let ip = g.render_unchecked(&plus, scene);
            let im = g.render_unchecked(&minus, scene);
            let worst = ip
                .data()
                .iter()
                .zip(im.data())
                .zip(&jac.gradients[k])
                .map(|((a, b), d)| ((a - b) / span - d).abs())
                .fold(0.0, f64::max);
            assert!(
                worst < 1e-4,
                "{} / {}: {worst}",
                scene.id,
                scene.attributes[k].name
            );
        }
    }
}

#[test]
fn jacobian_matches_finite_differences_faces() {
    check_jacobian(&toy_faces(), 9);
}

#[test]
fn jacobian_matches_finite_differences_flowers() {
    check_jacobian(&toy_flowers_a(), 10);
    check_jacobian(&toy_flowers_b(), 11);
}

#[test]
fn invisible_attribute_has_zero_gradient() {
    let g = generator();
    let mut scene = toy_flowers_a();
    let c = [0.9, 0.5, 0.1];
    scene.palette = Some(Palette {
        petal: [c, c],
        ..scene.palette.unwrap()
    });
    let k = scene.attribute_index("petal_shade").unwrap();
    for w in styles(3, 12) {
        let p = g.decode_style(&w, &scene).unwrap();
        let jac = g.params_jacobian(&p, &scene).unwrap();
        assert!(jac.gradients[k].iter().all(|&d| d == 0.0));
    }
}

#[test]
fn frozen_attribute_ignores_its_component() {
    let g = generator();
    let scene = toy_faces().with_frozen("makeup_tint", 0.25).unwrap();
    let k = scene.attribute_index("makeup_tint").unwrap();
    let comp = scene.attributes[k].component;
    let s = styles(1, 13).remove(0);
    let mut moved = s.clone().into_vec();
    moved[comp] = -moved[comp];
    let moved = StyleVector::new(moved).unwrap();
    assert_eq!(
        g.synthesize_style(&s, &scene).unwrap(),
        g.synthesize_style(&moved, &scene).unwrap()
    );
    assert_eq!(Generator::decode_slope(&scene, k, 0.3), 0.0);
    assert_eq!(g.decode_style(&s, &scene).unwrap().values()[k], 0.25);
}

#[test]
fn decode_slope_matches_difference() {
    let scene = toy_faces();
    for k in 0..scene.attributes.len() {
        for w in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let h = 1e-6;
            let fd = (Generator::decode_component(&scene, k, w + h)
                - Generator::decode_component(&scene, k, w - h))
                / (2.0 * h);
            assert!((fd - Generator::decode_slope(&scene, k, w)).abs() < 1e-6);
        }
    }
}
