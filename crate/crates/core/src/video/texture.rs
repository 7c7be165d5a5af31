//! Procedural grayscale textures: oriented sinusoids, filled polygons and
//! smoothed value noise, min-max normalized to `[0, 1]`.

use rand::Rng;

pub fn procedural_texture(rng: &mut impl Rng, height: usize, width: usize) -> Vec<f64> {
    let mut img = vec![0.0; height * width];

    let n_waves = rng.gen_range(1..=3);
    for _ in 0..n_waves {
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let freq = rng.gen_range(0.03..0.25) * std::f64::consts::TAU;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.3..1.0);
        let (s, c) = angle.sin_cos();
        for y in 0..height {
            for x in 0..width {
                let u = x as f64 * c + y as f64 * s;
                img[y * width + x] += amp * (freq * u + phase).sin();
            }
        }
    }

    let n_polys = rng.gen_range(1..=3);
    for _ in 0..n_polys {
        let sides = rng.gen_range(3..=5);
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let radius = rng.gen_range(0.2..0.6) * width.min(height) as f64;
        let mut angles: Vec<f64> = (0..sides).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<(f64, f64)> = angles
            .iter()
            .map(|a| (cx + radius * a.cos(), cy + radius * a.sin()))
            .collect();
        let level = rng.gen_range(-1.5..1.5);
        for y in 0..height {
            for x in 0..width {
                if point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &verts) {
                    img[y * width + x] += level;
                }
            }
        }
    }

    let cell = rng.gen_range(4..=12) as f64;
    let gw = (width as f64 / cell).ceil() as usize + 2;
    let gh = (height as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let blob_amp = rng.gen_range(0.3..1.0);
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / cell;
            let fy = y as f64 / cell;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (smoothstep(fx.fract()), smoothstep(fy.fract()));
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            img[y * width + x] += blob_amp * (top * (1.0 - ty) + bottom * ty);
        }
    }

    let (lo, hi) = img.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = (hi - lo).max(1e-12);
    for v in &mut img {
        *v = (*v - lo) / span;
    }
    img
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn point_in_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
