//! Procedural scene renderers.
//!
//! Shapes are soft masks over (approximate) signed distances: a quintic
//! smoothstep across a band of `±softness` pixels. Inside the band the mask
//! depends smoothly on every parameter; outside it the mask is exactly 0 or 1
//! with zero derivative. Each shape is first classified with plain `f64`
//! arithmetic, and the generic (possibly dual-number) distance is evaluated
//! only for pixels that fall inside the band.

use crate::numeric::Real;
use crate::scenario::{Palette, SceneKind, SceneSpec};

/// Canonical frame width; scene geometry is authored in these units.
const FRAME: f64 = 64.0;

/// Angles are authored in degrees.
const DEG: f64 = std::f64::consts::PI / 180.0;

pub(crate) const FACE_MASKS: [&str; 7] = [
    "hair",
    "head",
    "blush_left",
    "blush_right",
    "eye_left",
    "eye_right",
    "mouth",
];
pub(crate) const FLOWER_MASKS: [&str; 2] = ["petals", "disc"];

pub(crate) fn mask_names(kind: SceneKind) -> &'static [&'static str] {
    match kind {
        SceneKind::Faces => &FACE_MASKS,
        SceneKind::Flowers => &FLOWER_MASKS,
    }
}

#[derive(Clone, Copy)]
enum Cov<T> {
    Zero,
    One,
    Part(T),
}

impl<T: Real> Cov<T> {
    fn primal(&self) -> f64 {
        match self {
            Cov::Zero => 0.0,
            Cov::One => 1.0,
            Cov::Part(m) => m.value(),
        }
    }

    fn times(self, other: Cov<T>) -> Cov<T> {
        match (self, other) {
            (Cov::Zero, _) | (_, Cov::Zero) => Cov::Zero,
            (Cov::One, c) | (c, Cov::One) => c,
            (Cov::Part(a), Cov::Part(b)) => Cov::Part(a * b),
        }
    }
}

#[inline]
fn smoother<T: Real>(d_px: T, s: f64) -> T {
    let t = (-d_px + s) * (0.5 / s);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Coverage of a shape whose primal pixel distance is `d0`; `exact` yields
/// the generic pixel distance and is only called inside the soft band.
#[inline]
fn coverage<T: Real>(d0: f64, s: f64, exact: impl FnOnce() -> T) -> Cov<T> {
    if d0 >= s {
        Cov::Zero
    } else if d0 <= -s {
        Cov::One
    } else {
        Cov::Part(smoother(exact(), s))
    }
}

#[inline]
fn paint<T: Real>(c: &mut [T; 3], col: &[T; 3], cov: Cov<T>, alpha: Option<T>) {
    let a = match (cov, alpha) {
        (Cov::Zero, _) => return,
        (Cov::One, None) => {
            *c = *col;
            return;
        }
        (Cov::One, Some(a)) => a,
        (Cov::Part(m), None) => m,
        (Cov::Part(m), Some(a)) => m * a,
    };
    for i in 0..3 {
        c[i] = c[i] + (col[i] - c[i]) * a;
    }
}

fn mix3<T: Real>(a: [f64; 3], b: [f64; 3], t: T) -> [T; 3] {
    [0, 1, 2].map(|i| t * (b[i] - a[i]) + a[i])
}

fn konst<T: Real>(c: [f64; 3]) -> [T; 3] {
    c.map(T::cst)
}

fn ellipse<T: Real>(x: T, y: T, rx: T, ry: T) -> T {
    let u = x / rx;
    let v = y / ry;
    ((u * u + v * v).sqrt() - 1.0) * (rx * ry).sqrt()
}

fn circle<T: Real>(x: T, y: T, cx: f64, cy: f64, r: T) -> T {
    let dx = x - cx;
    let dy = y - cy;
    (dx * dx + dy * dy).sqrt() - r
}

/// Parameters of the scene, pulled out of the flat attribute vector once per image.
struct Param<'a, T> {
    spec: &'a SceneSpec,
    values: &'a [T],
    roles: Vec<usize>,
}

impl<'a, T: Real> Param<'a, T> {
    fn new(spec: &'a SceneSpec, values: &'a [T]) -> Self {
        let roles = spec
            .kind
            .roles()
            .iter()
            .map(|r| spec.attribute_index(r).expect("scenario validated"))
            .collect();
        Self {
            spec,
            values,
            roles,
        }
    }

    fn raw(&self, role: usize) -> T {
        self.values[self.roles[role]]
    }

    /// Attribute rescaled to `[0, 1]` over its declared range.
    fn unit(&self, role: usize) -> T {
        let a = &self.spec.attributes[self.roles[role]];
        (self.raw(role) - a.min) / (a.max - a.min)
    }
}

const SKIN: [[f64; 3]; 2] = [[0.96, 0.82, 0.70], [0.42, 0.28, 0.18]];
const HAIR: [[f64; 3]; 2] = [[0.10, 0.07, 0.05], [0.88, 0.74, 0.42]];
const LIPS: [[f64; 3]; 2] = [[0.36, 0.12, 0.11], [0.86, 0.08, 0.24]];
const BLUSH: [f64; 3] = [0.93, 0.24, 0.36];
const EYE: [f64; 3] = [0.07, 0.05, 0.06];

struct Face<T> {
    cx: T,
    cy: T,
    cos: T,
    sin: T,
    scale: T,
    aspect: T,
    mouth: T,
    eye_r: T,
    hair_len: T,
    skin: [T; 3],
    hair: [T; 3],
    lips: [T; 3],
    blush: [T; 3],
    blush_alpha: T,
    eye: [T; 3],
    bg: [T; 3],
}

impl<T: Real> Face<T> {
    fn new(p: &Param<'_, T>) -> Self {
        let tilt = p.raw(3) * DEG;
        let makeup = p.unit(10);
        let g = p.unit(11) * 0.8 + 0.1;
        Self {
            cx: p.raw(0) + 32.0,
            cy: p.raw(1) + 31.0,
            cos: tilt.cos(),
            sin: tilt.sin(),
            scale: p.raw(2),
            aspect: p.raw(4),
            // Saturating bend, twice as steep as the attribute near zero.
            mouth: {
                let c = p.raw(5);
                c * 2.0 / (c * c + 1.0)
            },
            eye_r: p.raw(6) * 2.6,
            hair_len: p.unit(7),
            skin: mix3(SKIN[0], SKIN[1], p.unit(8)),
            hair: mix3(HAIR[0], HAIR[1], p.unit(9)),
            lips: mix3(LIPS[0], LIPS[1], makeup),
            blush: konst(BLUSH),
            blush_alpha: makeup * 0.8,
            eye: konst(EYE),
            bg: [g * 0.95, g * 0.97, g],
        }
    }

    fn local(&self, x: f64, y: f64) -> (T, T) {
        let dx = -self.cx + x;
        let dy = -self.cy + y;
        (
            (dx * self.cos + dy * self.sin) / self.scale,
            (dy * self.cos - dx * self.sin) / self.scale,
        )
    }

    // Distances below are in local units.
    fn hair_d(&self, x: T, y: T) -> T {
        let cy = self.hair_len * 5.0 - 3.0;
        ellipse(
            x,
            y - cy,
            self.aspect * 15.5 + 2.5,
            self.hair_len * 6.0 + 18.5,
        )
    }

    fn head_d(&self, x: T, y: T) -> T {
        ellipse(x, y, self.aspect * 14.0, T::cst(17.0))
    }

    fn mouth_d(&self, x: T, y: T) -> (T, T) {
        let u = x / 9.0;
        let curve = self.mouth * 5.0 - self.mouth * (u * u) * 10.0 + 8.0;
        ((y - curve).abs() - 2.5, x.abs() - 9.0)
    }
}

fn shade_face<T: Real>(
    f: &Face<T>,
    p: &Face<f64>,
    x: f64,
    y: f64,
    px_per_unit: f64,
    s: f64,
    masks: Option<&mut [f64]>,
) -> [T; 3] {
    let (qx0, qy0) = p.local(x, y);
    let k0 = p.scale * px_per_unit;
    let k = f.scale * px_per_unit;
    let mut q: Option<(T, T)> = None;
    let mut lq = || *q.get_or_insert_with(|| f.local(x, y));

    let mut c = f.bg;
    let mut cov = [Cov::<T>::Zero; FACE_MASKS.len()];

    cov[0] = coverage(p.hair_d(qx0, qy0) * k0, s, || {
        let (qx, qy) = lq();
        f.hair_d(qx, qy) * k
    });
    paint(&mut c, &f.hair, cov[0], None);

    cov[1] = coverage(p.head_d(qx0, qy0) * k0, s, || {
        let (qx, qy) = lq();
        f.head_d(qx, qy) * k
    });
    paint(&mut c, &f.skin, cov[1], None);

    for (i, side) in [(2, -1.0), (3, 1.0)] {
        cov[i] = coverage(circle(qx0, qy0, side * 8.5, 4.5, 3.6) * k0, s, || {
            let (qx, qy) = lq();
            circle(qx, qy, side * 8.5, 4.5, T::cst(3.6)) * k
        });
        paint(&mut c, &f.blush, cov[i], Some(f.blush_alpha));
    }

    for (i, side) in [(4, -1.0), (5, 1.0)] {
        cov[i] = coverage(circle(qx0, qy0, side * 6.0, -3.0, p.eye_r) * k0, s, || {
            let (qx, qy) = lq();
            circle(qx, qy, side * 6.0, -3.0, f.eye_r) * k
        });
        paint(&mut c, &f.eye, cov[i], None);
    }

    let (dy0, dx0) = p.mouth_d(qx0, qy0);
    let vertical = coverage(dy0 * k0, s, || {
        let (qx, qy) = lq();
        f.mouth_d(qx, qy).0 * k
    });
    let horizontal = coverage(dx0 * k0, s, || {
        let (qx, qy) = lq();
        f.mouth_d(qx, qy).1 * k
    });
    cov[6] = vertical.times(horizontal);
    paint(&mut c, &f.lips, cov[6], None);

    if let Some(m) = masks {
        for (slot, cv) in m.iter_mut().zip(&cov) {
            *slot = cv.primal();
        }
    }
    c
}

struct Flower<T> {
    cx: T,
    cy: T,
    cos: T,
    sin: T,
    scale: T,
    count: T,
    length: T,
    width: T,
    disc_r: T,
    petal: [T; 3],
    disc: [T; 3],
    bg: [T; 3],
}

impl<T: Real> Flower<T> {
    fn new(p: &Param<'_, T>, palette: &Palette) -> Self {
        let rot = p.raw(3) * DEG;
        let g = p.unit(10) * 0.8 + 0.1;
        let tint = mix3([0.86, 1.0, 0.78], [0.78, 0.88, 1.0], p.unit(11));
        Self {
            cx: p.raw(0) + 32.0,
            cy: p.raw(1) + 32.0,
            cos: rot.cos(),
            sin: rot.sin(),
            scale: p.raw(2),
            count: p.raw(4),
            length: p.raw(5),
            width: p.raw(7),
            disc_r: p.raw(6),
            petal: mix3(palette.petal[0], palette.petal[1], p.unit(8)),
            disc: mix3(palette.disc[0], palette.disc[1], p.unit(9)),
            bg: tint.map(|t| t * g),
        }
    }

    /// Rotated frame coordinates. Scale stretches the petals only, so the
    /// disc radius is read directly in frame units.
    fn local(&self, x: f64, y: f64) -> (T, T) {
        let dx = -self.cx + x;
        let dy = -self.cy + y;
        (dx * self.cos + dy * self.sin, dy * self.cos - dx * self.sin)
    }

    /// Petal outline radius at angle `theta`. Non-integer counts cross-fade
    /// between the two neighbouring integer lobe patterns.
    fn outline(&self, theta: T) -> T {
        let n = self.count.value().floor();
        let frac = self.count - n;
        let wgt = frac * frac * (-frac * 2.0 + 3.0);
        let lobe = (theta * n).cos() * (-wgt + 1.0) + (theta * (n + 1.0)).cos() * wgt;
        self.length * self.scale * ((-self.width + 1.0) * ((lobe + 1.0) * 0.5) + self.width)
    }
}

fn shade_flower<T: Real>(
    f: &Flower<T>,
    p: &Flower<f64>,
    x: f64,
    y: f64,
    px_per_unit: f64,
    s: f64,
    masks: Option<&mut [f64]>,
) -> [T; 3] {
    let (qx0, qy0) = p.local(x, y);
    let r0 = (qx0 * qx0 + qy0 * qy0).sqrt();
    let k = px_per_unit;
    let k0 = k;
    let mut q: Option<(T, T)> = None;
    let mut lq = || *q.get_or_insert_with(|| f.local(x, y));

    let mut c = f.bg;
    let petals = coverage((r0 - p.outline(qy0.atan2(qx0))) * k0, s, || {
        let (qx, qy) = lq();
        ((qx * qx + qy * qy).sqrt() - f.outline(qy.atan2(qx))) * k
    });
    paint(&mut c, &f.petal, petals, None);
    let disc = coverage((r0 - p.disc_r) * k0, s, || {
        let (qx, qy) = lq();
        ((qx * qx + qy * qy).sqrt() - f.disc_r) * k
    });
    paint(&mut c, &f.disc, disc, None);

    if let Some(m) = masks {
        m[0] = petals.primal();
        m[1] = disc.primal();
    }
    c
}

/// Renders `size × size` pixels. `values` are the attribute values in table
/// order (possibly dual numbers); the returned buffer is row-major RGB.
pub(crate) fn render<T: Real>(
    spec: &SceneSpec,
    values: &[T],
    size: usize,
    softness: f64,
    mut masks: Option<&mut [Vec<f64>]>,
) -> Vec<[T; 3]> {
    let primal: Vec<f64> = values.iter().map(Real::value).collect();
    let unit = FRAME / size as f64;
    let px_per_unit = 1.0 / unit;
    let mut out = Vec::with_capacity(size * size);
    let mut scratch = vec![0.0; mask_names(spec.kind).len()];
    let pv = Param::new(spec, values);
    let pp = Param::new(spec, &primal);
    match spec.kind {
        SceneKind::Faces => {
            let f = Face::new(&pv);
            let p = Face::new(&pp);
            for j in 0..size {
                let y = (j as f64 + 0.5) * unit;
                for i in 0..size {
                    let x = (i as f64 + 0.5) * unit;
                    let m = masks.as_ref().map(|_| scratch.as_mut_slice());
                    out.push(shade_face(&f, &p, x, y, px_per_unit, softness, m));
                    store(&mut masks, &scratch, j * size + i);
                }
            }
        }
        SceneKind::Flowers => {
            let palette = spec.palette.as_ref().expect("scenario validated");
            let f = Flower::new(&pv, palette);
            let p = Flower::new(&pp, palette);
            for j in 0..size {
                let y = (j as f64 + 0.5) * unit;
                for i in 0..size {
                    let x = (i as f64 + 0.5) * unit;
                    let m = masks.as_ref().map(|_| scratch.as_mut_slice());
                    out.push(shade_flower(&f, &p, x, y, px_per_unit, softness, m));
                    store(&mut masks, &scratch, j * size + i);
                }
            }
        }
    }
    out
}

fn store(masks: &mut Option<&mut [Vec<f64>]>, scratch: &[f64], at: usize) {
    if let Some(m) = masks {
        for (plane, v) in m.iter_mut().zip(scratch) {
            plane[at] = *v;
        }
    }
}
