//! Single-octave 2-D gradient noise with a seeded permutation table.
//!
//! Corner gradients are drawn from the eight directions `(±1, ±1)`, `(±1, 0)`
//! and `(0, ±1)`. With a maximum gradient norm of `√2` the noise is bounded by
//! `√2 · √2 / 2 = 1` in absolute value, so no rescaling is needed to land in
//! `[-1, 1]`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRADIENTS: [(f64, f64); 8] =
    [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];

#[derive(Debug, Clone)]
pub struct PerlinNoise {
    perm: [u8; 512],
}

impl PerlinNoise {
    pub fn new(seed: u64) -> Self {
        let mut table: Vec<u8> = (0..=255).collect();
        table.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm = [0u8; 512];
        for (i, slot) in perm.iter_mut().enumerate() {
            *slot = table[i & 255];
        }
        Self { perm }
    }

    #[inline]
    fn hash(&self, ix: usize, iy: usize) -> usize {
        self.perm[self.perm[ix] as usize + iy] as usize
    }

    /// Noise value at `(x, y)` in lattice units. Lattice points evaluate to 0.
    pub fn get(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let ix = (x0 as i64).rem_euclid(256) as usize;
        let iy = (y0 as i64).rem_euclid(256) as usize;

        let corner = |dx: usize, dy: usize| {
            let (gx, gy) = GRADIENTS[self.hash(ix + dx, iy + dy) & 7];
            gx * (fx - dx as f64) + gy * (fy - dy as f64)
        };

        let u = fade(fx);
        let v = fade(fy);
        let bottom = lerp(u, corner(0, 0), corner(1, 0));
        let top = lerp(u, corner(0, 1), corner(1, 1));
        lerp(v, bottom, top)
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(t: f64, a: f64, b: f64) -> f64 {
    a + t * (b - a)
}
