//! Deterministic low-discrepancy sampling of annular regions.
//!
//! Samples come from a Kronecker (additive recurrence) sequence seeded
//! through a splitmix offset, mapped to an annulus by a volume-uniform
//! radius transform and Box-Muller directions.  The first `N` samples of a
//! run are always a prefix of the first `2N`, so enlarging the sample
//! count can only push a sup-estimate upward.

/// splitmix64 step, used to derive per-seed sequence offsets.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Kronecker sequence in `[0,1)^d` with irrational increments derived from
/// the generalized golden ratio (the positive root of `x^{d+1} = x + 1`).
pub struct Kronecker {
    offsets: Vec<f64>,
    alphas: Vec<f64>,
    index: u64,
}

impl Kronecker {
    pub fn new(dim: usize, seed: u64) -> Self {
        let gamma = generalized_golden(dim);
        let alphas: Vec<f64> = (1..=dim)
            .map(|j| (1.0 / gamma.powi(j as i32)).fract())
            .collect();
        let mut state = seed;
        let offsets: Vec<f64> = (0..dim).map(|_| to_unit(splitmix64(&mut state))).collect();
        Kronecker {
            offsets,
            alphas,
            index: 0,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        let k = self.index as f64;
        self.offsets
            .iter()
            .zip(&self.alphas)
            .map(|(o, a)| (o + k * a).fract())
            .collect()
    }
}

fn generalized_golden(d: usize) -> f64 {
    // Newton iteration on x^{d+1} - x - 1 = 0 starting from 1.5.
    let p = (d + 1) as f64;
    let mut x = 1.5f64;
    for _ in 0..64 {
        let f = x.powf(p) - x - 1.0;
        let df = p * x.powf(p - 1.0) - 1.0;
        let next = x - f / df;
        if (next - x).abs() < 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// Streams points of the annulus `inner <= |x| <= outer` in `R^d`
/// (intrinsic coordinates; callers lift into constrained subspaces).
pub struct AnnulusSampler {
    lattice: Kronecker,
    dim: usize,
    inner: f64,
    outer: f64,
}

impl AnnulusSampler {
    pub fn new(dim: usize, inner: f64, outer: f64, seed: u64) -> Self {
        assert!(dim >= 1);
        assert!(outer > inner && inner >= 0.0);
        // One coordinate drives the radius, the rest feed Box-Muller pairs.
        let gaussians = 2 * dim.div_ceil(2);
        AnnulusSampler {
            lattice: Kronecker::new(gaussians + 1, seed),
            dim,
            inner,
            outer,
        }
    }

    pub fn next_offset(&mut self) -> Vec<f64> {
        let u = self.lattice.next_point();
        // Volume-uniform radius in the annulus.
        let d = self.dim as f64;
        let r =
            (self.inner.powf(d) + u[0] * (self.outer.powf(d) - self.inner.powf(d))).powf(1.0 / d);
        // Direction from normalized Gaussians.
        let mut dir = Vec::with_capacity(self.dim);
        let mut i = 1;
        while dir.len() < self.dim {
            let u1 = u[i].max(1e-12);
            let u2 = u[i + 1];
            let rho = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            dir.push(rho * c);
            if dir.len() < self.dim {
                dir.push(rho * s);
            }
            i += 2;
        }
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        dir.iter().map(|x| x / norm * r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_offsets_respect_radii() {
        let mut s = AnnulusSampler::new(3, 0.5, 2.0, 7);
        for _ in 0..500 {
            let p = s.next_offset();
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn sequence_is_prefix_stable() {
        let collect = |n: usize| {
            let mut s = AnnulusSampler::new(2, 0.0, 1.0, 99);
            (0..n).map(|_| s.next_offset()).collect::<Vec<_>>()
        };
        let short = collect(10);
        let long = collect(20);
        assert_eq!(short, long[..10]);
    }

    #[test]
    fn one_dimensional_covers_both_signs() {
        let mut s = AnnulusSampler::new(1, 0.5, 1.0, 3);
        let xs: Vec<f64> = (0..100).map(|_| s.next_offset()[0]).collect();
        assert!(xs.iter().any(|x| *x > 0.0));
        assert!(xs.iter().any(|x| *x < 0.0));
    }
}
