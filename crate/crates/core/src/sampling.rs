//! Deterministic samples of a domain box.

use crate::scalar::Scalar;
use crate::system::{DomainBox, PhasePoint};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A point of the slow base `(x, xd, t)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SlowSample {
    pub x: Vec<f64>,
    pub xd: Vec<f64>,
    pub t: f64,
}

impl SlowSample {
    pub fn x<T: Scalar>(&self) -> DVector<T> {
        DVector::from_iterator(self.x.len(), self.x.iter().map(|v| T::lit(*v)))
    }

    pub fn xd<T: Scalar>(&self) -> DVector<T> {
        DVector::from_iterator(self.xd.len(), self.xd.iter().map(|v| T::lit(*v)))
    }

    pub fn packed(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.xd);
        v.push(self.t);
        v
    }
}

/// Tensor grid over the leading base coordinates plus uniform random points.
///
/// Base coordinates are ordered `x_1..x_s, t, xd_1..xd_s`; the grid spans the
/// first `max_grid_dims` non-degenerate ones and holds the rest at the box
/// centre.
#[derive(Debug, Clone, Copy)]
pub struct DomainSampler {
    pub per_axis: usize,
    pub max_grid_dims: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for DomainSampler {
    fn default() -> Self {
        Self {
            per_axis: 9,
            max_grid_dims: 4,
            random: 100,
            seed: 42,
        }
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

impl DomainSampler {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn base_ranges(dom: &DomainBox) -> Vec<(f64, f64)> {
        let mut r = dom.x.clone();
        r.push(dom.t);
        r.extend_from_slice(&dom.xd);
        r
    }

    fn to_sample(v: &[f64], s: usize) -> SlowSample {
        SlowSample {
            x: v[..s].to_vec(),
            t: v[s],
            xd: v[s + 1..].to_vec(),
        }
    }

    pub fn grid(&self, dom: &DomainBox) -> Vec<SlowSample> {
        let s = dom.x.len();
        let ranges = Self::base_ranges(dom);
        let mut dims = 0;
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(lo, hi)| {
                if hi > lo && dims < self.max_grid_dims {
                    dims += 1;
                    linspace(lo, hi, self.per_axis)
                } else {
                    vec![0.5 * (lo + hi)]
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut v = vec![0.0; axes.len()];
            for (i, ax) in axes.iter().enumerate() {
                v[i] = ax[k % ax.len()];
                k /= ax.len();
            }
            out.push(Self::to_sample(&v, s));
        }
        out
    }

    pub fn random(&self, dom: &DomainBox, count: usize) -> Vec<SlowSample> {
        let s = dom.x.len();
        let ranges = Self::base_ranges(dom);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| {
                let v: Vec<f64> = ranges.iter().map(|&(lo, hi)| draw(&mut rng, lo, hi)).collect();
                Self::to_sample(&v, s)
            })
            .collect()
    }

    /// Grid followed by `self.random` random points.
    pub fn slow_points(&self, dom: &DomainBox) -> Vec<SlowSample> {
        let mut g = self.grid(dom);
        g.extend(self.random(dom, self.random));
        g
    }

    /// Random full phase points with `eta` drawn from the `y` box.
    pub fn phase_points<T: Scalar>(&self, dom: &DomainBox, count: usize) -> Vec<PhasePoint<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5fd);
        let vec_in = |r: &[(f64, f64)], rng: &mut ChaCha8Rng| {
            DVector::from_iterator(r.len(), r.iter().map(|&(lo, hi)| T::lit(draw(rng, lo, hi))))
        };
        (0..count)
            .map(|_| {
                let x = vec_in(&dom.x, &mut rng);
                let xd = vec_in(&dom.xd, &mut rng);
                let eta = vec_in(&dom.y, &mut rng);
                let yd = vec_in(&dom.yd, &mut rng);
                let t = T::lit(draw(&mut rng, dom.t.0, dom.t.1));
                PhasePoint::new(x, xd, eta, yd, t)
            })
            .collect()
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Partition, TimeDependence};

    #[test]
    fn grid_size_follows_dimension_cap() {
        let td = TimeDependence::Periodic { period: 1.0 };
        let one = DomainBox::standard(Partition::new(2, 1), &td);
        let two = DomainBox::standard(Partition::new(3, 2), &td);
        let s = DomainSampler::default();
        assert_eq!(s.grid(&one).len(), 729);
        assert_eq!(s.grid(&two).len(), 6561);
        assert_eq!(s.slow_points(&one).len(), 829);
    }

    #[test]
    fn random_points_are_seeded() {
        let td = TimeDependence::Autonomous;
        let dom = DomainBox::standard(Partition::new(2, 1), &td);
        let a = DomainSampler::with_seed(7).random(&dom, 5);
        let b = DomainSampler::with_seed(7).random(&dom, 5);
        let c = DomainSampler::with_seed(8).random(&dom, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
