//! MAC-phase, broadcast-phase and bidirectional rate regions, and Holevo
//! optimization over input distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::channel::{BroadcastChannel, CqChannel, MacChannel, Receiver};
use crate::error::{Error, Result};
use crate::geometry::{RatePair, RateRegion};
use crate::linalg::ProbabilityDistribution;
use crate::typical::compositions;

pub const DEFAULT_GRID_K: usize = 64;
pub const DEFAULT_JOINT_GRID_K: usize = 16;
pub const DEFAULT_REFINE_STEPS: usize = 50;

/// Lattice points of the probability simplex with weights in multiples of `1/k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionGrid {
    pub size: usize,
    pub resolution: usize,
}

impl DistributionGrid {
    pub fn new(size: usize, resolution: usize) -> Result<Self> {
        if size == 0 || resolution == 0 {
            return Err(Error::invalid(format!("empty distribution grid (alphabet {size}, resolution {resolution})")));
        }
        Ok(DistributionGrid { size, resolution })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let k = self.resolution as f64;
        compositions(self.resolution, self.size)
            .into_iter()
            .map(|c| c.into_iter().map(|v| v as f64 / k).collect())
            .collect()
    }

    /// `C(k + |A| - 1, |A| - 1)`.
    pub fn len(&self) -> usize {
        let (n, r) = (self.resolution + self.size - 1, self.size - 1);
        (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacVariant {
    /// Individual rates average `χ` over the other sender's input.
    Conditional,
    /// Individual rates use the channel averaged over the other input.
    AsWritten,
}

impl FromStr for MacVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(MacVariant::Conditional),
            "as-written" => Ok(MacVariant::AsWritten),
            _ => Err(Error::invalid(format!("unknown MAC variant {s:?} (expected conditional or as-written)"))),
        }
    }
}

/// Search space for the senders' inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacInputs {
    /// Independent senders: `Q1 × Q2`, each on its own grid.
    Product,
    /// Any joint `Q_{1,2}` on the grid over `Y1 × Y2`.
    Joint,
}

impl FromStr for MacInputs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(MacInputs::Product),
            "joint" => Ok(MacInputs::Joint),
            _ => Err(Error::invalid(format!("unknown MAC input mode {s:?} (expected product or joint)"))),
        }
    }
}

/// The three MAC constraints at one input distribution:
/// `R2 ≤ a`, `R1 ≤ b`, `R1 + R2 ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacBounds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MacBounds {
    pub fn pentagon(&self) -> [RatePair; 4] {
        let (a, b, c) = (self.a.max(0.0), self.b.max(0.0), self.c.max(0.0));
        [
            RatePair::new(b.min(c), 0.0),
            RatePair::new(b.min(c), (c - b).clamp(0.0, a)),
            RatePair::new((c - a).clamp(0.0, b), a.min(c)),
            RatePair::new(0.0, a.min(c)),
        ]
    }
}

/// Constraint values for a joint input distribution `q` (row-major over `(y1, y2)`).
pub fn mac_bounds(mac: &MacChannel, q: &[f64], variant: MacVariant) -> MacBounds {
    let (n1, n2) = mac.sizes();
    let q1: Vec<f64> = (0..n1).map(|i| (0..n2).map(|j| q[i * n2 + j]).sum()).collect();
    let q2: Vec<f64> = (0..n2).map(|j| (0..n1).map(|i| q[i * n2 + j]).sum()).collect();
    let c = mac.joint_channel().chi_weights(q);
    let (a, b) = match variant {
        MacVariant::Conditional => {
            let a = (0..n2)
                .filter(|&j| q2[j] > 0.0)
                .map(|j| {
                    let cond: Vec<f64> = (0..n1).map(|i| q[i * n2 + j] / q2[j]).collect();
                    q2[j] * mac.with_second_fixed(j).chi_weights(&cond)
                })
                .sum();
            let b = (0..n1)
                .filter(|&i| q1[i] > 0.0)
                .map(|i| {
                    let cond: Vec<f64> = (0..n2).map(|j| q[i * n2 + j] / q1[i]).collect();
                    q1[i] * mac.with_first_fixed(i).chi_weights(&cond)
                })
                .sum();
            (a, b)
        }
        MacVariant::AsWritten => {
            (mac.averaged_over_second(&q2).chi_weights(&q1), mac.averaged_over_first(&q1).chi_weights(&q2))
        }
    };
    MacBounds { a, b, c }
}

fn product_weights(q1: &[f64], q2: &[f64]) -> Vec<f64> {
    q1.iter().flat_map(|a| q2.iter().map(move |b| a * b)).collect()
}

/// Every grid input distribution (row-major joint weights) for the given mode.
pub fn mac_inputs(mac: &MacChannel, resolution: usize, inputs: MacInputs) -> Result<Vec<Vec<f64>>> {
    let (n1, n2) = mac.sizes();
    Ok(match inputs {
        MacInputs::Product => {
            let g1 = DistributionGrid::new(n1, resolution)?.points();
            let g2 = DistributionGrid::new(n2, resolution)?.points();
            g1.iter().flat_map(|a| g2.iter().map(move |b| product_weights(a, b))).collect()
        }
        MacInputs::Joint => DistributionGrid::new(n1 * n2, resolution)?.points(),
    })
}

/// Union of MAC pentagons over the input grid, convexified.
pub fn mac_region(mac: &MacChannel, resolution: usize, variant: MacVariant, inputs: MacInputs) -> Result<RateRegion> {
    let qs = mac_inputs(mac, resolution, inputs)?;
    let corners: Vec<[RatePair; 4]> = qs.par_iter().map(|q| mac_bounds(mac, q, variant).pentagon()).collect();
    Ok(RateRegion::from_points(corners.into_iter().flatten()))
}

/// Union of rectangles `[0, χ(P; W1)] × [0, χ(P; W2)]` over the grid, convexified.
pub fn broadcast_region(bc: &BroadcastChannel, grid: &DistributionGrid) -> Result<RateRegion> {
    if grid.size != bc.alphabet().len() {
        return Err(Error::invalid(format!(
            "grid over {} letters does not match the broadcast alphabet of {}",
            grid.size,
            bc.alphabet().len()
        )));
    }
    let (w1, w2) = (bc.marginal(Receiver::One), bc.marginal(Receiver::Two));
    let corners: Vec<RatePair> =
        grid.points().par_iter().map(|p| RatePair::new(w1.chi_weights(p), w2.chi_weights(p))).collect();
    Ok(RateRegion::from_points(
        corners.into_iter().flat_map(|c| [c, RatePair::new(c.r1, 0.0), RatePair::new(0.0, c.r2)]),
    ))
}

/// The three polygons of the two-phase protocol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BidirectionalRegions {
    pub mac: RateRegion,
    pub broadcast: RateRegion,
    pub intersection: RateRegion,
}

pub fn intersect_regions(r1: &RateRegion, r2: &RateRegion) -> RateRegion {
    r1.intersect(r2)
}

pub fn bidirectional_region(
    mac: &MacChannel,
    bc: &BroadcastChannel,
    mac_resolution: usize,
    bc_resolution: usize,
    variant: MacVariant,
    inputs: MacInputs,
) -> Result<BidirectionalRegions> {
    let mac_r = mac_region(mac, mac_resolution, variant, inputs)?;
    let bc_r = broadcast_region(bc, &DistributionGrid::new(bc.alphabet().len(), bc_resolution)?)?;
    let intersection = intersect_regions(&mac_r, &bc_r);
    Ok(BidirectionalRegions { mac: mac_r, broadcast: bc_r, intersection })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiOptimum {
    pub distribution: ProbabilityDistribution,
    pub chi: f64,
    /// Best value on the grid before refinement.
    pub grid_chi: f64,
    pub accepted_steps: usize,
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Grid maximum of `χ`, then `refine_steps` of projected ascent along
/// forward-difference directional derivatives toward the simplex vertices.
/// Steps are only taken when they increase `χ`; otherwise the step halves.
pub fn optimize_chi(ch: &CqChannel, grid: &DistributionGrid, refine_steps: usize) -> Result<ChiOptimum> {
    if grid.size != ch.alphabet_size() {
        return Err(Error::invalid("grid does not match the channel alphabet"));
    }
    let points = grid.points();
    let values: Vec<f64> = points.par_iter().map(|p| ch.chi_weights(p)).collect();
    let (mut best_idx, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    let grid_chi = best;
    let mut p = points[best_idx].clone();
    let mut step = 1.0 / grid.resolution as f64;
    let mut accepted = 0;
    const H: f64 = 1e-7;
    for _ in 0..refine_steps {
        if ch.alphabet_size() < 2 {
            break;
        }
        let grad: Vec<f64> = (0..p.len())
            .map(|j| {
                let moved: Vec<f64> =
                    p.iter().enumerate().map(|(i, &w)| w + H * ((i == j) as u8 as f64 - w)).collect();
                (ch.chi_weights(&moved) - best) / H
            })
            .collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        let candidate = project_to_simplex(&p.iter().zip(&grad).map(|(w, g)| w + step * g / norm).collect::<Vec<_>>());
        let value = ch.chi_weights(&candidate);
        if value > best {
            best = value;
            p = candidate;
            accepted += 1;
        } else {
            step /= 2.0;
        }
    }
    Ok(ChiOptimum {
        distribution: ProbabilityDistribution::normalized(ch.alphabet().to_vec(), p)?,
        chi: best,
        grid_chi,
        accepted_steps: accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::families;
    use crate::linalg::{c64, DensityOperator};

    fn h2(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    fn has_vertex(r: &RateRegion, p: RatePair, tol: f64) -> bool {
        r.vertices().iter().any(|v| (v.r1 - p.r1).abs() <= tol && (v.r2 - p.r2).abs() <= tol)
    }

    #[test]
    fn grid_enumerates_lattice() {
        let g = DistributionGrid::new(3, 4).unwrap();
        assert_eq!(g.points().len(), 15);
        assert_eq!(g.len(), 15);
        assert!(g.points().iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-15));
        assert!(DistributionGrid::new(2, 0).is_err());
    }

    #[test]
    fn adder_mac_region() {
        let mac = families::adder_mac();
        let r = mac_region(&mac, 16, MacVariant::Conditional, MacInputs::Product).unwrap();
        // H(1/4,1/2,1/4) = 1.5 at uniform inputs
        assert!((r.max_sum_rate() - 1.5).abs() < 1e-9);
        assert!(has_vertex(&r, RatePair::new(1.0, 0.5), 1e-9));
        assert!(has_vertex(&r, RatePair::new(0.5, 1.0), 1e-9));
        let mu1 = r.weighted_boundary_point(1.0);
        assert!((mu1.r1 + mu1.r2 - 1.5).abs() < 1e-9);
        // correlated inputs can reach log2(3) on the sum constraint
        let j = mac_region(&mac, 6, MacVariant::Conditional, MacInputs::Joint).unwrap();
        assert!(j.max_sum_rate() > 1.5);
    }

    #[test]
    fn constant_mac_is_a_point() {
        let r = mac_region(&families::constant_mac(2), 8, MacVariant::Conditional, MacInputs::Product).unwrap();
        assert_eq!(r.vertices(), &[RatePair::ORIGIN]);
    }

    #[test]
    fn product_mac_variants_agree_on_unit_square() {
        let o = families::orthogonal(2);
        let mac = families::product_mac(&o, &o);
        let cond = mac_region(&mac, 8, MacVariant::Conditional, MacInputs::Product).unwrap();
        let lit = mac_region(&mac, 8, MacVariant::AsWritten, MacInputs::Product).unwrap();
        let square = RateRegion::rectangle(1.0, 1.0);
        for r in [&cond, &lit] {
            assert_eq!(r.vertices().len(), 4);
            assert!(r.contains_region(&square, 1e-9) && square.contains_region(r, 1e-9));
        }
    }

    #[test]
    fn product_mac_variants_coincide_on_random_factors() {
        use crate::random::random_density;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let v1 = CqChannel::indexed(vec![random_density(&mut rng, 2, 2), random_density(&mut rng, 2, 1)]).unwrap();
        let v2 = CqChannel::indexed(vec![random_density(&mut rng, 2, 1), random_density(&mut rng, 2, 2)]).unwrap();
        let mac = families::product_mac(&v1, &v2);
        for q in mac_inputs(&mac, 5, MacInputs::Product).unwrap() {
            let a = mac_bounds(&mac, &q, MacVariant::Conditional);
            let b = mac_bounds(&mac, &q, MacVariant::AsWritten);
            assert!((a.a - b.a).abs() < 1e-9 && (a.b - b.b).abs() < 1e-9);
        }
    }

    #[test]
    fn finer_grids_give_supersets() {
        let mac = families::adder_mac();
        let coarse = mac_region(&mac, 4, MacVariant::Conditional, MacInputs::Product).unwrap();
        let fine = mac_region(&mac, 8, MacVariant::Conditional, MacInputs::Product).unwrap();
        assert!(fine.contains_region(&coarse, 1e-9));
        let bc = BroadcastChannel::from_product(&families::orthogonal(2), &families::depolarized(0.2).unwrap()).unwrap();
        let c = broadcast_region(&bc, &DistributionGrid::new(2, 5).unwrap()).unwrap();
        let f = broadcast_region(&bc, &DistributionGrid::new(2, 10).unwrap()).unwrap();
        assert!(f.contains_region(&c, 1e-9));
    }

    #[test]
    fn broadcast_examples() {
        let o = families::orthogonal(2);
        let sq = broadcast_region(&BroadcastChannel::from_product(&o, &o).unwrap(), &DistributionGrid::new(2, 64).unwrap())
            .unwrap();
        assert!(has_vertex(&sq, RatePair::new(1.0, 1.0), 1e-12));
        assert_eq!(sq.vertices().len(), 4);

        let seg = broadcast_region(
            &BroadcastChannel::from_product(&o, &families::constant(2)).unwrap(),
            &DistributionGrid::new(2, 64).unwrap(),
        )
        .unwrap();
        assert_eq!(seg.vertices().len(), 2);
        assert!(has_vertex(&seg, RatePair::new(1.0, 0.0), 1e-12));

        let dep = families::depolarized(0.2).unwrap();
        let r = broadcast_region(&BroadcastChannel::from_product(&o, &dep).unwrap(), &DistributionGrid::new(2, 64).unwrap())
            .unwrap();
        assert!(has_vertex(&r, RatePair::new(1.0, 1.0 - h2(0.1)), 1e-6));
    }

    #[test]
    fn symmetric_receivers_give_symmetric_region() {
        let dep = families::depolarized(0.3).unwrap();
        let bc = BroadcastChannel::from_product(&dep, &dep).unwrap();
        let r = broadcast_region(&bc, &DistributionGrid::new(2, 32).unwrap()).unwrap();
        for v in r.vertices() {
            assert!(r.contains(RatePair::new(v.r2, v.r1)));
        }
    }

    #[test]
    fn optimize_examples() {
        let o = families::orthogonal(2);
        let opt = optimize_chi(&o, &DistributionGrid::new(2, 64).unwrap(), 50).unwrap();
        assert!((opt.chi - 1.0).abs() < 1e-12);
        assert!((opt.distribution.weights()[0] - 0.5).abs() < 1e-12);

        let single = CqChannel::indexed(vec![DensityOperator::maximally_mixed(2)]).unwrap();
        let opt = optimize_chi(&single, &DistributionGrid::new(1, 8).unwrap(), 10).unwrap();
        assert_eq!(opt.chi, 0.0);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityOperator::pure(&[c64::new(s, 0.0), c64::new(s, 0.0)]);
        let zero = DensityOperator::diagonal(&[1.0, 0.0]);
        let ch = CqChannel::indexed(vec![zero, plus]).unwrap();
        let opt = optimize_chi(&ch, &DistributionGrid::new(2, 16).unwrap(), 50).unwrap();
        let uniform = ch.chi_weights(&[0.5, 0.5]);
        let dense = DistributionGrid::new(2, 1000).unwrap().points().iter().map(|p| ch.chi_weights(p)).fold(0.0, f64::max);
        assert!(opt.chi >= uniform - 1e-12);
        assert!(opt.chi >= opt.grid_chi);
        assert!((opt.chi - dense).abs() < 1e-6);
    }

    #[test]
    fn bidirectional_is_intersection() {
        let o = families::orthogonal(2);
        let bc = BroadcastChannel::from_product(&o, &o).unwrap();
        let b = bidirectional_region(&families::adder_mac(), &bc, 16, 16, MacVariant::Conditional, MacInputs::Product)
            .unwrap();
        assert!((b.intersection.max_sum_rate() - 1.5).abs() < 1e-9);
        assert!(b.mac.contains_region(&b.intersection, 1e-9));
        assert!(b.broadcast.contains_region(&b.intersection, 1e-9));
    }
}
