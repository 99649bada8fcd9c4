//! Training designs in the `(t, S)` plane: lattices, Halton sets, stock
//! paths and virtual points. Times are always calendar times here; the
//! model coordinate is chosen when a training set is built.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic_with;
use crate::models::{simulate_paths, time_grid, Dynamics, Measure};
use crate::rng::StreamSeed;

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Axis-aligned rectangle `[t_min, t_max] × [s_min, s_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignBox {
    pub t_min: f64,
    pub t_max: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl DesignBox {
    pub fn new(t_min: f64, t_max: f64, s_min: f64, s_max: f64) -> Result<Self> {
        if !(t_min < t_max && s_min < s_max) {
            return Err(Error::invalid("design box needs t_min < t_max and s_min < s_max"));
        }
        Ok(Self {
            t_min,
            t_max,
            s_min,
            s_max,
        })
    }

    pub fn contains(&self, t: f64, s: f64) -> bool {
        (self.t_min..=self.t_max).contains(&t) && (self.s_min..=self.s_max).contains(&s)
    }

    fn bounding(points: &[DesignPoint]) -> Option<Self> {
        let first = points.first()?;
        let mut b = DesignBox {
            t_min: first.t,
            t_max: first.t,
            s_min: first.s,
            s_max: first.s,
        };
        for p in points {
            b.t_min = b.t_min.min(p.t);
            b.t_max = b.t_max.max(p.t);
            b.s_min = b.s_min.min(p.s);
            b.s_max = b.s_max.max(p.s);
        }
        Some(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Grid,
    Halton,
    Path,
    Virtual,
    Imported,
}

/// One design site. Virtual sites carry their pseudo-observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub is_virtual: bool,
    pub pseudo_y: Option<f64>,
    pub noise_var: Option<f64>,
}

impl DesignPoint {
    pub fn sampled(t: f64, s: f64) -> Self {
        Self {
            t,
            s,
            is_virtual: false,
            pseudo_y: None,
            noise_var: None,
        }
    }

    fn virtual_at(t: f64, s: f64, y: f64) -> Self {
        Self {
            t,
            s,
            is_virtual: true,
            pseudo_y: Some(y),
            noise_var: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<DesignPoint>,
    pub provenance: Provenance,
    pub bbox: DesignBox,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_virtual(&self) -> usize {
        self.points.iter().filter(|p| p.is_virtual).count()
    }

    pub fn sampled(&self) -> impl Iterator<Item = &DesignPoint> {
        self.points.iter().filter(|p| !p.is_virtual)
    }

    /// Appends the points of `other`, keeping this design's provenance and box.
    pub fn extend(&mut self, other: &Design) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn with(mut self, other: &Design) -> Design {
        self.extend(other);
        self
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic_with(path, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            for p in &self.points {
                wtr.serialize(p)?;
            }
            wtr.flush()?;
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<Design> {
        let mut rdr = csv::Reader::from_path(path)?;
        let points = rdr.deserialize().collect::<std::result::Result<Vec<DesignPoint>, _>>()?;
        let bbox = DesignBox::bounding(&points).ok_or_else(|| Error::invalid("empty design file"))?;
        Ok(Design {
            points,
            provenance: Provenance::Imported,
            bbox,
        })
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// `n_t × n_s` lattice including the box edges.
pub fn grid_design(bbox: DesignBox, n_t: usize, n_s: usize) -> Result<Design> {
    if n_t < 2 || n_s < 2 {
        return Err(Error::invalid("grid design needs at least 2 levels per axis"));
    }
    let ts = linspace(bbox.t_min, bbox.t_max, n_t);
    let ss = linspace(bbox.s_min, bbox.s_max, n_s);
    let points = ts
        .iter()
        .flat_map(|&t| ss.iter().map(move |&s| DesignPoint::sampled(t, s)))
        .collect();
    Ok(Design {
        points,
        provenance: Provenance::Grid,
        bbox,
    })
}

/// First `n` points of the Halton sequence (base 2 in t, base 3 in S),
/// starting from index 1 and scaled to the box.
pub fn halton_design(bbox: DesignBox, n: usize) -> Result<Design> {
    if n == 0 {
        return Err(Error::invalid("halton design needs n >= 1"));
    }
    let points = (1..=n as u64)
        .map(|i| {
            let u = radical_inverse(i, 2);
            let v = radical_inverse(i, 3);
            DesignPoint::sampled(
                bbox.t_min + u * (bbox.t_max - bbox.t_min),
                bbox.s_min + v * (bbox.s_max - bbox.s_min),
            )
        })
        .collect();
    Ok(Design {
        points,
        provenance: Provenance::Halton,
        bbox,
    })
}

/// `n` i.i.d. draws from N(mean, sd²), floored at a small positive value.
pub fn normal_starts(n: usize, mean: f64, sd: f64, seed: StreamSeed) -> Vec<f64> {
    let dist = Normal::new(mean, sd).expect("finite normal parameters");
    let mut rng = seed.rng(0);
    (0..n).map(|_| dist.sample(&mut rng).max(1e-6 * mean.abs().max(1.0))).collect()
}

/// `n` levels equally spaced over `[lo, hi]` (the midpoint when `n = 1`).
pub fn level_starts(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    linspace(lo, hi, n)
}

/// Paths of the underlying under the physical measure, recorded at
/// `t = 0, dt, …, horizon − dt`. Each recording interval is simulated with
/// `substeps` steps. `starts` gives one initial price per path.
pub fn path_design<D: Dynamics + ?Sized>(
    dynamics: &D,
    starts: &[f64],
    dt: f64,
    horizon: f64,
    substeps: usize,
    seed: StreamSeed,
) -> Result<Design> {
    if starts.is_empty() {
        return Err(Error::invalid("path design needs at least one path"));
    }
    let steps = (horizon / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - horizon).abs() > 1e-9 * horizon.abs().max(1.0) {
        return Err(Error::invalid(format!("dt = {dt} does not divide the horizon {horizon}")));
    }
    let sub = substeps.max(1);
    let times = time_grid(0.0, horizon, steps * sub);
    let paths = simulate_paths(dynamics, starts, &times, starts.len(), Measure::Physical, seed);
    let recorded = paths.subsample(sub);
    let mut points = Vec::with_capacity(starts.len() * steps);
    for path in recorded.iter() {
        for (i, &s) in path.iter().take(steps).enumerate() {
            points.push(DesignPoint::sampled(recorded.times[i], s));
        }
    }
    let bbox = DesignBox::bounding(&points).expect("non-empty");
    Ok(Design {
        points,
        provenance: Provenance::Path,
        bbox,
    })
}

/// Contract terms needed for the pseudo-observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
}

/// Virtual points along three edges of the box: deep ITM at the upper S edge
/// with the discounted forward intrinsic value, deep OTM at the lower S edge
/// with value 0, and at maturity with the payoff. ITM and OTM points come in
/// close pairs (`S_hi·{1, 1.01}`, `S_lo·{1, 0.99}`) over `⌈n/2⌉` time nodes.
pub fn virtual_points(
    contract: Contract,
    bbox: DesignBox,
    n_itm: usize,
    n_otm: usize,
    n_maturity: usize,
) -> Design {
    let mut points = Vec::with_capacity(n_itm + n_otm + n_maturity);
    let forward = |t: f64, s: f64| s - (-contract.rate * (contract.maturity - t)).exp() * contract.strike;

    let paired = |n: usize, edge: f64, factor: f64, points: &mut Vec<DesignPoint>, value: &dyn Fn(f64, f64) -> f64| {
        let nodes = n.div_ceil(2);
        let ts = if nodes == 1 {
            vec![bbox.t_min]
        } else {
            linspace(bbox.t_min, bbox.t_max, nodes)
        };
        for k in 0..n {
            let t = ts[k / 2];
            let s = if k % 2 == 0 { edge } else { edge * factor };
            points.push(DesignPoint::virtual_at(t, s, value(t, s)));
        }
    };
    paired(n_itm, bbox.s_max, 1.01, &mut points, &forward);
    paired(n_otm, bbox.s_min, 0.99, &mut points, &|_, _| 0.0);
    for s in linspace(bbox.s_min, bbox.s_max, n_maturity) {
        points.push(DesignPoint::virtual_at(
            contract.maturity,
            s,
            (s - contract.strike).max(0.0),
        ));
    }
    Design {
        points,
        provenance: Provenance::Virtual,
        bbox,
    }
}

/// Uniform random points in the box (used only as a comparison baseline).
pub fn uniform_design<R: Rng>(bbox: DesignBox, n: usize, rng: &mut R) -> Design {
    let points = (0..n)
        .map(|_| {
            DesignPoint::sampled(
                rng.gen_range(bbox.t_min..bbox.t_max),
                rng.gen_range(bbox.s_min..bbox.s_max),
            )
        })
        .collect();
    Design {
        points,
        provenance: Provenance::Imported,
        bbox,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_values() {
        let b2: Vec<f64> = (1..=3).map(|i| radical_inverse(i, 2)).collect();
        let b3: Vec<f64> = (1..=3).map(|i| radical_inverse(i, 3)).collect();
        assert_eq!(b2, vec![0.5, 0.25, 0.75]);
        assert!((b3[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((b3[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((b3[2] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn grid_corners() {
        let b = DesignBox::new(0.0, 1.0, 10.0, 20.0).unwrap();
        let d = grid_design(b, 2, 2).unwrap();
        let pts: Vec<(f64, f64)> = d.points.iter().map(|p| (p.t, p.s)).collect();
        assert_eq!(pts, vec![(0.0, 10.0), (0.0, 20.0), (1.0, 10.0), (1.0, 20.0)]);
        assert!(grid_design(b, 1, 5).is_err());
    }

    #[test]
    fn virtual_counts_and_values() {
        let b = DesignBox::new(0.0, 0.4, 30.0, 70.0).unwrap();
        let c = Contract {
            strike: 50.0,
            maturity: 0.4,
            rate: 0.05,
        };
        let v = virtual_points(c, b, 20, 20, 10);
        assert_eq!(v.len(), 50);
        assert!(v.points.iter().all(|p| p.is_virtual));
        let itm_at_t = v
            .points
            .iter()
            .find(|p| p.t == 0.4 && p.s == 70.0 && p.pseudo_y.unwrap() > 0.0)
            .unwrap();
        assert_eq!(itm_at_t.pseudo_y, Some(20.0));
        assert!(virtual_points(c, b, 0, 0, 0).is_empty());
    }
}
