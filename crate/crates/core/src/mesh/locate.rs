//! Point location and evaluation of P1 functions at arbitrary points.

use super::hat::HatData;
use super::Mesh;

const INSIDE_TOL: f64 = 1e-10;

/// Uniform bucket grid over cell bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lower: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let d = mesh.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for i in 0..mesh.num_nodes() {
            for (c, &x) in mesh.node(i).iter().enumerate() {
                lower[c] = lower[c].min(x);
                upper[c] = upper[c].max(x);
            }
        }
        let per_axis = ((mesh.num_cells() as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
        let counts = vec![per_axis; d];
        let spacing: Vec<f64> = (0..d)
            .map(|c| ((upper[c] - lower[c]) / per_axis as f64).max(f64::MIN_POSITIVE))
            .collect();
        let mut locator = Self {
            lower,
            spacing,
            counts,
            buckets: vec![Vec::new(); per_axis.pow(d as u32)],
        };
        for k in 0..mesh.num_cells() {
            let mut lo = vec![usize::MAX; d];
            let mut hi = vec![0; d];
            for &v in mesh.cell(k) {
                let b = locator.bucket_coords(mesh.node(v));
                for c in 0..d {
                    lo[c] = lo[c].min(b[c]);
                    hi[c] = hi[c].max(b[c]);
                }
            }
            locator.for_each_bucket(&lo, &hi, |bucket| bucket.push(k));
        }
        locator
    }

    fn bucket_coords(&self, x: &[f64]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .map(|(c, &xc)| {
                let b = ((xc - self.lower[c]) / self.spacing[c]).floor();
                (b.max(0.0) as usize).min(self.counts[c] - 1)
            })
            .collect()
    }

    fn flat(&self, b: &[usize]) -> usize {
        b.iter().rev().fold(0, |acc, &bc| acc * self.counts[0] + bc)
    }

    fn for_each_bucket(&mut self, lo: &[usize], hi: &[usize], mut f: impl FnMut(&mut Vec<usize>)) {
        let d = lo.len();
        let mut cur = lo.to_vec();
        loop {
            let idx = self.flat(&cur);
            f(&mut self.buckets[idx]);
            let mut c = 0;
            loop {
                if c == d {
                    return;
                }
                if cur[c] < hi[c] {
                    cur[c] += 1;
                    break;
                }
                cur[c] = lo[c];
                c += 1;
            }
        }
    }

    /// Cell containing `x` and the barycentric coordinates of `x` in it.
    pub fn locate(&self, mesh: &Mesh, hat: &HatData, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let bucket = &self.buckets[self.flat(&self.bucket_coords(x))];
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for &k in bucket {
            let lambda = hat.barycentric(mesh, k, x);
            let worst = lambda.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -INSIDE_TOL && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((k, lambda, worst));
            }
        }
        best.map(|(k, l, _)| (k, l))
    }

    /// Value at `x` of the P1 function with nodal values `values`.
    pub fn evaluate(&self, mesh: &Mesh, hat: &HatData, values: &[f64], x: &[f64]) -> Option<f64> {
        self.locate(mesh, hat, x).map(|(k, lambda)| {
            mesh.cell(k)
                .iter()
                .zip(&lambda)
                .map(|(&v, &l)| values[v] * l)
                .sum()
        })
    }
}
