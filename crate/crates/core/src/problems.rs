//! Deterministic test instances with known ground truth.
//!
//! Randomness comes from SplitMix64 (Steele, Lea and Flood), seeded with the
//! 64-bit seed as its initial state. Derived draws are specified exactly so
//! that instances can be regenerated in any language:
//!
//! * uniform real in `[0, 1)`: `(next_u64() >> 11) · 2⁻⁵³`;
//! * integer below `n`: rejection sampling, redrawing while
//!   `next_u64() ≥ 2⁶⁴ - (2⁶⁴ mod n)`, then taking the value mod `n`;
//! * `k` distinct indices from `0..n`: the first `k` slots of a partial
//!   Fisher–Yates shuffle of `[0, 1, …, n-1]`, swapping slot `i` with
//!   `i + below(n - i)`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::ProblemError;
use crate::geometry::ManifoldKind;
use crate::io::{atomic_write, format_vector, parse_key_values, parse_vector};
use crate::linops::{NonnegativeSparseMatrix, OpCounter};
use crate::objective::KlProblem;

/// Relative floor applied to nonpositive measurements.
pub const MEASUREMENT_FLOOR: f64 = 1e-6;

/// Seeded generator used by every instance builder.
#[derive(Debug, Clone)]
pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// `k` distinct indices from `0..n` in draw order.
    pub fn distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct values below {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// A problem together with the signal and clean data it was built from.
#[derive(Debug, Clone)]
pub struct GroundTruthInstance {
    pub problem: KlProblem,
    pub x_true: Vec<f64>,
    pub b_clean: Vec<f64>,
    /// `b - b_clean`, including any flooring of nonpositive measurements.
    pub noise: Vec<f64>,
    pub seed: u64,
}

impl GroundTruthInstance {
    /// The same data posed on another feasible set.
    pub fn with_kind(&self, kind: ManifoldKind) -> Result<Self, ProblemError> {
        let problem = KlProblem::new(self.problem.shared_matrix(), self.problem.b().to_vec(), kind)?;
        Ok(Self { problem, ..self.clone() })
    }
}

/// One measurement of two unknowns, `0.25 x₁ + 0.75 x₂ = 1`, whose only
/// solution in the box is `(1, 1)`.
pub fn toy_problem() -> GroundTruthInstance {
    let a = NonnegativeSparseMatrix::from_dense(1, 2, &[0.25, 0.75]).expect("valid toy matrix");
    let problem = KlProblem::new(a, vec![1.0], ManifoldKind::Box).expect("valid toy data");
    GroundTruthInstance { problem, x_true: vec![1.0, 1.0], b_clean: vec![1.0], noise: vec![0.0], seed: 0 }
}

fn floored(b_clean: &[f64], b: Vec<f64>) -> Result<Vec<f64>, ProblemError> {
    let peak = b_clean.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(ProblemError::Parameters("clean measurements are all zero".into()));
    }
    let floor = MEASUREMENT_FLOOR * peak;
    Ok(b.into_iter().map(|v| if v > 0.0 { v } else { floor }).collect())
}

fn assemble(
    matrix: Arc<NonnegativeSparseMatrix>,
    x_true: Vec<f64>,
    b_clean: Vec<f64>,
    b: Vec<f64>,
    seed: u64,
) -> Result<GroundTruthInstance, ProblemError> {
    let noise = b.iter().zip(&b_clean).map(|(b, c)| b - c).collect();
    let problem = KlProblem::new(matrix, b, ManifoldKind::Box)?;
    Ok(GroundTruthInstance { problem, x_true, b_clean, noise, seed })
}

/// Sparse binary recovery with the adjacency matrix of a random left-regular
/// bipartite graph: every column of the `m × n` matrix has `col_weight` ones
/// in distinct rows, and the signal has `sparsity` ones.
///
/// Columns are drawn first (column `j` takes `distinct(m, col_weight)`), then
/// the support of the signal (`distinct(n, sparsity)`). Zero measurements are
/// lifted to `1e-6 · max(b)`.
pub fn expander_instance(
    m: usize,
    n: usize,
    col_weight: usize,
    sparsity: usize,
    seed: u64,
) -> Result<GroundTruthInstance, ProblemError> {
    if m == 0 || n == 0 || col_weight == 0 || col_weight > m || sparsity == 0 || sparsity > n {
        return Err(ProblemError::Parameters(format!(
            "need 0 < col_weight <= m and 0 < sparsity <= n, got m={m}, n={n}, col_weight={col_weight}, sparsity={sparsity}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut triplets = Vec::with_capacity(n * col_weight);
    for col in 0..n {
        for row in rng.distinct(m, col_weight) {
            triplets.push((row, col, 1.0));
        }
    }
    let mut x_true = vec![0.0; n];
    for j in rng.distinct(n, sparsity) {
        x_true[j] = 1.0;
    }
    let matrix = NonnegativeSparseMatrix::from_triplets(m, n, triplets)?;
    let b_clean = matrix.matvec(&x_true, &mut OpCounter::new())?;
    let b = floored(&b_clean, b_clean.clone())?;
    assemble(Arc::new(matrix), x_true, b_clean, b, seed)
}

/// Convolution with a `mask × mask` Gaussian of width `sigma` on a
/// `height × width` image in row-major order. The kernel is normalized over
/// the full mask and pixels outside the image count as zero, so rows near the
/// border sum to less than one.
pub fn gaussian_blur_operator(
    height: usize,
    width: usize,
    mask: usize,
    sigma: f64,
) -> Result<NonnegativeSparseMatrix, ProblemError> {
    if mask.is_multiple_of(2) || mask > height.min(width) || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ProblemError::Parameters(format!(
            "need an odd mask no larger than the image and sigma > 0, got mask={mask}, sigma={sigma}, image {height}x{width}"
        )));
    }
    let half = (mask / 2) as isize;
    let profile: Vec<f64> = (-half..=half).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = profile.iter().sum::<f64>().powi(2);
    let mut triplets = Vec::with_capacity(height * width * mask * mask);
    for r in 0..height as isize {
        for c in 0..width as isize {
            let row = (r as usize) * width + c as usize;
            for (i, dr) in (-half..=half).enumerate() {
                for (j, dc) in (-half..=half).enumerate() {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= height as isize || cc >= width as isize {
                        continue;
                    }
                    let w = profile[i] * profile[j] / total;
                    if w > 0.0 {
                        triplets.push((row, (rr as usize) * width + cc as usize, w));
                    }
                }
            }
        }
    }
    Ok(NonnegativeSparseMatrix::from_triplets(height * width, height * width, triplets)?)
}

/// Parallel-beam projection matrix with rays that missed the image removed.
#[derive(Debug, Clone)]
pub struct RayProjector {
    pub matrix: NonnegativeSparseMatrix,
    /// For each matrix row, the index `angle · detectors + detector` of its ray.
    pub ray_of_row: Vec<usize>,
    pub n_angles: usize,
    pub detectors: usize,
}

/// Length of the segment of the line `origin + t·dir` (unit `dir`) inside the
/// axis-aligned box `[lo, hi]`.
fn clip_length(origin: [f64; 2], dir: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if dir[k].abs() < 1e-15 {
            if origin[k] < lo[k] || origin[k] >= hi[k] {
                return 0.0;
            }
        } else {
            let a = (lo[k] - origin[k]) / dir[k];
            let b = (hi[k] - origin[k]) / dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 - t0).max(0.0)
}

/// Entries shorter than this are treated as grazing contacts and dropped.
const MIN_INTERSECTION: f64 = 1e-12;

/// Exact ray-pixel intersection lengths for a parallel-beam scan of an
/// `image_size × image_size` image of unit pixels centered at the origin.
///
/// Angle `a` is `a·π / n_angles`; the rays of that angle travel along
/// `(cos φ, sin φ)` and detector `d` sits at signed offset
/// `d - (image_size - 1)/2` along the normal `(-sin φ, cos φ)`. Pixel `(r, c)`
/// (row 0 at the top) is column `r·image_size + c`.
pub fn parallel_beam_tomography(image_size: usize, n_angles: usize) -> Result<RayProjector, ProblemError> {
    if image_size < 2 || n_angles == 0 {
        return Err(ProblemError::Parameters(format!(
            "need image_size >= 2 and at least one angle, got {image_size} and {n_angles}"
        )));
    }
    let n = image_size as f64;
    let half = n / 2.0;
    let mut triplets = Vec::new();
    let mut ray_of_row = Vec::new();
    for a in 0..n_angles {
        let phi = a as f64 * PI / n_angles as f64;
        let dir = [phi.cos(), phi.sin()];
        let normal = [-phi.sin(), phi.cos()];
        for d in 0..image_size {
            let s = d as f64 - (n - 1.0) / 2.0;
            let origin = [s * normal[0], s * normal[1]];
            let row = ray_of_row.len();
            let mut hit = false;
            for r in 0..image_size {
                let y_hi = half - r as f64;
                for c in 0..image_size {
                    let x_lo = c as f64 - half;
                    let len = clip_length(origin, dir, [x_lo, y_hi - 1.0], [x_lo + 1.0, y_hi]);
                    if len > MIN_INTERSECTION {
                        triplets.push((row, r * image_size + c, len));
                        hit = true;
                    }
                }
            }
            if hit {
                ray_of_row.push(a * image_size + d);
            }
        }
    }
    let matrix = NonnegativeSparseMatrix::from_triplets(ray_of_row.len(), image_size * image_size, triplets)?;
    Ok(RayProjector { matrix, ray_of_row, n_angles, detectors: image_size })
}

/// Binary `height × width` image made of `rectangles` random axis-aligned
/// rectangles, each with sides between a quarter and a half of the image.
pub fn synthetic_phantom(height: usize, width: usize, rectangles: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::new(seed);
    let mut image = vec![0.0; height * width];
    let side = |rng: &mut SeededRng, extent: usize| {
        let lo = (extent / 4).max(1);
        let hi = (extent / 2).max(lo);
        lo + rng.below((hi - lo + 1) as u64) as usize
    };
    for _ in 0..rectangles.max(1) {
        let h = side(&mut rng, height);
        let w = side(&mut rng, width);
        let top = rng.below((height - h + 1) as u64) as usize;
        let left = rng.below((width - w + 1) as u64) as usize;
        for r in top..top + h {
            image[r * width + left..r * width + left + w].fill(1.0);
        }
    }
    image
}

/// `b = A x_true + e` with `e_i` uniform in `[-noise_level, noise_level] ·
/// mean(A x_true)`, drawn in row order; nonpositive results are lifted to
/// `1e-6 · max(A x_true)`. The instance is posed on the box.
pub fn synthesize_measurements(
    matrix: impl Into<Arc<NonnegativeSparseMatrix>>,
    x_true: &[f64],
    noise_level: f64,
    seed: u64,
) -> Result<GroundTruthInstance, ProblemError> {
    let matrix = matrix.into();
    if !(noise_level >= 0.0) || !noise_level.is_finite() {
        return Err(ProblemError::Parameters(format!("noise level must be nonnegative, got {noise_level}")));
    }
    if let Some(v) = x_true.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ProblemError::Parameters(format!("signal value {v} outside [0, 1]")));
    }
    let b_clean = matrix.matvec(x_true, &mut OpCounter::new())?;
    let b = if noise_level == 0.0 {
        b_clean.clone()
    } else {
        let scale = noise_level * b_clean.iter().sum::<f64>() / b_clean.len() as f64;
        let mut rng = SeededRng::new(seed);
        b_clean.iter().map(|c| c + scale * rng.uniform_in(-1.0, 1.0)).collect()
    };
    let b = floored(&b_clean, b)?;
    assemble(matrix, x_true.to_vec(), b_clean, b, seed)
}

/// Tomography of a [`synthetic_phantom`] with four rectangles.
pub fn tomography_instance(
    image_size: usize,
    n_angles: usize,
    noise_level: f64,
    seed: u64,
) -> Result<GroundTruthInstance, ProblemError> {
    let projector = parallel_beam_tomography(image_size, n_angles)?;
    let phantom = synthetic_phantom(image_size, image_size, 4, seed);
    synthesize_measurements(projector.matrix, &phantom, noise_level, seed)
}

/// Deblurring of a [`synthetic_phantom`] with four rectangles.
pub fn blur_instance(
    image_size: usize,
    mask: usize,
    sigma: f64,
    noise_level: f64,
    seed: u64,
) -> Result<GroundTruthInstance, ProblemError> {
    let blur = gaussian_blur_operator(image_size, image_size, mask, sigma)?;
    let phantom = synthetic_phantom(image_size, image_size, 4, seed);
    synthesize_measurements(blur, &phantom, noise_level, seed)
}

const MATRIX_FILE: &str = "matrix.txt";
const B_FILE: &str = "b.txt";
const X_TRUE_FILE: &str = "x_true.txt";
const B_CLEAN_FILE: &str = "b_clean.txt";
const NOISE_FILE: &str = "noise.txt";
const META_FILE: &str = "meta.txt";

fn io_error(path: &Path, e: std::io::Error) -> ProblemError {
    ProblemError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn format_error(path: &Path, message: impl Into<String>) -> ProblemError {
    ProblemError::Format { path: path.display().to_string(), message: message.into() }
}

/// Writes the instance into `dir` (created if missing): the matrix in
/// coordinate text, one file per vector and `meta.txt` with `key=value` lines.
pub fn write_instance(instance: &GroundTruthInstance, dir: &Path) -> Result<(), ProblemError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let p = &instance.problem;
    let meta = format!(
        "kind={}\nseed={}\nrows={}\ncols={}\nnnz={}\nlipschitz={}\n",
        p.kind().name(),
        instance.seed,
        p.matrix().rows(),
        p.matrix().cols(),
        p.matrix().nnz(),
        p.lipschitz()
    );
    let files = [
        (MATRIX_FILE, p.matrix().to_coordinate_text()),
        (B_FILE, format_vector(p.b())),
        (X_TRUE_FILE, format_vector(&instance.x_true)),
        (B_CLEAN_FILE, format_vector(&instance.b_clean)),
        (NOISE_FILE, format_vector(&instance.noise)),
        (META_FILE, meta),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        atomic_write(&path, text.as_bytes()).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, ProblemError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn read_vector(dir: &Path, name: &str) -> Result<Vec<f64>, ProblemError> {
    let path = dir.join(name);
    parse_vector(&read_text(&path)?).map_err(|m| format_error(&path, m))
}

/// Reads a directory written by [`write_instance`].
pub fn read_instance(dir: &Path) -> Result<GroundTruthInstance, ProblemError> {
    let matrix_path = dir.join(MATRIX_FILE);
    let matrix = NonnegativeSparseMatrix::from_coordinate_text(&read_text(&matrix_path)?)
        .map_err(|e| format_error(&matrix_path, e.to_string()))?;
    let meta_path = dir.join(META_FILE);
    let meta = parse_key_values(&read_text(&meta_path)?).map_err(|m| format_error(&meta_path, m))?;
    let lookup = |key: &str| meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let kind = lookup("kind")
        .and_then(ManifoldKind::from_name)
        .ok_or_else(|| format_error(&meta_path, "missing or unknown kind"))?;
    let seed = lookup("seed")
        .map(|s| s.parse::<u64>().map_err(|_| format_error(&meta_path, format!("bad seed {s:?}"))))
        .transpose()?
        .unwrap_or(0);
    let b = read_vector(dir, B_FILE)?;
    let x_true = read_vector(dir, X_TRUE_FILE)?;
    let b_clean = read_vector(dir, B_CLEAN_FILE)?;
    let noise = read_vector(dir, NOISE_FILE)?;
    if x_true.len() != matrix.cols() || b_clean.len() != matrix.rows() || noise.len() != matrix.rows() {
        return Err(format_error(dir, "vector lengths do not match the matrix"));
    }
    let problem = KlProblem::new(matrix, b, kind)?;
    Ok(GroundTruthInstance { problem, x_true, b_clean, noise, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_outputs() {
        let mut rng = SeededRng::new(1477776061723855037);
        assert_eq!(rng.next_u64(), 1985237415132408290);
        assert_eq!(rng.next_u64(), 2979275885539914483);
        assert_eq!(rng.next_u64(), 13511426838097143398);
    }

    #[test]
    fn uniform_uses_top_53_bits() {
        let mut a = SeededRng::new(9);
        let mut b = SeededRng::new(9);
        let u = a.uniform();
        assert_eq!(u, (b.next_u64() >> 11) as f64 / 9007199254740992.0);
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn below_stays_in_range_and_hits_every_value() {
        let mut rng = SeededRng::new(3);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[rng.below(7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
        assert_eq!(rng.below(1), 0);
    }

    #[test]
    fn distinct_draws_are_distinct() {
        let mut rng = SeededRng::new(11);
        let mut d = rng.distinct(50, 50);
        d.sort_unstable();
        assert_eq!(d, (0..50).collect::<Vec<_>>());
        let e = rng.distinct(10, 3);
        assert_eq!(e.len(), 3);
        assert!(e[0] != e[1] && e[1] != e[2] && e[0] != e[2]);
    }

    #[test]
    fn toy_instance() {
        let t = toy_problem();
        assert_eq!(t.problem.lipschitz(), 0.75);
        assert_eq!(t.problem.kind(), ManifoldKind::Box);
        let ax = t.problem.matrix().matvec(&t.x_true, &mut OpCounter::new()).unwrap();
        assert_eq!(ax, vec![1.0]);
        assert_eq!(t.problem.value_from_forward(&ax).unwrap(), 0.0);
    }

    #[test]
    fn expander_structure() {
        let inst = expander_instance(40, 200, 12, 20, 7).unwrap();
        let a = inst.problem.matrix();
        assert_eq!(a.rows(), 40);
        assert_eq!(a.cols(), 200);
        assert_eq!(a.one_norm(), 12.0);
        let mut per_col = vec![0usize; 200];
        for (_, c, v) in a.triplets() {
            assert_eq!(v, 1.0);
            per_col[c] += 1;
        }
        assert!(per_col.iter().all(|&k| k == 12));
        assert_eq!(inst.x_true.iter().filter(|&&v| v == 1.0).count(), 20);
        assert!(inst.x_true.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(inst.problem.b().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn expander_is_deterministic() {
        let a = expander_instance(40, 200, 12, 20, 42).unwrap();
        let b = expander_instance(40, 200, 12, 20, 42).unwrap();
        let c = expander_instance(40, 200, 12, 20, 43).unwrap();
        assert_eq!(a.problem.matrix(), b.problem.matrix());
        assert_eq!(a.problem.b(), b.problem.b());
        assert_eq!(a.x_true, b.x_true);
        assert_ne!(a.problem.matrix(), c.problem.matrix());
    }

    #[test]
    fn expander_floors_zero_measurements() {
        // a single nonzero signal entry reaches only 12 of the 40 rows
        let inst = expander_instance(40, 200, 12, 1, 5).unwrap();
        assert_eq!(inst.b_clean.iter().filter(|&&v| v == 0.0).count(), 28);
        let peak = inst.b_clean.iter().copied().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
        for (b, c) in inst.problem.b().iter().zip(&inst.b_clean) {
            if *c == 0.0 {
                assert_eq!(*b, 1e-6);
            } else {
                assert_eq!(b, c);
            }
        }
    }

    #[test]
    fn expander_rejects_bad_parameters() {
        assert!(expander_instance(10, 20, 11, 5, 0).is_err());
        assert!(expander_instance(10, 20, 3, 21, 0).is_err());
        assert!(expander_instance(10, 20, 0, 5, 0).is_err());
    }

    #[test]
    fn blur_with_unit_mask_is_identity() {
        let a = gaussian_blur_operator(5, 4, 1, 2.0).unwrap();
        assert_eq!(a, NonnegativeSparseMatrix::identity(20).unwrap());
    }

    #[test]
    fn blur_rows_sum_to_one_inside_and_less_at_border() {
        let (h, w, mask) = (12, 10, 5);
        let a = gaussian_blur_operator(h, w, mask, 1.5).unwrap();
        let sums = a.row_sums();
        for r in 0..h {
            for c in 0..w {
                let s = sums[r * w + c];
                let interior = r >= 2 && r + 2 < h && c >= 2 && c + 2 < w;
                if interior {
                    assert!((s - 1.0).abs() < 1e-14);
                } else {
                    assert!(s < 1.0);
                }
            }
        }
    }

    #[test]
    fn blur_preserves_constant_images_inside() {
        // dense reference convolution on an 8x8 image
        let (n, mask, sigma) = (8usize, 3usize, 0.8);
        let a = gaussian_blur_operator(n, n, mask, sigma).unwrap();
        let out = a.matvec(&vec![0.7; n * n], &mut OpCounter::new()).unwrap();
        let kernel: Vec<f64> = (-1i32..=1).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let norm: f64 = kernel.iter().sum::<f64>().powi(2);
        for r in 0..n as i32 {
            for c in 0..n as i32 {
                let mut acc = 0.0;
                for dr in -1i32..=1 {
                    for dc in -1i32..=1 {
                        let (rr, cc) = (r + dr, c + dc);
                        if rr >= 0 && cc >= 0 && rr < n as i32 && cc < n as i32 {
                            acc += kernel[(dr + 1) as usize] * kernel[(dc + 1) as usize] / norm * 0.7;
                        }
                    }
                }
                let got = out[(r as usize) * n + c as usize];
                assert!((got - acc).abs() < 1e-14);
                if r > 0 && c > 0 && r < n as i32 - 1 && c < n as i32 - 1 {
                    assert!((got - 0.7).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn blur_rejects_bad_parameters() {
        assert!(gaussian_blur_operator(8, 8, 4, 1.0).is_err());
        assert!(gaussian_blur_operator(8, 8, 9, 1.0).is_err());
        assert!(gaussian_blur_operator(8, 8, 3, 0.0).is_err());
    }

    #[test]
    fn axis_aligned_rays_cross_full_rows() {
        let n = 6;
        let p = parallel_beam_tomography(n, 2).unwrap();
        assert_eq!(p.matrix.rows(), 2 * n);
        assert_eq!(p.matrix.cols(), n * n);
        for (row, sum) in p.matrix.row_sums().into_iter().enumerate() {
            assert!((sum - n as f64).abs() < 1e-12, "row {row} sums to {sum}");
        }
        // horizontal ray of detector d crosses image row n - 1 - d
        let rows: Vec<_> = p.matrix.triplets().filter(|t| t.0 == 0).map(|t| t.1 / n).collect();
        assert!(rows.iter().all(|&r| r == n - 1));
    }

    #[test]
    fn diagonal_intersections_are_bounded() {
        let p = parallel_beam_tomography(8, 4).unwrap();
        for (_, _, v) in p.matrix.triplets() {
            assert!(v > 0.0 && v <= 2f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn clip_length_examples() {
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert!((clip_length([0.0, 0.0], [d, d], [0.0, 0.0], [1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(clip_length([0.0, 2.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]), 0.0);
        assert_eq!(clip_length([0.0, 0.5], [1.0, 0.0], [3.0, 0.0], [5.0, 1.0]), 2.0);
    }

    #[test]
    fn phantom_is_binary_and_seeded() {
        let a = synthetic_phantom(16, 16, 4, 1);
        assert!(a.iter().all(|v| [0.0, 1.0].contains(v)));
        assert!(a.contains(&1.0));
        assert_eq!(a, synthetic_phantom(16, 16, 4, 1));
    }

    #[test]
    fn measurements_without_noise_are_clean() {
        let a = NonnegativeSparseMatrix::from_dense(2, 2, &[1.0, 0.5, 0.0, 2.0]).unwrap();
        let inst = synthesize_measurements(a, &[0.5, 1.0], 0.0, 3).unwrap();
        assert_eq!(inst.problem.b(), &inst.b_clean[..]);
        assert_eq!(inst.b_clean, vec![1.0, 2.0]);
        assert!(inst.noise.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn noisy_measurements_are_positive_and_reproducible() {
        let proj = parallel_beam_tomography(8, 3).unwrap();
        let x = synthetic_phantom(8, 8, 2, 4);
        let a = synthesize_measurements(proj.matrix.clone(), &x, 2.0, 9).unwrap();
        let b = synthesize_measurements(proj.matrix, &x, 2.0, 9).unwrap();
        assert!(a.problem.b().iter().all(|&v| v > 0.0));
        assert_eq!(a.noise, b.noise);
        let mean = a.b_clean.iter().sum::<f64>() / a.b_clean.len() as f64;
        let floor = 1e-6 * a.b_clean.iter().copied().fold(0.0, f64::max);
        for ((bi, ci), ei) in a.problem.b().iter().zip(&a.b_clean).zip(&a.noise) {
            assert!((ci + ei - bi).abs() <= 1e-12 * bi.abs().max(1.0));
            if *bi != floor {
                assert!(ei.abs() <= 2.0 * mean + 1e-12);
            }
        }
    }

    #[test]
    fn measurements_reject_out_of_range_signal() {
        let a = NonnegativeSparseMatrix::identity(2).unwrap();
        assert!(synthesize_measurements(a.clone(), &[0.5, 1.5], 0.0, 0).is_err());
        assert!(synthesize_measurements(a, &[0.5, 0.5], -1.0, 0).is_err());
    }
}
