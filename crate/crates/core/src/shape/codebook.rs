use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::context::{ANGULAR_BINS, RADIAL_BINS, RADIUS_INNER, RADIUS_OUTER};
use crate::error::{Error, Result};
use crate::format::{self, Header};

const MAGIC: &str = "dualsketch-codebook";
const VERSION: u32 = 1;

/// `M` cluster centers in descriptor space, stored row-major (one center per row).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    centers: Vec<f64>,
}

impl Codebook {
    pub fn from_centers(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers.first().map(Vec::len).ok_or(Error::Empty("codebook"))?;
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::shape("codebook centers differ in dimension"));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite codebook center".into()));
        }
        Ok(Codebook { dim, centers: centers.concat() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    /// SHA-256 of the center payload, used to tie a model to its codebook.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for v in &self.centers {
            h.update((*v as f32).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-iteration record of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeansTrace {
    /// Inertia after each assignment step.
    pub inertia: Vec<f64>,
    /// Final assignment; every center is the mean of its assigned points.
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub seeds: Vec<usize>,
}

/// k-means++ seeding: indices of `m` distinct points, each drawn with
/// probability proportional to its squared distance from the chosen set.
pub fn kmeans_pp_seeds(data: &[Vec<f64>], m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if data.len() < m {
        return Err(Error::Insufficient { what: "descriptors for the codebook", needed: m, got: data.len() });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut seeds = vec![rng.gen_range(0..data.len())];
    let mut d2: Vec<f64> = data.iter().map(|x| squared_distance(x, &data[seeds[0]])).collect();
    while seeds.len() < m {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::Insufficient { what: "distinct descriptors for the codebook", needed: m, got: seeds.len() });
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < w {
                break;
            }
            target -= w;
        }
        let next = pick.expect("positive total weight has a positive entry");
        seeds.push(next);
        for (x, d) in data.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(x, &data[next]));
        }
    }
    Ok(seeds)
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn cluster_mean(data: &[Vec<f64>], assign: &[usize], cluster: usize, dim: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for (x, _) in data.iter().zip(assign).filter(|(_, &a)| a == cluster) {
        for (s, v) in sum.iter_mut().zip(x) {
            *s += v;
        }
        count += 1;
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

pub fn build_codebook(descriptors: &[Vec<f64>], m: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    build_codebook_traced(descriptors, m, max_iters, seed).map(|(cb, _)| cb)
}

/// Lloyd's k-means from k-means++ seeds. Stops when an assignment step changes
/// nothing or after `max_iters` updates. A cluster that empties is re-seeded
/// with the point farthest from its center (taken from a cluster with at
/// least two members).
pub fn build_codebook_traced(descriptors: &[Vec<f64>], m: usize, max_iters: usize, seed: u64) -> Result<(Codebook, KMeansTrace)> {
    if m == 0 {
        return Err(Error::Config("codebook size must be positive".into()));
    }
    let dim = descriptors.first().map(Vec::len).unwrap_or(0);
    if descriptors.iter().any(|d| d.len() != dim) {
        return Err(Error::shape("descriptors differ in dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_pp_seeds(descriptors, m, &mut rng)?;
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| descriptors[i].clone()).collect();

    let mut assign: Vec<usize> = Vec::new();
    let mut inertia = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut next = Vec::with_capacity(descriptors.len());
        let mut cost = 0.0;
        for x in descriptors {
            let (j, d) = nearest(x, &centers);
            next.push(j);
            cost += d;
        }
        inertia.push(cost);
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
        if iterations == max_iters {
            // keep centers consistent with the final assignment
            update_centers(descriptors, &mut assign, &mut centers, dim);
            break;
        }
        update_centers(descriptors, &mut assign, &mut centers, dim);
        iterations += 1;
    }

    let codebook = Codebook::from_centers(centers)?;
    Ok((codebook, KMeansTrace { inertia, assignments: assign, iterations, converged, seeds }))
}

fn update_centers(data: &[Vec<f64>], assign: &mut [usize], centers: &mut [Vec<f64>], dim: usize) {
    let m = centers.len();
    let mut counts = vec![0usize; m];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    for j in 0..m {
        if let Some(mean) = cluster_mean(data, assign, j, dim) {
            centers[j] = mean;
        }
    }
    for j in 0..m {
        if counts[j] > 0 {
            continue;
        }
        let far = (0..data.len()).filter(|&i| counts[assign[i]] > 1).max_by(|&a, &b| {
            squared_distance(&data[a], &centers[assign[a]]).total_cmp(&squared_distance(&data[b], &centers[assign[b]])).then(b.cmp(&a))
        });
        let Some(i) = far else { continue };
        let donor = assign[i];
        assign[i] = j;
        counts[donor] -= 1;
        counts[j] = 1;
        centers[j] = data[i].clone();
        centers[donor] = cluster_mean(data, assign, donor, dim).expect("donor keeps a member");
    }
}

pub fn write_codebook<W: Write>(w: &mut W, codebook: &Codebook, seed: u64) -> Result<()> {
    let mut h = Header::new(MAGIC, VERSION);
    h.push("d", codebook.dim());
    h.push("m", codebook.len());
    h.push("seed", seed);
    h.push("bins", format!("radial={RADIAL_BINS} angular={ANGULAR_BINS} r_inner={RADIUS_INNER} r_outer={RADIUS_OUTER}"));
    h.write_to(w)?;
    format::write_f32_payload(w, codebook.centers.iter().copied())
}

/// Returns the codebook and the seed recorded in its header.
pub fn read_codebook<R: BufRead>(r: &mut R) -> Result<(Codebook, u64)> {
    let h = Header::read_from(r, MAGIC, VERSION)?;
    let d = h.parse_usize("d")?;
    let m = h.parse_usize("m")?;
    let seed = h.parse_u64("seed")?;
    if d == 0 || m == 0 {
        return Err(Error::format("codebook with zero size"));
    }
    let data = format::read_f32_payload(r, d * m)?;
    format::expect_eof(r)?;
    Ok((Codebook { dim: d, centers: data }, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [(0.0, 0.0), (5.0, 5.0), (-4.0, 6.0)];
        (0..n)
            .map(|i| {
                let (cx, cy) = centers[i % 3];
                vec![cx + rng.gen_range(-1.5..1.5), cy + rng.gen_range(-1.5..1.5)]
            })
            .collect()
    }

    #[test]
    fn sample_size_equal_to_m_returns_the_points() {
        let data = blobs(7, 1);
        let cb = build_codebook(&data, 7, 50, 9).unwrap();
        let mut got: Vec<Vec<f64>> = cb.centers().map(<[f64]>::to_vec).collect();
        let mut want = data.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn too_few_descriptors() {
        assert!(matches!(build_codebook(&blobs(3, 1), 4, 10, 0), Err(Error::Insufficient { .. })));
        let dup = vec![vec![1.0, 1.0]; 5];
        assert!(build_codebook(&dup, 2, 10, 0).is_err());
    }

    #[test]
    fn inertia_is_monotone_and_centers_are_means() {
        for seed in 0..10 {
            let data = blobs(200, seed);
            let (cb, trace) = build_codebook_traced(&data, 8, 100, seed).unwrap();
            for w in trace.inertia.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", trace.inertia);
            }
            for j in 0..cb.len() {
                let mean = cluster_mean(&data, &trace.assignments, j, 2).unwrap();
                for (a, b) in mean.iter().zip(cb.center(j)) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn iteration_cap_still_leaves_means() {
        let data = blobs(300, 4);
        let (cb, trace) = build_codebook_traced(&data, 12, 1, 4).unwrap();
        assert!(trace.iterations <= 1);
        for j in 0..cb.len() {
            let mean = cluster_mean(&data, &trace.assignments, j, 2).unwrap();
            assert!(mean.iter().zip(cb.center(j)).all(|(a, b)| (a - b).abs() <= 1e-9));
        }
    }

    #[test]
    fn matches_plain_lloyd_from_the_same_seeds() {
        let data = blobs(40, 17);
        let (cb, trace) = build_codebook_traced(&data, 3, 100, 5).unwrap();
        // oracle: textbook Lloyd iterations from the same seed points
        let mut centers: Vec<Vec<f64>> = trace.seeds.iter().map(|&i| data[i].clone()).collect();
        let mut labels = vec![usize::MAX; data.len()];
        loop {
            let new: Vec<usize> = data
                .iter()
                .map(|x| {
                    let d: Vec<f64> = centers.iter().map(|c| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).collect();
                    (0..3).fold(0, |b, j| if d[j] < d[b] { j } else { b })
                })
                .collect();
            if new == labels {
                break;
            }
            labels = new;
            for (j, c) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = data.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(x, _)| x).collect();
                let n = members.len() as f64;
                *c = vec![members.iter().map(|x| x[0]).sum::<f64>() / n, members.iter().map(|x| x[1]).sum::<f64>() / n];
            }
        }
        let oracle: f64 = data.iter().zip(&labels).map(|(x, &l)| (x[0] - centers[l][0]).powi(2) + (x[1] - centers[l][1]).powi(2)).sum();
        let ours = *trace.inertia.last().unwrap();
        assert!((ours - oracle).abs() <= 1e-9, "{ours} vs {oracle}");
        assert_eq!(cb.len(), 3);
    }

    #[test]
    fn file_roundtrip() {
        let cb = Codebook::from_centers(vec![vec![0.5, 1.0, -2.0], vec![3.0, 0.0, 0.25]]).unwrap();
        let mut buf = Vec::new();
        write_codebook(&mut buf, &cb, 42).unwrap();
        let text_end = buf.windows(13).position(|w| w == b"payload f32le").unwrap() + 14;
        assert_eq!(buf.len() - text_end, 6 * 4);
        let (back, seed) = read_codebook(&mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(back, cb);
        assert_eq!(back.fingerprint(), cb.fingerprint());
    }
}
