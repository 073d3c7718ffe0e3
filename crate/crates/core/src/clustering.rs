//! Domain inference: mean word-vector sentence embeddings clustered with
//! k-means++ seeding, Lloyd iterations and best-of-N restarts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Sentence, TargetInstance, WordVectors};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { k: 5, restarts: 10, max_iter: 300, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub seed: u64,
}

/// Outcome of one restart, kept so the selection can be audited.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartLog {
    pub restart: usize,
    pub seed: u64,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every assignment step.
    pub inertia_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartResult {
    pub centroids: Vec<Vec<f64>>,
    pub log: RestartLog,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid; ties go to the lowest index.
    pub fn assign(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!("vector of dim {} for centroids of dim {}", v.len(), self.dim())));
        }
        Ok(nearest(&self.centroids, v).0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Mean of the vectors of all token forms, unknown forms mapping to the UNK vector.
pub fn sentence_embedding(sentence: &Sentence, vectors: &WordVectors) -> Result<Vec<f64>> {
    if sentence.tokens.is_empty() {
        return Err(Error::Domain("empty sentence has no embedding".into()));
    }
    let mut acc = vec![0.0; vectors.dim()];
    for tok in &sentence.tokens {
        for (a, x) in acc.iter_mut().zip(vectors.get_or_unk(&tok.form)) {
            *a += x;
        }
    }
    let n = sentence.tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

pub fn corpus_embeddings(corpus: &Corpus, vectors: &WordVectors) -> Result<Vec<Vec<f64>>> {
    corpus.sentences.iter().map(|s| sentence_embedding(s, vectors)).collect()
}

/// Sub-seed for restart `r`, independent of execution order.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    let mut z = seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let dim = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points have differing dimensions".into()));
    }
    if points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numeric("non-finite point".into()));
    }
    let mut keys: Vec<Vec<u64>> = points.iter().map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.len() < k {
        return Err(Error::Config(format!("{} distinct points for k = {k}", keys.len())));
    }
    Ok(dim)
}

fn kmeans_pp<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
        }
        let c = points[pick.expect("distinct points remain")].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(centroids, p);
            inertia += d;
            i
        })
        .collect();
    (labels, inertia)
}

/// Cluster means; an empty cluster is re-seeded at the point farthest from
/// its assigned centroid.
fn update_centroids(points: &[Vec<f64>], labels: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = old.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut used = vec![false; points.len()];
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            sums[c].iter_mut().for_each(|s| *s /= n);
        } else {
            let far = (0..points.len())
                .filter(|&i| !used[i])
                .map(|i| (i, sq_dist(&points[i], &old[labels[i]])))
                .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                .0;
            used[far] = true;
            sums[c] = points[far].clone();
        }
    }
    sums
}

/// One restart: k-means++ seeding, then Lloyd iterations until the
/// assignment is a fixpoint or `max_iter` updates have run.
pub fn kmeans_restart(points: &[Vec<f64>], k: usize, max_iter: usize, restart: usize, seed: u64) -> Result<RestartResult> {
    check_points(points, k)?;
    let sub = restart_seed(seed, restart);
    let mut rng = ChaCha8Rng::seed_from_u64(sub);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let (mut labels, mut inertia) = assign_all(points, &centroids);
    let mut trace = vec![inertia];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        centroids = update_centroids(points, &labels, &centroids);
        let (next, next_inertia) = assign_all(points, &centroids);
        trace.push(next_inertia);
        inertia = next_inertia;
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    Ok(RestartResult {
        centroids,
        log: RestartLog { restart, seed: sub, inertia, iterations, converged, inertia_trace: trace },
    })
}

/// Index of the minimal-inertia restart; the earliest wins ties.
pub fn select_restart(results: &[RestartResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if best.is_none_or(|b| r.log.inertia < results[b].log.inertia) {
            best = Some(i);
        }
    }
    best
}

/// Best of `config.restarts` restarts, with every restart's log.
pub fn kmeans_fit(points: &[Vec<f64>], config: &KMeansConfig) -> Result<(ClusterModel, Vec<RestartLog>)> {
    if config.restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let results = (0..config.restarts)
        .map(|r| kmeans_restart(points, config.k, config.max_iter, r, config.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(model_from_restarts(results, config.seed))
}

pub fn model_from_restarts(mut results: Vec<RestartResult>, seed: u64) -> (ClusterModel, Vec<RestartLog>) {
    let best = select_restart(&results).expect("at least one restart");
    let logs = results.iter().map(|r| r.log.clone()).collect();
    let chosen = results.swap_remove(best);
    (ClusterModel { centroids: chosen.centroids, inertia: chosen.log.inertia, seed }, logs)
}

/// Cluster index per sentence; fills `domain_label` on every instance.
pub fn label_corpus(
    corpus: &Corpus,
    instances: &mut [TargetInstance],
    model: &ClusterModel,
    vectors: &WordVectors,
) -> Result<Vec<usize>> {
    let labels = corpus
        .sentences
        .iter()
        .map(|s| model.assign(&sentence_embedding(s, vectors)?))
        .collect::<Result<Vec<_>>>()?;
    for inst in instances.iter_mut() {
        let l = *labels.get(inst.sentence).ok_or(Error::Index { index: inst.sentence, len: labels.len() })?;
        inst.domain_label = Some(l);
    }
    Ok(labels)
}
