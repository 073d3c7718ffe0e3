//! Cluster-model and assignment files.
//!
//! Model file: a header line `kmeans <K> <D> <SEED> <INERTIA>`, then K lines
//! of D space-separated values.

use std::fmt::Write as _;

use advframe_core::clustering::ClusterModel;

use crate::error::{Error, Result};

pub fn serialize_cluster_model(m: &ClusterModel) -> String {
    let mut out = format!("kmeans {} {} {} {:e}\n", m.k(), m.dim(), m.seed, m.inertia);
    for c in &m.centroids {
        let row: Vec<String> = c.iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_cluster_model(text: &str) -> Result<ClusterModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty cluster model"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let ["kmeans", k, d, seed, inertia] = h[..] else {
        return Err(Error::parse(1, "expected `kmeans <K> <D> <SEED> <INERTIA>`"));
    };
    let bad = |what: &str| Error::parse(1, format!("bad {what}"));
    let k: usize = k.parse().map_err(|_| bad("K"))?;
    let d: usize = d.parse().map_err(|_| bad("dimension"))?;
    let seed: u64 = seed.parse().map_err(|_| bad("seed"))?;
    let inertia: f64 = inertia.parse().map_err(|_| bad("inertia"))?;
    let mut centroids = Vec::with_capacity(k);
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| Error::parse(i + 1, format!("bad number `{x}`"))))
            .collect::<Result<_>>()?;
        if row.len() != d || row.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(i + 1, format!("centroid must have {d} finite values")));
        }
        centroids.push(row);
    }
    if centroids.len() != k || k == 0 {
        return Err(Error::parse(1, format!("header declares {k} centroids, found {}", centroids.len())));
    }
    Ok(ClusterModel { centroids, inertia, seed })
}

/// `sentence_id<TAB>cluster`, sentence ids 1-based in corpus order.
pub fn serialize_assignments(labels: &[usize]) -> String {
    labels.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", i + 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = ClusterModel { centroids: vec![vec![0.1, -2.5], vec![1e-17, 3.0]], inertia: 12.75, seed: 42 };
        assert_eq!(parse_cluster_model(&serialize_cluster_model(&m)).unwrap(), m);
        assert!(parse_cluster_model("kmeans 2 2 0 1.0\n0 0\n").is_err());
        assert_eq!(serialize_assignments(&[1, 0]), "1\t1\n2\t0\n");
    }
}
