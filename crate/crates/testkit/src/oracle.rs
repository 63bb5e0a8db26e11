//! Brute-force reference implementations.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::unionfind::UnionFind;

/// Lowercase alphanumeric runs of at least two characters.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            if current.chars().count() >= 2 {
                out.push(current.to_lowercase());
            }
            current.clear();
        }
    }
    out
}

/// Okapi BM25 with the Lucene IDF `ln(1 + (N - df + 0.5) / (df + 0.5))`.
/// Corpus statistics come from all `docs`; each distinct query term counts
/// once. Returns one score per document.
pub fn bm25(docs: &[String], query: &str, k1: f64, b: f64) -> Vec<f64> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokens(d)).collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut seen = BTreeSet::new();
    let terms: Vec<String> = tokens(query).into_iter().filter(|t| seen.insert(t.clone())).collect();
    tokenized
        .iter()
        .map(|doc| {
            let dl = doc.len() as f64;
            terms
                .iter()
                .map(|term| {
                    let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
                    let tf = doc.iter().filter(|t| *t == term).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
                })
                .sum()
        })
        .collect()
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 14_695_981_039_346_656_037;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(1_099_511_628_211);
    }
    hash
}

/// Signed feature hashing: bucket `h mod dim`, sign negative when bit 32
/// of `h` is set, then L2 normalization.
pub fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in tokens(text) {
        let h = fnv1a(token.as_bytes());
        let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Sorts `(id, score)` by score descending, then id ascending, and keeps
/// the first `k`.
pub fn rank(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Mean absolute error of two ordinal vectors.
pub fn mae(a: &[u8], b: &[u8]) -> f64 {
    let total: f64 = a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).abs()).sum();
    total / a.len() as f64
}

/// Quadratic weighted kappa from an explicit `levels x levels` confusion
/// matrix: `1 - sum(W*O) / sum(W*E)` with `W[i][j] = (i-j)^2/(levels-1)^2`
/// and `E = outer(row marginals, column marginals) / n`. Returns 1.0 when
/// the expected weighted disagreement is zero.
pub fn qwk(a: &[u8], b: &[u8], levels: usize) -> f64 {
    let mut confusion = vec![vec![0u64; levels]; levels];
    for (x, y) in a.iter().zip(b) {
        confusion[*x as usize][*y as usize] += 1;
    }
    let n: u64 = confusion.iter().flatten().sum();
    let rows: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..levels).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
    let scale = ((levels - 1) * (levels - 1)) as f64;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / scale;
            numerator += w * confusion[i][j] as f64;
            denominator += w * (rows[i] * cols[j]) as f64 / n as f64;
        }
    }
    if denominator == 0.0 {
        1.0
    } else {
        1.0 - numerator / denominator
    }
}

/// Connected components (size >= 2) of the undirected graph given by
/// `edges`, members sorted and components ordered by their first member.
pub fn clusters(edges: &[(String, String)]) -> Vec<Vec<String>> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (a, b) in edges {
        let next = ids.len();
        ids.entry(a).or_insert(next);
        let next = ids.len();
        ids.entry(b).or_insert(next);
    }
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in edges {
        uf.union(ids[a.as_str()], ids[b.as_str()]);
    }
    let mut groups: HashMap<usize, Vec<String>> = HashMap::new();
    for (id, index) in &ids {
        groups.entry(uf.find(*index)).or_default().push(id.to_string());
    }
    let mut out: Vec<Vec<String>> = groups
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    out.sort();
    out
}

/// Every node reachable from `start` along `(from, to)` dependency edges,
/// including `start`.
pub fn reachable(start: &str, deps: &[(String, String)]) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([start.to_string()]);
    let mut stack = vec![start.to_string()];
    while let Some(node) = stack.pop() {
        for (from, to) in deps {
            if *from == node && seen.insert(to.clone()) {
                stack.push(to.clone());
            }
        }
    }
    seen
}

/// Checks an execution plan for `target` against dependency edges
/// `(dependent, prerequisite)`: it must list exactly the nodes reachable
/// from `target`, once each, end with `target`, and place every
/// prerequisite before its dependent.
pub fn check_plan(target: &str, plan: &[String], deps: &[(String, String)]) -> Result<(), String> {
    let expected = reachable(target, deps);
    let listed: BTreeSet<String> = plan.iter().cloned().collect();
    if listed.len() != plan.len() {
        return Err("plan lists a node twice".into());
    }
    if listed != expected {
        return Err(format!("plan covers {listed:?}, expected {expected:?}"));
    }
    if plan.last().map(String::as_str) != Some(target) {
        return Err("plan does not end with the target".into());
    }
    let position: HashMap<&str, usize> = plan.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    for (dependent, prerequisite) in deps {
        if let (Some(d), Some(p)) = (position.get(dependent.as_str()), position.get(prerequisite.as_str())) {
            if p >= d {
                return Err(format!("{prerequisite} is not before {dependent}"));
            }
        }
    }
    Ok(())
}
