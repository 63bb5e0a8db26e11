//! Seeded fixture generators.

use rand::seq::SliceRandom;
use rand::Rng;

pub const WORDS: &[&str] = &[
    "pdf", "table", "extract", "invoice", "image", "resize", "chart", "plot", "csv", "markdown",
    "convert", "audit", "secure", "token", "scan", "report", "summary", "budget", "forecast",
    "genome", "protein", "sequence", "paper", "citation", "review", "test", "coverage", "deploy",
    "build", "docker", "cluster", "recipe", "travel", "calendar", "email", "draft", "translate",
    "audio", "video", "caption", "schema", "database", "query", "index", "search", "cache",
];

/// `n` words drawn with replacement from [`WORDS`].
pub fn phrase<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

/// A lowercase hyphenated name of `parts` words plus a numeric suffix.
pub fn name<R: Rng>(rng: &mut R, parts: usize) -> String {
    let mut words: Vec<&str> = (0..parts).map(|_| *WORDS.choose(rng).expect("non-empty")).collect();
    let suffix = rng.gen_range(0..100_000).to_string();
    words.push(&suffix);
    words.join("-")
}

/// Dependency edges `(dependent, prerequisite)` of a random DAG over nodes
/// `n0..n{size-1}`: an edge only goes from a higher to a lower index.
pub fn random_dag<R: Rng>(rng: &mut R, size: usize, density: f64) -> (Vec<String>, Vec<(String, String)>) {
    let nodes: Vec<String> = (0..size).map(|i| format!("n{i:02}")).collect();
    let mut edges = Vec::new();
    for i in 0..size {
        for j in 0..i {
            if rng.gen_bool(density) {
                edges.push((nodes[i].clone(), nodes[j].clone()));
            }
        }
    }
    // Present nodes in shuffled order so insertion order carries no hint.
    let mut shuffled = nodes;
    shuffled.shuffle(rng);
    (shuffled, edges)
}

/// Random undirected edges over `size` nodes.
pub fn random_edges<R: Rng>(rng: &mut R, size: usize, count: usize) -> Vec<(String, String)> {
    let mut edges = Vec::new();
    while edges.len() < count && size >= 2 {
        let a = rng.gen_range(0..size);
        let b = rng.gen_range(0..size);
        if a != b {
            edges.push((format!("s{a:02}"), format!("s{b:02}")));
        }
    }
    edges
}
