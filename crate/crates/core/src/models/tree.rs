use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Dataset;

/// Two split gains tie when they differ by at most this fraction of the
/// node's sum of squared deviations.
pub const GAIN_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 5,
            max_depth: None,
        }
    }
}

/// Flat tree node. Internal nodes send `x[feature] <= threshold` to `left`.
/// `value` and `n` are the mean target and row count reaching the node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: f64,
    pub n: u32,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// A chosen split: feature index, threshold and variance-reduction gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Threshold between consecutive distinct sorted values `a < b`. Falls back
/// to `a` when the midpoint rounds up to `b`, so `b` always goes right.
pub fn split_threshold(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn better(gain: f64, best: Option<&Split>, tol: f64) -> bool {
    match best {
        None => gain > tol,
        Some(b) => gain > b.gain + tol,
    }
}

/// Best variance-reduction split of `rows` over `features` (ascending).
/// Gain is `n_L * n_R / n * (mean_L - mean_R)^2`, computed on targets
/// centered at the node mean so rounding scales with the spread rather than
/// the magnitude. Ties (see [`GAIN_TIE`]) keep the lowest feature index, then
/// the lowest threshold.
pub fn best_split(
    ds: &Dataset,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    pairs: &mut Vec<(f64, f64)>,
) -> Option<Split> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let nf = n as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;
    let (total, sse) = rows.iter().fold((0.0, 0.0), |(t, s), &i| {
        let c = y[i] - mean;
        (t + c, s + c * c)
    });
    let tol = GAIN_TIE * sse;
    let mut best: Option<Split> = None;
    for &j in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (ds.get(i, j), y[i] - mean)));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut sl = 0.0;
        for k in 0..n - 1 {
            sl += pairs[k].1;
            let nl = k + 1;
            if nl < min_leaf {
                continue;
            }
            if n - nl < min_leaf {
                break;
            }
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let (nlf, nrf) = (nl as f64, (n - nl) as f64);
            let d = sl / nlf - (total - sl) / nrf;
            let gain = nlf * nrf / nf * d * d;
            if better(gain, best.as_ref(), tol) {
                best = Some(Split {
                    feature: j,
                    threshold: split_threshold(pairs[k].0, pairs[k + 1].0),
                    gain,
                });
            }
        }
    }
    best
}

/// Picks the candidate features at each node; `None` means all features.
pub(crate) struct FeatureSampler<'r, R: Rng> {
    pub rng: &'r mut R,
    pub mtry: usize,
}

struct Builder<'a, 'r, R: Rng> {
    ds: &'a Dataset,
    y: &'a [f64],
    params: TreeParams,
    sampler: Option<FeatureSampler<'r, R>>,
    nodes: Vec<Node>,
    pairs: Vec<(f64, f64)>,
    all: Vec<usize>,
}

impl<R: Rng> Builder<'_, '_, R> {
    fn candidates(&mut self) -> Vec<usize> {
        match &mut self.sampler {
            Some(s) if s.mtry < self.all.len() => {
                let mut f = rand::seq::index::sample(s.rng, self.all.len(), s.mtry).into_vec();
                f.sort_unstable();
                f
            }
            _ => self.all.clone(),
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let n = rows.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: mean,
            n: n as u32,
        });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(self.y[i]), hi.max(self.y[i])));
        if !depth_ok || lo == hi || n < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let feats = self.candidates();
        let Some(split) = best_split(self.ds, self.y, &rows, &feats, self.params.min_leaf, &mut self.pairs) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.ds.get(i, split.feature) <= split.threshold);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        let node = &mut self.nodes[id as usize];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        id
    }
}

pub(crate) fn grow<R: Rng>(
    ds: &Dataset,
    y: &[f64],
    rows: Vec<usize>,
    params: TreeParams,
    sampler: Option<FeatureSampler<'_, R>>,
) -> Tree {
    let mut b = Builder {
        ds,
        y,
        params,
        sampler,
        nodes: Vec::new(),
        pairs: Vec::with_capacity(rows.len()),
        all: (0..ds.n_features()).collect(),
    };
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}

fn check_rows(ds: &Dataset, min_leaf: usize) -> Result<()> {
    if min_leaf == 0 {
        return Err(Error::Parameter("min_leaf must be >= 1".into()));
    }
    if ds.n_rows() < 2 * min_leaf {
        return Err(Error::Data(format!(
            "tree needs at least {} rows (2 x min_leaf), got {}",
            2 * min_leaf,
            ds.n_rows()
        )));
    }
    Ok(())
}

/// Greedy CART regression tree on all rows and all features.
pub fn fit_tree(ds: &Dataset, params: TreeParams) -> Result<Tree> {
    check_rows(ds, params.min_leaf)?;
    Ok(grow::<rand_chacha::ChaCha8Rng>(ds, &ds.y, (0..ds.n_rows()).collect(), params, None))
}

/// Like [`fit_tree`] against an explicit target vector (boosting residuals).
pub(crate) fn fit_tree_to(ds: &Dataset, y: &[f64], params: TreeParams) -> Result<Tree> {
    check_rows(ds, params.min_leaf)?;
    Ok(grow::<rand_chacha::ChaCha8Rng>(ds, y, (0..ds.n_rows()).collect(), params, None))
}

impl Tree {
    #[inline]
    pub fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0usize;
        loop {
            let node = &self.nodes[k];
            match node.feature {
                None => return node.value,
                Some(f) => k = if x(f) <= node.threshold { node.left } else { node.right } as usize,
            }
        }
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_with(|j| row[j])
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            let n = &t.nodes[k];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Whether any split tests feature `j`.
    pub fn uses_feature(&self, j: usize) -> bool {
        self.nodes.iter().any(|n| n.feature == Some(j))
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::Validation("tree has no nodes".into()));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if let Some(f) = node.feature {
                let ok = f < n_features
                    && (node.left as usize) > k
                    && (node.right as usize) > k
                    && (node.left as usize) < n
                    && (node.right as usize) < n;
                if !ok {
                    return Err(Error::Validation(format!("tree node {k} is malformed")));
                }
            }
        }
        Ok(())
    }
}
