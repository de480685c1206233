//! Shared generators and independent oracles for the integration suite.
//!
//! Everything here recomputes expected values through a different route
//! than the library: Shapley values by averaging marginal contributions
//! over explicit permutations, gradients by central finite differences,
//! and metrics by naive loops over features or image tiles. Agreement
//! between the two routes is what the tests assert.
#![allow(dead_code)]

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use attriq::model::{
    Aggregation, DecisionTree, Layer, LinearModel, Model, SequentialNet, TreeEnsemble, TreeNode,
};
use attriq::tensor::Tensor;

// ---------------------------------------------------------------------------
// random inputs and models
// ---------------------------------------------------------------------------

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_linear(rng: &mut ChaCha8Rng, n_features: usize, n_classes: usize, softmax: bool) -> Model {
    let weights = (0..n_classes)
        .map(|_| random_vec(rng, n_features, -2.0, 2.0))
        .collect();
    let bias = random_vec(rng, n_classes, -1.0, 1.0);
    Model::Linear(LinearModel::new(weights, bias, softmax).unwrap())
}

fn grow_tree(
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
    depth: usize,
    n_features: usize,
    n_classes: usize,
) -> usize {
    if depth == 0 || rng.random_range(0..4) == 0 {
        nodes.push(TreeNode::Leaf {
            values: random_vec(rng, n_classes, -1.0, 1.0),
        });
        return nodes.len() - 1;
    }
    let slot = nodes.len();
    nodes.push(TreeNode::Leaf { values: Vec::new() });
    let feature = rng.random_range(0..n_features);
    let threshold = rng.random_range(-0.8..0.8);
    let left = grow_tree(rng, nodes, depth - 1, n_features, n_classes);
    let right = grow_tree(rng, nodes, depth - 1, n_features, n_classes);
    nodes[slot] = TreeNode::Internal {
        feature,
        threshold,
        left,
        right,
    };
    slot
}

/// A small ensemble over inputs in [-1, 1]; 1-3 trees of depth <= 3.
pub fn random_tree_model(rng: &mut ChaCha8Rng, n_features: usize, n_classes: usize) -> Model {
    let n_trees = rng.random_range(1..=3);
    let trees = (0..n_trees)
        .map(|_| {
            let mut nodes = Vec::new();
            grow_tree(rng, &mut nodes, 3, n_features, n_classes);
            DecisionTree { nodes }
        })
        .collect();
    let aggregation = if rng.random_range(0..2) == 0 {
        Aggregation::Sum
    } else {
        Aggregation::Mean
    };
    Model::Tree(TreeEnsemble::new(trees, aggregation, n_features, n_classes).unwrap())
}

fn dense_layer(rng: &mut ChaCha8Rng, n_out: usize, n_in: usize) -> Layer {
    Layer::Dense {
        weights: Tensor::new(vec![n_out, n_in], random_vec(rng, n_out * n_in, -1.0, 1.0)).unwrap(),
        bias: random_vec(rng, n_out, -0.5, 0.5),
    }
}

/// dense -> relu -> dense (-> softmax): the smallest net with a kink.
pub fn random_mlp(
    rng: &mut ChaCha8Rng,
    n_in: usize,
    hidden: usize,
    n_classes: usize,
    softmax: bool,
) -> Model {
    let mut layers = vec![dense_layer(rng, hidden, n_in), Layer::Relu, dense_layer(rng, n_classes, hidden)];
    if softmax {
        layers.push(Layer::Softmax);
    }
    Model::Sequential(SequentialNet::new(vec![n_in], layers).unwrap())
}

/// conv -> relu -> maxpool -> flatten -> dense -> softmax over [c, h, w].
pub fn random_conv_net(
    rng: &mut ChaCha8Rng,
    in_c: usize,
    h: usize,
    w: usize,
    n_classes: usize,
) -> Model {
    let out_c = 2;
    let kernels = Tensor::new(
        vec![out_c, in_c, 3, 3],
        random_vec(rng, out_c * in_c * 9, -0.7, 0.7),
    )
    .unwrap();
    let flat = out_c * (h / 2) * (w / 2);
    let layers = vec![
        Layer::Conv2d {
            kernels,
            bias: random_vec(rng, out_c, -0.2, 0.2),
            stride: (1, 1),
            padding: (1, 1),
        },
        Layer::Relu,
        Layer::MaxPool {
            kernel: (2, 2),
            stride: (2, 2),
        },
        Layer::Flatten,
        dense_layer(rng, n_classes, flat),
        Layer::Softmax,
    ];
    Model::Sequential(SequentialNet::new(vec![in_c, h, w], layers).unwrap())
}

pub fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::new(vec![c, h, w], random_vec(rng, c * h * w, 0.0, 1.0)).unwrap()
}

// ---------------------------------------------------------------------------
// Shapley value oracle: explicit permutation averaging
// ---------------------------------------------------------------------------

/// v(S) for every coalition bitmask: the mean model score over background
/// samples with features in S taken from x and the rest from the sample.
pub fn coalition_values(model: &Model, x: &[f64], class: usize, background: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(1 << n);
    let mut probe = vec![0.0; n];
    for mask in 0..(1usize << n) {
        let mut acc = 0.0;
        for sample in background {
            for i in 0..n {
                probe[i] = if mask >> i & 1 == 1 { x[i] } else { sample[i] };
            }
            acc += model.target_score_slice(&probe, class).unwrap();
        }
        out.push(acc / background.len() as f64);
    }
    out
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Average marginal contribution of each feature over all n! orderings.
pub fn permutation_shapley(model: &Model, x: &[f64], class: usize, background: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let v = coalition_values(model, x, class, background);
    let mut phi = vec![0.0; n];
    let mut n_perms = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    permute(&mut order, 0, &mut |perm| {
        let mut mask = 0usize;
        for &feat in perm {
            let with = mask | (1 << feat);
            phi[feat] += v[with] - v[mask];
            mask = with;
        }
        n_perms += 1;
    });
    for p in &mut phi {
        *p /= n_perms as f64;
    }
    phi
}

// ---------------------------------------------------------------------------
// gradient oracle: central finite differences
// ---------------------------------------------------------------------------

pub fn fd_gradient_slice(model: &Model, x: &[f64], class: usize, step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += step;
            lo[i] -= step;
            (model.target_score_slice(&hi, class).unwrap()
                - model.target_score_slice(&lo, class).unwrap())
                / (2.0 * step)
        })
        .collect()
}

pub fn fd_gradient_tensor(model: &Model, x: &Tensor, class: usize, step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi.data_mut()[i] += step;
            lo.data_mut()[i] -= step;
            (model.target_score(&hi, class).unwrap() - model.target_score(&lo, class).unwrap())
                / (2.0 * step)
        })
        .collect()
}

/// Distance from the nearest relu sign flip or maxpool tie along the
/// forward trace; infinite for models without kinks. Points with a small
/// margin sit next to a nondifferentiability and are excluded from
/// finite-difference comparisons.
pub fn activation_margin(model: &Model, x: &Tensor) -> f64 {
    let net = match model {
        Model::Sequential(_) => model.as_sequential().unwrap(),
        _ => return f64::INFINITY,
    };
    let trace = net.activations(x).unwrap();
    let mut margin = f64::INFINITY;
    for (idx, layer) in net.layers().iter().enumerate() {
        let input = &trace[idx];
        match layer {
            Layer::Relu => {
                for &v in input.data() {
                    margin = margin.min(v.abs());
                }
            }
            Layer::MaxPool { kernel, stride } => {
                let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
                let (kh, kw) = *kernel;
                let (sh, sw) = *stride;
                for ch in 0..c {
                    let mut r = 0;
                    while r + kh <= h {
                        let mut col = 0;
                        while col + kw <= w {
                            let mut best = f64::NEG_INFINITY;
                            let mut second = f64::NEG_INFINITY;
                            for i in r..r + kh {
                                for j in col..col + kw {
                                    let v = input.at3(ch, i, j);
                                    if v > best {
                                        second = best;
                                        best = v;
                                    } else if v > second {
                                        second = v;
                                    }
                                }
                            }
                            // A tie at exactly 0.0 is a relu-clamped flat
                            // region, not a kink: the relu margin already
                            // guarantees those zeros stay zero nearby.
                            if second.is_finite() && !(best == 0.0 && second == 0.0) {
                                margin = margin.min(best - second);
                            }
                            col += sw;
                        }
                        r += sh;
                    }
                }
            }
            _ => {}
        }
    }
    margin
}

// ---------------------------------------------------------------------------
// tabular metric reference loops
// ---------------------------------------------------------------------------

/// Two-pass Pearson correlation, written independently of the library's
/// single-pass accumulation.
pub fn ref_pearson(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let su: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
    let sv: f64 = v.iter().map(|x| (x - mv) * (x - mv)).sum();
    if su <= 0.0 || sv <= 0.0 {
        return f64::NAN;
    }
    let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    cov / (su.sqrt() * sv.sqrt())
}

/// Top-k by repeated max scan instead of a sort.
pub fn ref_top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut taken = vec![false; values.len()];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(values.len()) {
        let mut best: Option<usize> = None;
        for (i, v) in values.iter().enumerate() {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if v.abs() > values[b].abs() => Some(i),
                Some(b) => Some(b),
            };
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

pub fn ref_faithfulness(model: &Model, x: &[f64], attr: &[f64], class: usize, baseline: &[f64]) -> f64 {
    let fx = model.target_score_slice(x, class).unwrap();
    let mut deltas = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut probe = x.to_vec();
        probe[i] = baseline[i];
        deltas.push((fx - model.target_score_slice(&probe, class).unwrap()).abs());
    }
    let abs_a: Vec<f64> = attr.iter().map(|a| a.abs()).collect();
    ref_pearson(&abs_a, &deltas)
}

/// Mirrors the documented noise contract (one standard normal per feature
/// per draw, scaled by sigma * std) but recomputes the residual naively.
pub fn ref_infidelity(
    model: &Model,
    x: &[f64],
    attr: &[f64],
    class: usize,
    sigma: f64,
    stds: &[f64],
    seed: u64,
    n_draws: usize,
) -> f64 {
    let fx = model.target_score_slice(x, class).unwrap();
    let mut rng = attriq::seed::rng_from(seed);
    let mut total = 0.0;
    for _ in 0..n_draws {
        let disp: Vec<f64> = (0..x.len())
            .map(|i| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let scale = if stds[i] == 0.0 { 1.0 } else { stds[i] };
                eps * sigma * scale
            })
            .collect();
        let moved: Vec<f64> = x.iter().zip(&disp).map(|(v, d)| v - d).collect();
        let predicted: f64 = disp.iter().zip(attr).map(|(d, a)| d * a).sum();
        let actual = fx - model.target_score_slice(&moved, class).unwrap();
        total += (predicted - actual).powi(2);
    }
    total / n_draws as f64
}

pub fn ref_comprehensiveness(
    model: &Model,
    x: &[f64],
    attr: &[f64],
    class: usize,
    k: usize,
    baseline: &[f64],
) -> f64 {
    let mut masked = x.to_vec();
    for i in ref_top_k(attr, k) {
        masked[i] = baseline[i];
    }
    model.target_score_slice(x, class).unwrap() - model.target_score_slice(&masked, class).unwrap()
}

pub fn ref_sufficiency(
    model: &Model,
    x: &[f64],
    attr: &[f64],
    class: usize,
    k: usize,
    baseline: &[f64],
) -> f64 {
    let mut focused = baseline.to_vec();
    for i in ref_top_k(attr, k) {
        focused[i] = x[i];
    }
    model.target_score_slice(x, class).unwrap() - model.target_score_slice(&focused, class).unwrap()
}

pub fn ref_monotonicity(attr: &[f64]) -> f64 {
    if attr.len() < 2 {
        return f64::NAN;
    }
    let sign = |v: f64| {
        if v > 0.0 {
            1i8
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut agree = 0usize;
    for i in 0..attr.len() - 1 {
        if sign(attr[i]) == sign(attr[i + 1]) {
            agree += 1;
        }
    }
    agree as f64 / (attr.len() - 1) as f64
}

pub fn ref_complexity(attr: &[f64], tol: f64) -> f64 {
    attr.iter().filter(|a| a.abs() > tol).count() as f64
}

// ---------------------------------------------------------------------------
// image metric reference loops (deterministic perturbations only)
// ---------------------------------------------------------------------------

/// Tiling rectangles (r, c, h, w) in row-major order, edges clipped.
pub fn ref_tiles(h: usize, w: usize, ph: usize, pw: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut r = 0;
    while r < h {
        let mut c = 0;
        while c < w {
            out.push((r, c, ph.min(h - r), pw.min(w - c)));
            c += pw;
        }
        r += ph;
    }
    out
}

fn ref_patched_score(
    model: &Model,
    x: &Tensor,
    class: usize,
    rect: (usize, usize, usize, usize),
    use_mean: bool,
) -> f64 {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut fill = vec![0.0; c];
    if use_mean {
        for ch in 0..c {
            let mut acc = 0.0;
            for i in 0..h {
                for j in 0..w {
                    acc += x.at3(ch, i, j);
                }
            }
            fill[ch] = acc / (h * w) as f64;
        }
    }
    let mut patched = x.clone();
    let (r0, c0, rh, rw) = rect;
    for ch in 0..c {
        for i in r0..r0 + rh {
            for j in c0..c0 + rw {
                patched.data_mut()[ch * h * w + i * w + j] = fill[ch];
            }
        }
    }
    model.target_score(&patched, class).unwrap()
}

pub fn ref_region_deltas(
    model: &Model,
    x: &Tensor,
    class: usize,
    tiles: &[(usize, usize, usize, usize)],
    use_mean: bool,
) -> Vec<f64> {
    let fx = model.target_score(x, class).unwrap();
    tiles
        .iter()
        .map(|&rect| (fx - ref_patched_score(model, x, class, rect, use_mean)).abs())
        .collect()
}

pub fn ref_region_sums(map: &Tensor, tiles: &[(usize, usize, usize, usize)]) -> Vec<f64> {
    tiles
        .iter()
        .map(|&(r0, c0, rh, rw)| {
            let mut acc = 0.0;
            for i in r0..r0 + rh {
                for j in c0..c0 + rw {
                    acc += map.at2(i, j);
                }
            }
            acc
        })
        .collect()
}

pub fn ref_faithfulness_correlation(deltas: &[f64], sums: &[f64]) -> f64 {
    let total: f64 = sums.iter().map(|a| a.abs()).sum();
    if total == 0.0 {
        return f64::NAN;
    }
    deltas
        .iter()
        .zip(sums)
        .map(|(d, a)| d * a.abs())
        .sum::<f64>()
        / total
}

pub fn ref_smooth_mprt(deltas: &[f64], sums: &[f64]) -> f64 {
    deltas
        .iter()
        .zip(sums)
        .map(|(d, a)| d / (1.0 + a.abs()))
        .sum::<f64>()
        / deltas.len() as f64
}

pub fn ref_faithfulness_estimate(deltas_black: &[f64], sums: &[f64]) -> f64 {
    deltas_black
        .iter()
        .zip(sums)
        .map(|(d, a)| d * a.abs())
        .sum::<f64>()
        / deltas_black.len() as f64
}

// ---------------------------------------------------------------------------
// misc
// ---------------------------------------------------------------------------

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

pub fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
