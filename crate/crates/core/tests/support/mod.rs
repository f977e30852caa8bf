//! Independent reference implementations shared by the integration and
//! acceptance suites.
#![allow(dead_code)]

use nuisance_core::inference::{InputDims, Layer, LayerKind, NetworkSpec, Posterior};
use nuisance_core::{BBox, Image};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Tensor = Vec<Vec<Vec<f64>>>;

/// Unit-pixel counting on an integer grid.
pub fn pixel_iou(a: (i32, i32, i32, i32), b: (i32, i32, i32, i32)) -> f64 {
    let inside = |r: (i32, i32, i32, i32), x: i32, y: i32| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
    let (mut inter, mut union) = (0u32, 0u32);
    for y in 0..32 {
        for x in 0..32 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u32;
            union += (ia || ib) as u32;
        }
    }
    inter as f64 / union as f64
}

pub fn random_int_box(rng: &mut ChaCha8Rng) -> (i32, i32, i32, i32) {
    let x0 = rng.random_range(0..31);
    let y0 = rng.random_range(0..31);
    (x0, y0, rng.random_range(x0 + 1..=32), rng.random_range(y0 + 1..=32))
}

pub fn to_box(r: (i32, i32, i32, i32)) -> BBox {
    BBox::new(r.0 as f64, r.1 as f64, r.2 as f64, r.3 as f64).unwrap()
}

/// Per-output-pixel bilinear sample, align-corners-false, clamp-to-edge.
pub fn bilinear_oracle(px: &[f64], w: usize, h: usize, b: (f64, f64, f64, f64), ow: usize, oh: usize) -> Vec<f64> {
    let (x0, y0) = (b.0.max(0.0), b.1.max(0.0));
    let (x1, y1) = (b.2.min(w as f64), b.3.min(h as f64));
    let at = |x: i64, y: i64| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        px[y * w + x]
    };
    let mut out = Vec::new();
    for j in 0..oh {
        for i in 0..ow {
            let sx = (x0 + (i as f64 + 0.5) * (x1 - x0) / ow as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let sy = (y0 + (j as f64 + 0.5) * (y1 - y0) / oh as f64 - 0.5).clamp(0.0, (h - 1) as f64);
            let (fx, fy) = (sx - sx.floor(), sy - sy.floor());
            let (ix, iy) = (sx.floor() as i64, sy.floor() as i64);
            out.push(
                at(ix, iy) * (1.0 - fx) * (1.0 - fy)
                    + at(ix + 1, iy) * fx * (1.0 - fy)
                    + at(ix, iy + 1) * (1.0 - fx) * fy
                    + at(ix + 1, iy + 1) * fx * fy,
            );
        }
    }
    out
}

/// Textbook evaluation on `[c][y][x]` nested vectors.
pub fn reference_forward(net: &NetworkSpec, img: &Image) -> Vec<f64> {
    let d = net.input();
    let mut t: Tensor = (0..d.channels)
        .map(|c| (0..d.height).map(|y| (0..d.width).map(|x| img.get(x, y, c) as f64 - net.means()[c] as f64).collect()).collect())
        .collect();
    for layer in net.layers() {
        let (c, h, w) = (t.len(), t[0].len(), t[0][0].len());
        t = match layer.kind {
            LayerKind::Conv { out_channels, kernel, stride, pad } => {
                let oh = (h + 2 * pad - kernel) / stride + 1;
                let ow = (w + 2 * pad - kernel) / stride + 1;
                let mut out = vec![vec![vec![0.0; ow]; oh]; out_channels];
                for o in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut s = layer.bias[o] as f64;
                            for i in 0..c {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let y = (oy * stride + ky) as i64 - pad as i64;
                                        let x = (ox * stride + kx) as i64 - pad as i64;
                                        if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                                            let wt = layer.weights[((o * c + i) * kernel + ky) * kernel + kx] as f64;
                                            s += wt * t[i][y as usize][x as usize];
                                        }
                                    }
                                }
                            }
                            out[o][oy][ox] = s;
                        }
                    }
                }
                out
            }
            LayerKind::Relu => t.iter().map(|p| p.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()).collect(),
            LayerKind::Maxpool { kernel, stride } => {
                let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
                (0..c)
                    .map(|ch| {
                        (0..oh)
                            .map(|oy| {
                                (0..ow)
                                    .map(|ox| {
                                        let mut m = f64::NEG_INFINITY;
                                        for ky in 0..kernel {
                                            for kx in 0..kernel {
                                                m = m.max(t[ch][oy * stride + ky][ox * stride + kx]);
                                            }
                                        }
                                        m
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            }
            LayerKind::FullyConnected { out_dim } => {
                let flat: Vec<f64> = t.iter().flatten().flatten().copied().collect();
                (0..out_dim)
                    .map(|o| {
                        let s = (0..flat.len()).map(|j| layer.weights[o * flat.len() + j] as f64 * flat[j]).sum::<f64>() + layer.bias[o] as f64;
                        vec![vec![s]]
                    })
                    .collect()
            }
            LayerKind::Softmax => {
                let flat: Vec<f64> = t.iter().flatten().flatten().copied().collect();
                let m = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = flat.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = e.iter().sum();
                vec![vec![e.iter().map(|v| v / z).collect()]]
            }
        };
    }
    t.into_iter().flatten().flatten().collect()
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Up to three hidden layers plus the softmax terminal.
pub fn random_net(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let channels = if rng.random_bool(0.5) { 1 } else { 3 };
    let (w, h) = (rng.random_range(2..=32), rng.random_range(2..=32));
    let means: Vec<f32> = (0..channels).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut shape = (channels, h, w);
    let mut layers = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let (c, h, w) = shape;
        let name = format!("l{i}");
        let pick = rng.random_range(0..4);
        if pick == 0 && h.min(w) >= 1 {
            let kernel = rng.random_range(1..=h.min(w).min(5));
            let pad = rng.random_range(0..=kernel / 2);
            let stride = rng.random_range(1..=2);
            let oc = rng.random_range(1..=4);
            layers.push(Layer::with_params(
                name,
                LayerKind::Conv { out_channels: oc, kernel, stride, pad },
                random_params(rng, oc * c * kernel * kernel),
                random_params(rng, oc),
            ));
            shape = (oc, (h + 2 * pad - kernel) / stride + 1, (w + 2 * pad - kernel) / stride + 1);
        } else if pick == 1 {
            layers.push(Layer::new(name, LayerKind::Relu));
        } else if pick == 2 && h.min(w) >= 2 {
            let kernel = rng.random_range(1..=h.min(w).min(3));
            let stride = rng.random_range(1..=kernel);
            layers.push(Layer::new(name, LayerKind::Maxpool { kernel, stride }));
            shape = (c, (h - kernel) / stride + 1, (w - kernel) / stride + 1);
        } else {
            let out = rng.random_range(2..=10);
            layers.push(Layer::with_params(name, LayerKind::FullyConnected { out_dim: out }, random_params(rng, out * c * h * w), random_params(rng, out)));
            shape = (out, 1, 1);
        }
    }
    layers.push(Layer::new("prob", LayerKind::Softmax));
    NetworkSpec::new(InputDims { width: w, height: h, channels }, means, layers).unwrap()
}

/// Exponential draws normalized; about a third of points are sparse.
pub fn random_simplex(rng: &mut ChaCha8Rng, classes: usize) -> Posterior {
    let sparse = rng.random_bool(0.3);
    let mut v: Vec<f64> = (0..classes)
        .map(|_| if sparse && rng.random_bool(0.7) { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    Posterior::new(v.into_iter().map(|x| x / s).collect()).unwrap()
}

pub fn shannon_oracle(p: &Posterior) -> f64 {
    -p.probs().iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Cyclic Jacobi rotations; returns eigenvalues (unsorted) of a symmetric matrix.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn covariance(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, d) = (data.len(), data[0].len());
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    (0..d).map(|a| (0..d).map(|b| data.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n as f64).collect()).collect()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    // anisotropic so the eigenvalues are well separated
    (0..n).map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (d - j) as f64).collect()).collect()
}
