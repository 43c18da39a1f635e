//! Optimal values of the robust scenario programs computed by the barrier
//! oracle, with formulations written independently of the library's
//! encodings (sign-pattern rows for the 1-norm, explicit square epigraph for
//! the area, pseudo-inverse start for zonotopes).

use nalgebra::{DMatrix, DVector};
use reachtube::fit::{FitConfig, Geometry};
use reachtube::{PNorm, SizeProxy, TrajectoryBatch};

use super::barrier::{self, Con, Lin, Problem};

struct Vertex {
    i: usize,
    k: usize,
    v: Vec<f64>,
}

fn vertices(batch: &TrajectoryBatch, cfg: &FitConfig) -> Vec<Vertex> {
    let offsets = cfg.perturbation.offsets(batch.dim()).unwrap();
    let mut out = Vec::new();
    for (i, x) in batch.iter().enumerate() {
        for k in 0..=batch.horizon() {
            for o in &offsets {
                let v = x.state(k).iter().zip(o).map(|(a, b)| a + b).collect();
                out.push(Vertex { i, k, v });
            }
        }
    }
    out
}

fn means(vs: &[Vertex], steps: usize, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; steps];
    let mut cnt = vec![0.0; steps];
    for v in vs {
        cnt[v.k] += 1.0;
        for l in 0..n {
            m[v.k][l] += v.v[l];
        }
    }
    for k in 0..steps {
        for l in 0..n {
            m[k][l] /= cnt[k];
        }
    }
    m
}

fn shapes_for(given: &[DMatrix<f64>], steps: usize) -> Vec<DMatrix<f64>> {
    if given.len() == 1 {
        vec![given[0].clone(); steps]
    } else {
        assert_eq!(given.len(), steps, "oracle needs explicit shapes");
        given.to_vec()
    }
}

/// Optimal objective of the configured program.
pub fn objective(batch: &TrajectoryBatch, cfg: &FitConfig) -> f64 {
    let n = batch.dim();
    let steps = batch.horizon() + 1;
    let count = batch.len();
    let vs = vertices(batch, cfg);
    let mu = means(&vs, steps, n);
    let w = match cfg.geometry {
        Geometry::Zonotope { .. } => cfg.rho,
        _ => cfg.rho * steps as f64,
    };

    let mut cons = Vec::new();
    let mut eqs = Vec::new();
    let mut c = Vec::new();
    let mut x0 = Vec::new();
    let alloc = |c: &mut Vec<f64>, x0: &mut Vec<f64>, cost: f64, start: f64| {
        c.push(cost);
        x0.push(start);
        c.len() - 1
    };

    match &cfg.geometry {
        Geometry::Ball { .. } | Geometry::EllipsoidFixed { .. } => {
            let h = match &cfg.geometry {
                Geometry::EllipsoidFixed { shapes } => shapes_for(shapes, steps),
                _ => vec![DMatrix::identity(n, n); steps],
            };
            let p = match cfg.geometry {
                Geometry::Ball { p } => p,
                _ => PNorm::L2,
            };
            let volume = cfg.proxy == SizeProxy::BallVolume;
            let cidx: Vec<usize> = (0..steps * n)
                .map(|j| alloc(&mut c, &mut x0, 0.0, mu[j / n][j % n]))
                .collect();
            // Start radius: strictly larger than every vertex distance.
            let mut rad = vec![0.0f64; steps];
            for v in &vs {
                let d = DVector::from_fn(n, |l, _| v.v[l] - mu[v.k][l]);
                let hd = &h[v.k] * d;
                let dist = match p {
                    PNorm::L1 => hd.iter().map(|z| z.abs()).sum(),
                    PNorm::L2 => hd.norm(),
                    PNorm::Inf => hd.amax(),
                };
                rad[v.k] = rad[v.k].max(dist);
            }
            let vol = match p {
                PNorm::L2 => std::f64::consts::PI,
                PNorm::L1 => 2.0,
                PNorm::Inf => 4.0,
            };
            let size_cost = if volume && n == 1 { 2.0 } else if volume { 0.0 } else { 1.0 };
            let ridx: Vec<usize> = (0..steps)
                .map(|k| alloc(&mut c, &mut x0, size_cost, rad[k] + 1.0))
                .collect();
            let xidx: Vec<usize> = (0..count).map(|_| alloc(&mut c, &mut x0, w, 1.0)).collect();
            if volume && n > 1 {
                assert_eq!(n, 2, "oracle supports the area proxy only");
                for k in 0..steps {
                    let r0 = rad[k] + 1.0;
                    let u = alloc(&mut c, &mut x0, vol, r0 * r0 + 1.0);
                    cons.push(Con::Square { u, r: ridx[k] });
                }
            }
            for &r in &ridx {
                cons.push(Con::Pos(Lin::var(r)));
            }
            for &x in &xidx {
                cons.push(Con::Pos(Lin::var(x)));
            }
            for v in &vs {
                let bound = Lin::new(vec![(ridx[v.k], 1.0), (xidx[v.i], 1.0)], 0.0);
                // Rows of H (v − c).
                let rows: Vec<Lin> = (0..n)
                    .map(|r| {
                        let hk = &h[v.k];
                        let b = (0..n).map(|l| hk[(r, l)] * v.v[l]).sum();
                        Lin::new((0..n).map(|l| (cidx[v.k * n + l], -hk[(r, l)])).collect(), b)
                    })
                    .collect();
                match p {
                    PNorm::L2 => cons.push(Con::Soc { t: bound, rows }),
                    PNorm::Inf => {
                        for r in rows {
                            let mut lo = bound.clone();
                            lo.a.extend(r.a.iter().map(|(i, q)| (*i, -q)));
                            lo.b -= r.b;
                            cons.push(Con::Pos(lo));
                            let mut hi = bound.clone();
                            hi.a.extend(r.a.iter().copied());
                            hi.b += r.b;
                            cons.push(Con::Pos(hi));
                        }
                    }
                    PNorm::L1 => {
                        for pattern in 0..1usize << n {
                            let mut e = bound.clone();
                            for (l, r) in rows.iter().enumerate() {
                                let sign = if pattern >> l & 1 == 1 { 1.0 } else { -1.0 };
                                e.a.extend(r.a.iter().map(|(i, q)| (*i, -sign * q)));
                                e.b -= sign * r.b;
                            }
                            cons.push(Con::Pos(e));
                        }
                    }
                }
            }
        }
        Geometry::EllipsoidLogdet { .. } => {
            let mut amax = vec![0.0f64; steps * n];
            for v in &vs {
                for l in 0..n {
                    amax[v.k * n + l] = amax[v.k * n + l].max(v.v[l].abs());
                }
            }
            let d0: Vec<f64> = amax.iter().map(|a| 1.0 / (1.0 + a)).collect();
            let didx: Vec<usize> = d0.iter().map(|&d| alloc(&mut c, &mut x0, 0.0, d)).collect();
            let bidx: Vec<usize> = (0..steps * n).map(|_| alloc(&mut c, &mut x0, 0.0, 0.0)).collect();
            let xidx: Vec<usize> = (0..count).map(|_| alloc(&mut c, &mut x0, w, 1.0)).collect();
            for j in 0..steps * n {
                let t = alloc(&mut c, &mut x0, 1.0, -d0[j].ln() + 1.0);
                cons.push(Con::NegLog { t, d: didx[j] });
            }
            for &x in &xidx {
                cons.push(Con::Pos(Lin::var(x)));
            }
            for v in &vs {
                let rows = (0..n)
                    .map(|l| {
                        let j = v.k * n + l;
                        Lin::new(vec![(didx[j], v.v[l]), (bidx[j], 1.0)], 0.0)
                    })
                    .collect();
                cons.push(Con::Soc {
                    t: Lin::new(vec![(xidx[v.i], 1.0)], 1.0),
                    rows,
                });
            }
        }
        Geometry::Zonotope { generators, .. } => {
            let g = shapes_for(generators, steps);
            let m = g[0].ncols();
            let cidx: Vec<usize> = (0..steps * n)
                .map(|j| alloc(&mut c, &mut x0, 0.0, mu[j / n][j % n]))
                .collect();
            let pinv: Vec<DMatrix<f64>> = g
                .iter()
                .map(|gk| gk.transpose() * (gk * gk.transpose()).try_inverse().unwrap())
                .collect();
            let zetas: Vec<DVector<f64>> = vs
                .iter()
                .map(|v| &pinv[v.k] * DVector::from_fn(n, |l, _| v.v[l] - mu[v.k][l]))
                .collect();
            let mut amax = vec![0.0f64; steps * m];
            for (v, z) in vs.iter().zip(&zetas) {
                for q in 0..m {
                    amax[v.k * m + q] = amax[v.k * m + q].max(z[q].abs());
                }
            }
            let aidx: Vec<usize> = amax.iter().map(|a| alloc(&mut c, &mut x0, 1.0, a + 1.0)).collect();
            let xidx: Vec<usize> = (0..count).map(|_| alloc(&mut c, &mut x0, w, 1.0)).collect();
            for &a in &aidx {
                cons.push(Con::Pos(Lin::var(a)));
            }
            for &x in &xidx {
                cons.push(Con::Pos(Lin::var(x)));
            }
            for (v, z) in vs.iter().zip(&zetas) {
                let zidx: Vec<usize> = (0..m).map(|q| alloc(&mut c, &mut x0, 0.0, z[q])).collect();
                for l in 0..n {
                    let mut e = vec![(cidx[v.k * n + l], 1.0)];
                    e.extend((0..m).map(|q| (zidx[q], g[v.k][(l, q)])));
                    eqs.push(Lin::new(e, -v.v[l]));
                }
                for q in 0..m {
                    let a = aidx[v.k * m + q];
                    let xi = xidx[v.i];
                    cons.push(Con::Pos(Lin::new(vec![(a, 1.0), (xi, 1.0), (zidx[q], -1.0)], 0.0)));
                    cons.push(Con::Pos(Lin::new(vec![(a, 1.0), (xi, 1.0), (zidx[q], 1.0)], 0.0)));
                }
            }
        }
    }
    let problem = Problem {
        n: c.len(),
        c,
        cons,
        eqs,
    };
    barrier::solve(&problem, x0).1
}
