//! Shared helpers for the integration suites: a finite-difference oracle
//! for iterate partials and a closed-form fold-locus oracle for families
//! of the shape `x + theta + s u(x) + w(x)`. Everything here is
//! deliberately independent of the jet and continuation machinery it
//! cross-checks.

#![allow(dead_code)]

pub const TAU: f64 = std::f64::consts::TAU;

/// Value and the 7 tracked partials (dx, ds, dtheta, dxx, dxs, dxtheta,
/// dxxx) of a scalar function of (s, theta, x) by central differences.
/// The pure third derivative uses a wide step with one Richardson
/// extrapolation; everything else uses h = 1e-5.
pub fn central_diffs(f: &dyn Fn(f64, f64, f64) -> f64, s: f64, theta: f64, x: f64) -> [f64; 8] {
    let h = 1e-5;
    let value = f(s, theta, x);
    let dx = (f(s, theta, x + h) - f(s, theta, x - h)) / (2.0 * h);
    let ds = (f(s + h, theta, x) - f(s - h, theta, x)) / (2.0 * h);
    let dtheta = (f(s, theta + h, x) - f(s, theta - h, x)) / (2.0 * h);
    let dxx = (f(s, theta, x + h) - 2.0 * value + f(s, theta, x - h)) / (h * h);
    let dxs = (f(s + h, theta, x + h) - f(s + h, theta, x - h) - f(s - h, theta, x + h)
        + f(s - h, theta, x - h))
        / (4.0 * h * h);
    let dxtheta = (f(s, theta + h, x + h) - f(s, theta + h, x - h) - f(s, theta - h, x + h)
        + f(s, theta - h, x - h))
        / (4.0 * h * h);
    let d3 = |h: f64| {
        (f(s, theta, x + 2.0 * h) - 2.0 * f(s, theta, x + h) + 2.0 * f(s, theta, x - h)
            - f(s, theta, x - 2.0 * h))
            / (2.0 * h * h * h)
    };
    let h3 = 1e-3;
    let dxxx = (4.0 * d3(h3 / 2.0) - d3(h3)) / 3.0;
    [value, dx, ds, dtheta, dxx, dxs, dxtheta, dxxx]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-9)
}

/// A trigonometric polynomial `sum sin_k sin(2 pi k x) + cos_k cos(2 pi k x)`
/// with closed-form derivatives; the oracle's substitute for the library's
/// series evaluation.
#[derive(Clone)]
pub struct Trig {
    /// (k, coefficient) pairs.
    pub sin: Vec<(u32, f64)>,
    pub cos: Vec<(u32, f64)>,
}

impl Trig {
    pub fn deriv(&self, x: f64, order: u32) -> f64 {
        let mut out = 0.0;
        for &(k, c) in &self.sin {
            let w = TAU * k as f64;
            let (s, co) = (w * x).sin_cos();
            let v = match order % 4 {
                0 => s,
                1 => co,
                2 => -s,
                _ => -co,
            };
            out += c * w.powi(order as i32) * v;
        }
        for &(k, c) in &self.cos {
            let w = TAU * k as f64;
            let (s, co) = (w * x).sin_cos();
            let v = match order % 4 {
                0 => co,
                1 => -s,
                2 => -co,
                _ => s,
            };
            out += c * w.powi(order as i32) * v;
        }
        out
    }
}

/// Closed-form fold locus of `x -> x + theta + s u(x) + w(x)` for fixed
/// points: the multiplier-1 condition gives `s(x) = -w'(x)/u'(x)` and the
/// fixed-point condition `theta(x) = -(s(x) u(x) + w(x))`, so the locus is
/// parameterized by the phase.
pub struct UwLocus {
    pub u: Trig,
    pub w: Trig,
    pub s_box: [f64; 2],
    pub theta_box: [f64; 2],
}

#[derive(Debug)]
pub struct LocusOracle {
    pub curves: usize,
    pub boundary_endpoints: usize,
    /// (s, theta) of each cusp.
    pub cusps: Vec<[f64; 2]>,
    /// (s, theta, x1, x2) of each transverse self-intersection.
    pub intersections: Vec<[f64; 4]>,
}

impl UwLocus {
    pub fn s_of(&self, x: f64) -> f64 {
        -self.w.deriv(x, 1) / self.u.deriv(x, 1)
    }

    pub fn theta_of(&self, x: f64) -> f64 {
        -(self.s_of(x) * self.u.deriv(x, 0) + self.w.deriv(x, 0))
    }

    fn in_box(&self, s: f64, theta: f64) -> bool {
        s.is_finite()
            && theta.is_finite()
            && s >= self.s_box[0]
            && s <= self.s_box[1]
            && theta >= self.theta_box[0]
            && theta <= self.theta_box[1]
    }

    /// The cusp condition on the parameterized locus: s'(x) = 0, i.e.
    /// `w' u'' - u' w'' = 0` (equivalently the vanishing second derivative
    /// of the displacement after substituting the fold value of s).
    fn cusp_fn(&self, x: f64) -> f64 {
        self.w.deriv(x, 1) * self.u.deriv(x, 2) - self.u.deriv(x, 1) * self.w.deriv(x, 2)
    }

    /// Brute-force classification of the locus: dense phase sampling for
    /// the arcs, bisection on the cusp condition, and a parameter-cell
    /// (cells x cells) clustering pass refined by a closed-form Newton for
    /// the self-intersections.
    pub fn classify(&self, n_samples: usize, cells: usize) -> LocusOracle {
        let n = n_samples;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let in_box: Vec<bool> = xs
            .iter()
            .map(|&x| self.in_box(self.s_of(x), self.theta_of(x)))
            .collect();

        // Cusps first (needed to split arcs).
        let mut cusp_x = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (self.cusp_fn(xs[i]), self.cusp_fn(xs[j]));
            if a == 0.0 || a.signum() == b.signum() {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (xs[i], xs[i] + 1.0 / n as f64, a);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = self.cusp_fn(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let xc = 0.5 * (lo + hi);
            let (sc, tc) = (self.s_of(xc), self.theta_of(xc));
            if self.in_box(sc, tc) {
                cusp_x.push(xc);
            }
        }
        let cusps: Vec<[f64; 2]> = cusp_x
            .iter()
            .map(|&x| [self.s_of(x), self.theta_of(x)])
            .collect();

        // Circular arcs of in-box samples, split at interior cusps.
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < n && in_box[i] {
            i += 1;
        }
        if i == n {
            // The whole circle is one closed in-box loop.
            runs.push((0, n - 1));
        } else {
            let start_scan = i;
            let mut run_start: Option<usize> = None;
            for step in 0..=n {
                let idx = (start_scan + step) % n;
                if in_box[idx] {
                    if run_start.is_none() {
                        run_start = Some(idx);
                    }
                } else if let Some(rs) = run_start.take() {
                    let end = (idx + n - 1) % n;
                    runs.push((rs, end));
                }
            }
        }
        let mut curves = 0;
        let mut boundary_endpoints = 0;
        for &(a, b) in &runs {
            let contains = |x: f64| {
                let (fa, fb) = (a as f64 / n as f64, b as f64 / n as f64);
                if fa <= fb {
                    x > fa && x < fb
                } else {
                    x > fa || x < fb
                }
            };
            let inner_cusps = cusp_x.iter().filter(|&&x| contains(x)).count();
            curves += 1 + inner_cusps;
            boundary_endpoints += 2;
        }

        // Parameter cells hit by two well-separated phase clusters. A
        // crossing can sit exactly on a lattice line, where no single cell
        // sees both branches, so the pass runs twice with the lattice
        // shifted by half a cell.
        let mut intersections: Vec<[f64; 4]> = Vec::new();
        for offset in [0.0, 0.5] {
            for sol in self.crossing_pass(&xs, &in_box, cells, offset) {
                let dup = intersections.iter().any(|r| {
                    (r[0] - sol[0]).abs() < 1e-6 && (r[1] - sol[1]).abs() < 1e-6
                });
                if !dup && self.in_box(sol[0], sol[1]) {
                    intersections.push(sol);
                }
            }
        }
        intersections.sort_by(|a, b| a.partial_cmp(b).unwrap());

        LocusOracle {
            curves,
            boundary_endpoints,
            cusps,
            intersections,
        }
    }

    /// One lattice pass: flags cells whose in-box samples form two phase
    /// clusters, groups adjacent flagged cells, and refines one candidate
    /// pair per group.
    fn crossing_pass(
        &self,
        xs: &[f64],
        in_box: &[bool],
        cells: usize,
        offset: f64,
    ) -> Vec<[f64; 4]> {
        let s_span = self.s_box[1] - self.s_box[0];
        let t_span = self.theta_box[1] - self.theta_box[0];
        let mut cell_hits: std::collections::HashMap<(i64, i64), Vec<f64>> =
            std::collections::HashMap::new();
        for (i, &x) in xs.iter().enumerate() {
            if !in_box[i] {
                continue;
            }
            let (s, t) = (self.s_of(x), self.theta_of(x));
            let ci = ((s - self.s_box[0]) / s_span * cells as f64 + offset).floor() as i64;
            let cj = ((t - self.theta_box[0]) / t_span * cells as f64 + offset).floor() as i64;
            cell_hits.entry((ci, cj)).or_default().push(x);
        }
        let mut flagged: std::collections::HashMap<(i64, i64), (f64, f64)> =
            std::collections::HashMap::new();
        for (&cell, xs_in) in &cell_hits {
            let mut xs_in = xs_in.clone();
            xs_in.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut best_gap = 0.0;
            let mut pair = None;
            let mut gaps: Vec<f64> = Vec::new();
            for k in 0..xs_in.len() {
                let next = xs_in[(k + 1) % xs_in.len()];
                let gap = if k + 1 == xs_in.len() {
                    1.0 - xs_in[k] + xs_in[0]
                } else {
                    next - xs_in[k]
                };
                gaps.push(gap);
                if gap > best_gap {
                    best_gap = gap;
                    pair = Some((xs_in[k], next));
                }
            }
            gaps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            // Two clusters iff the two largest circular gaps both exceed
            // the cluster width scale.
            if gaps.len() >= 2 && gaps[1] > 1e-3 {
                flagged.insert(cell, pair.unwrap());
            }
        }
        let mut used: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut keys: Vec<(i64, i64)> = flagged.keys().copied().collect();
        keys.sort();
        for cell in keys {
            if used.contains(&cell) {
                continue;
            }
            let (xa, xb) = flagged[&cell];
            let mut stack = vec![cell];
            while let Some(c) = stack.pop() {
                if !used.insert(c) {
                    continue;
                }
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let nb = (c.0 + di, c.1 + dj);
                        if flagged.contains_key(&nb) && !used.contains(&nb) {
                            stack.push(nb);
                        }
                    }
                }
            }
            if let Some(sol) = self.refine_crossing(xa, xb) {
                out.push(sol);
            }
        }
        out
    }

    /// Newton (finite-difference Jacobian) on
    /// `(s(x1) - s(x2), theta(x1) - theta(x2)) = 0` from a cluster pair;
    /// merging pairs collapse onto x1 = x2 and are rejected.
    fn refine_crossing(&self, x1: f64, x2: f64) -> Option<[f64; 4]> {
        let mut v = [x1, x2];
        for _ in 0..200 {
            let f = [
                self.s_of(v[0]) - self.s_of(v[1]),
                self.theta_of(v[0]) - self.theta_of(v[1]),
            ];
            if f[0].abs() < 1e-13 && f[1].abs() < 1e-13 {
                let gap = {
                    let d = (v[0] - v[1]).abs().fract();
                    d.min(1.0 - d)
                };
                if gap < 1e-6 {
                    return None;
                }
                // Transversality: branches merging at a cusp satisfy the
                // crossing equations to round-off while both tangents
                // degenerate; a genuine crossing has independent tangents.
                let h = 1e-7;
                let tangent = |x: f64| {
                    [
                        (self.s_of(x + h) - self.s_of(x - h)) / (2.0 * h),
                        (self.theta_of(x + h) - self.theta_of(x - h)) / (2.0 * h),
                    ]
                };
                let t1 = tangent(v[0]);
                let t2 = tangent(v[1]);
                let det = t1[0] * t2[1] - t1[1] * t2[0];
                if det.abs() < 1e-8 {
                    return None;
                }
                return Some([self.s_of(v[0]), self.theta_of(v[0]), v[0], v[1]]);
            }
            let h = 1e-7;
            let mut jac = [[0.0f64; 2]; 2];
            for j in 0..2 {
                let mut vp = v;
                vp[j] += h;
                let mut vm = v;
                vm[j] -= h;
                jac[0][j] = (self.s_of(vp[0]) - self.s_of(vp[1]) - self.s_of(vm[0])
                    + self.s_of(vm[1]))
                    / (2.0 * h);
                jac[1][j] = (self.theta_of(vp[0]) - self.theta_of(vp[1])
                    - self.theta_of(vm[0])
                    + self.theta_of(vm[1]))
                    / (2.0 * h);
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-16 {
                return None;
            }
            let d = [
                (-f[0] * jac[1][1] + f[1] * jac[0][1]) / det,
                (-jac[0][0] * f[1] + jac[1][0] * f[0]) / det,
            ];
            for j in 0..2 {
                v[j] += d[j].clamp(-0.05, 0.05);
            }
            if !v.iter().all(|x| x.is_finite()) {
                return None;
            }
        }
        None
    }
}
